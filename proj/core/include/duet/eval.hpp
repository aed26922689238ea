#pragma once

#include <filesystem>
#include <string>
#include <unordered_set>
#include <vector>

#include "duet/policy.hpp"
#include "duet/world.hpp"

namespace duet {

struct MetricRow {
  double bleu1 = 0.0, bleu2 = 0.0, bleu3 = 0.0, bleu4 = 0.0;
  double rouge_l = 0.0;
  double frechet = 0.0;
  double clip_v = 0.0;
  double clip_t = 0.0;
  int episodes = 0;
};

struct MetricTable {
  MetricRow procedural;
  MetricRow predictive;

  const MetricRow& row(QuestionKind kind) const {
    return kind == QuestionKind::procedural ? procedural : predictive;
  }
};

struct EvalConfig {
  int n_ref_frames = 6;
  int caption_max_len = 48;
  int video_max_frames = 5;
};

// Greedy-decodes a caption per episode, renders a video conditioned on it,
// and aggregates text and video metrics per benchmark split. The Frechet
// proxy pools all generated-frame embeddings against all ground-truth-frame
// embeddings of the split. Deterministic; never mutates the policies.
// Throws if any episode id appears in train_ids.
MetricTable evaluate(const Policy& captioner, const Policy& frame_policy,
                     const std::vector<Episode>& eval_set, const Vocab& vocab,
                     const EvalConfig& cfg = {},
                     const std::unordered_set<std::int64_t>& train_ids = {});

// Writes `<base>.csv` (fixed column order) and `<base>.kv`, one row per
// variant and split. Throws on duplicate variant names.
void report(const std::vector<std::pair<std::string, MetricTable>>& tables,
            const std::filesystem::path& base_path);

// Parses a report .csv back into rows keyed "variant:split".
std::vector<std::pair<std::string, MetricRow>> parse_report_csv(
    const std::filesystem::path& csv_path);

}  // namespace duet
