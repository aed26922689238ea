#include "duet/eval.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "duet/reward.hpp"

namespace duet {

namespace {

struct SplitAccumulator {
  double bleu[4] = {0, 0, 0, 0};
  double rouge = 0.0;
  double clipv = 0.0;
  double clipt = 0.0;
  std::vector<Vec> generated_frames;
  std::vector<Vec> gt_frames;
  int episodes = 0;
};

MetricRow finalize(SplitAccumulator& acc) {
  MetricRow row;
  row.episodes = acc.episodes;
  if (acc.episodes == 0) return row;
  row.bleu1 = acc.bleu[0] / acc.episodes;
  row.bleu2 = acc.bleu[1] / acc.episodes;
  row.bleu3 = acc.bleu[2] / acc.episodes;
  row.bleu4 = acc.bleu[3] / acc.episodes;
  row.rouge_l = acc.rouge / acc.episodes;
  row.clip_v = acc.clipv / acc.episodes;
  row.clip_t = acc.clipt / acc.episodes;
  row.frechet = frechet_proxy(acc.generated_frames, acc.gt_frames);
  return row;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

MetricTable evaluate(const Policy& captioner, const Policy& frame_policy,
                     const std::vector<Episode>& eval_set, const Vocab& vocab,
                     const EvalConfig& cfg, const std::unordered_set<std::int64_t>& train_ids) {
  // Aggregation runs in id order so the table is exactly invariant to the
  // ordering of eval_set.
  std::vector<const Episode*> ordered;
  ordered.reserve(eval_set.size());
  std::unordered_set<std::int64_t> seen;
  for (const Episode& ep : eval_set) {
    if (train_ids.contains(ep.id)) {
      throw std::invalid_argument("evaluate: episode id " + std::to_string(ep.id) +
                                  " overlaps the training manifest");
    }
    if (!seen.insert(ep.id).second) {
      throw std::invalid_argument("evaluate: duplicate episode id " + std::to_string(ep.id));
    }
    ordered.push_back(&ep);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const Episode* a, const Episode* b) { return a->id < b->id; });

  SplitAccumulator acc_proc, acc_pred;
  for (const Episode* ep : ordered) {
    const CaptionContext cap_ctx(vocab, ep->input_video, ep->question, cfg.caption_max_len);
    const Trajectory cap_traj = greedy_trajectory(captioner, cap_ctx);
    const Caption caption = trajectory_to_caption(cap_traj, vocab);

    const FrameContext frame_ctx(vocab, caption, ep->input_video, cfg.n_ref_frames,
                                 cfg.video_max_frames);
    const Trajectory vid_traj = greedy_trajectory(frame_policy, frame_ctx);
    const SymbolicVideo video = trajectory_to_video(vid_traj, vocab);

    const std::vector<int> cand = caption.answer_or_content(vocab);
    const std::vector<int> ref = ep->gt_caption.answer_tokens();

    SplitAccumulator& acc =
        ep->question.kind == QuestionKind::procedural ? acc_proc : acc_pred;
    for (int n = 1; n <= 4; ++n) acc.bleu[n - 1] += bleu(cand, ref, n);
    acc.rouge += rouge_l(cand, ref);
    if (!video.empty()) {
      acc.clipv += clip_v(video, ep->gt_video, vocab);
      acc.clipt += clip_t(ep->gt_caption, video, vocab);
      for (const Frame& f : video.frames) acc.generated_frames.push_back(embed_frame(f, vocab));
    }
    for (const Frame& f : ep->gt_video.frames) acc.gt_frames.push_back(embed_frame(f, vocab));
    ++acc.episodes;
  }

  MetricTable table;
  table.procedural = finalize(acc_proc);
  table.predictive = finalize(acc_pred);
  return table;
}

void report(const std::vector<std::pair<std::string, MetricTable>>& tables,
            const std::filesystem::path& base_path) {
  if (tables.empty()) throw std::invalid_argument("report: no tables");
  std::unordered_set<std::string> names;
  for (const auto& [name, table] : tables) {
    if (!names.insert(name).second) {
      throw std::invalid_argument("report: duplicate variant name " + name);
    }
  }

  std::vector<std::pair<std::string, MetricTable>> sorted = tables;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  const std::filesystem::path csv_path = base_path.string() + ".csv";
  const std::filesystem::path kv_path = base_path.string() + ".kv";
  std::ofstream csv(csv_path);
  std::ofstream kv(kv_path);
  if (!csv || !kv) throw std::runtime_error("report: cannot open output files");

  csv << "variant,bleu1,bleu2,bleu3,bleu4,rouge_l,frechet,clip_v,clip_t\n";
  const auto emit = [&](const std::string& name, const char* split, const MetricRow& row) {
    const std::string variant = name + ":" + split;
    csv << variant;
    const double values[] = {row.bleu1, row.bleu2,   row.bleu3,  row.bleu4,
                             row.rouge_l, row.frechet, row.clip_v, row.clip_t};
    const char* keys[] = {"bleu1", "bleu2", "bleu3", "bleu4",
                          "rouge_l", "frechet", "clip_v", "clip_t"};
    for (int i = 0; i < 8; ++i) {
      csv << "," << format_double(values[i]);
      kv << variant << "." << keys[i] << "=" << format_double(values[i]) << "\n";
    }
    csv << "\n";
  };
  for (const auto& [name, table] : sorted) {
    emit(name, "procedural", table.procedural);
    emit(name, "predictive", table.predictive);
  }
}

std::vector<std::pair<std::string, MetricRow>> parse_report_csv(
    const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("parse_report_csv: cannot open " + csv_path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("parse_report_csv: empty file");

  std::vector<std::pair<std::string, MetricRow>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 9) {
      throw std::runtime_error("parse_report_csv: malformed row: " + line);
    }
    MetricRow row;
    row.bleu1 = std::stod(fields[1]);
    row.bleu2 = std::stod(fields[2]);
    row.bleu3 = std::stod(fields[3]);
    row.bleu4 = std::stod(fields[4]);
    row.rouge_l = std::stod(fields[5]);
    row.frechet = std::stod(fields[6]);
    row.clip_v = std::stod(fields[7]);
    row.clip_t = std::stod(fields[8]);
    rows.emplace_back(fields[0], row);
  }
  return rows;
}

}  // namespace duet
