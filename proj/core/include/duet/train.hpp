#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "duet/eval.hpp"
#include "duet/grpo.hpp"
#include "duet/policy.hpp"
#include "duet/reward.hpp"
#include "duet/runlog.hpp"
#include "duet/world.hpp"

namespace duet {

struct TrainConfig {
  GrpoConfig grpo;      // group size, clip, KL coefficient, RL learning rate
  StageWeights lambda;  // reward weights, all 1 by default
  double anchor_rouge_threshold = 0.6;
  int anchor_max_retries = 16;
  int sft_steps = 3000;
  int stage1_steps = 800;
  int stage2_steps = 1000;
  double sft_learning_rate = 0.5;
  double frame_sft_learning_rate = 0.2;
  int eval_every = 0;  // 0: evaluate only at the end of run_variant
  std::uint64_t seed = 0;
  int n_ref_frames = 6;
  int caption_max_len = 48;
  int video_max_frames = 5;
  OptimizerMode optimizer_mode = OptimizerMode::ascent;

  void validate() const;
  EvalConfig eval_config() const {
    return EvalConfig{n_ref_frames, caption_max_len, video_max_frames};
  }
};

// Resolved configuration as printable key-value pairs (log headers, config
// echo files).
std::map<std::string, std::string> config_echo(const TrainConfig& cfg, const Vocab& vocab);

enum class AblationVariant {
  sft_only,
  grpo_vlm,
  grpo_vdm,
  grpo_cascade,
  joint_stage1,
  joint_stage1_2,
  joint_all_in_one,
};

struct VariantSpec {
  AblationVariant variant = AblationVariant::joint_stage1_2;
  bool no_rt1 = false;
  bool no_rv1 = false;
  bool no_rc2 = false;
  bool no_rv2 = false;

  // Accepts names like "JOINT_STAGE1_2" or "JOINT_STAGE1_2:no_rc2".
  static VariantSpec parse(const std::string& text);
  std::string name() const;
  void validate() const;  // drop flags only combine with joint variants
};

std::vector<VariantSpec> all_base_variants();

// Periodic evaluation and checkpointing during training, driven by
// TrainConfig::eval_every. A null eval_set disables evaluation records; an
// empty checkpoint_dir disables checkpoint files.
struct PeriodicEval {
  const std::vector<Episode>* eval_set = nullptr;
  std::filesystem::path checkpoint_dir;
};

// Teacher-forced maximum likelihood on ground-truth captions and videos.
void sft_train(Policy& captioner, Policy& frame_policy, const std::vector<Episode>& train,
               const Vocab& vocab, const TrainConfig& cfg, Rng& rng, RunLog& log,
               const PeriodicEval& periodic = {});

// Stage 1: optimize the captioner against the composite reward while the
// frame policy stays frozen (enforced by const).
void stage1_train(Policy& captioner, const Policy& frame_policy,
                  const std::vector<Episode>& train, const Vocab& vocab, const TrainConfig& cfg,
                  Rng& rng, RunLog& log, bool include_rt1 = true, bool include_rv1 = true,
                  const PeriodicEval& periodic = {});

enum class AnchorMode { sampled, ground_truth };

struct AnchorResult {
  Caption caption;
  double rouge = 1.0;
  bool fallback = false;
  int attempts = 0;
};

// Samples anchor captions from the frozen captioner until one clears the
// ROUGE-L threshold; falls back to the ground-truth caption after
// anchor_max_retries attempts.
AnchorResult anchor_sample(const Policy& frozen_captioner, const Episode& episode,
                           const Vocab& vocab, const TrainConfig& cfg, Rng& rng);

// Stage 2: optimize the frame policy conditioned on filtered anchor captions
// while the captioner stays frozen.
void stage2_train(const Policy& captioner, Policy& frame_policy,
                  const std::vector<Episode>& train, const Vocab& vocab, const TrainConfig& cfg,
                  Rng& rng, RunLog& log, AnchorMode anchor_mode = AnchorMode::sampled,
                  bool include_rv2 = true, bool include_rc2 = true,
                  const PeriodicEval& periodic = {});

// The single-loop baseline: both policies updated every step from one shared
// stage-1-style reward computed on the final video.
void all_in_one_train(Policy& captioner, Policy& frame_policy,
                      const std::vector<Episode>& train, const Vocab& vocab,
                      const TrainConfig& cfg, Rng& rng, RunLog& log, bool include_rt1 = true,
                      bool include_rv1 = true);

struct VariantResult {
  Policy captioner;
  Policy frame_policy;
  RunLog log;
  MetricTable metrics;
};

VariantResult run_variant(const VariantSpec& spec, const std::vector<Episode>& train,
                          const std::vector<Episode>& eval_set, const Vocab& vocab,
                          const TrainConfig& cfg,
                          const std::filesystem::path& checkpoint_dir = {});

// Scalar used to order ablation variants: the unweighted mean of ROUGE-L,
// CLIP-V, CLIP-T, and 1 - frechet/(1+frechet).
double combined_score(const MetricRow& row);

// Tokens preceding the answer span (the thinking-length curve).
double think_length(const Caption& caption);
double answer_length(const Caption& caption);

}  // namespace duet
