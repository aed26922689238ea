#include "duet/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <unordered_set>

namespace duet {

void TrainConfig::validate() const {
  if (anchor_rouge_threshold < 0.0 || anchor_rouge_threshold > 1.0) {
    throw std::invalid_argument("TrainConfig: anchor_rouge_threshold must be in [0,1]");
  }
  if (sft_steps < 1 || stage1_steps < 1 || stage2_steps < 1) {
    throw std::invalid_argument("TrainConfig: step counts must be >= 1");
  }
  if (grpo.group_size < 2) throw std::invalid_argument("TrainConfig: group size must be >= 2");
  if (grpo.clip <= 0.0) throw std::invalid_argument("TrainConfig: clip must be positive");
  if (grpo.beta < 0.0) throw std::invalid_argument("TrainConfig: beta must be >= 0");
  if (anchor_max_retries < 1) {
    throw std::invalid_argument("TrainConfig: anchor_max_retries must be >= 1");
  }
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::map<std::string, std::string> config_echo(const TrainConfig& cfg, const Vocab& vocab) {
  std::map<std::string, std::string> m;
  m["seed"] = std::to_string(cfg.seed);
  m["symbols"] = std::to_string(vocab.symbol_count);
  m["sft_steps"] = std::to_string(cfg.sft_steps);
  m["stage1_steps"] = std::to_string(cfg.stage1_steps);
  m["stage2_steps"] = std::to_string(cfg.stage2_steps);
  m["sft_learning_rate"] = fmt(cfg.sft_learning_rate);
  m["frame_sft_learning_rate"] = fmt(cfg.frame_sft_learning_rate);
  m["rl_learning_rate"] = fmt(cfg.grpo.learning_rate);
  m["group_size"] = std::to_string(cfg.grpo.group_size);
  m["clip"] = fmt(cfg.grpo.clip);
  m["beta"] = fmt(cfg.grpo.beta);
  m["sigma_floor"] = fmt(cfg.grpo.sigma_floor);
  m["kl_mode"] = cfg.grpo.kl_mode == KlMode::k3 ? "k3" : "exact";
  m["lambda_f"] = fmt(cfg.lambda.f);
  m["lambda_t1"] = fmt(cfg.lambda.t1);
  m["lambda_v1"] = fmt(cfg.lambda.v1);
  m["lambda_v2"] = fmt(cfg.lambda.v2);
  m["lambda_c2"] = fmt(cfg.lambda.c2);
  m["anchor_rouge_threshold"] = fmt(cfg.anchor_rouge_threshold);
  m["anchor_max_retries"] = std::to_string(cfg.anchor_max_retries);
  m["n_ref_frames"] = std::to_string(cfg.n_ref_frames);
  m["caption_max_len"] = std::to_string(cfg.caption_max_len);
  m["video_max_frames"] = std::to_string(cfg.video_max_frames);
  m["eval_every"] = std::to_string(cfg.eval_every);
  m["optimizer"] = cfg.optimizer_mode == OptimizerMode::ascent ? "ascent" : "adam";
  return m;
}

namespace {

const char* variant_name(AblationVariant v) {
  switch (v) {
    case AblationVariant::sft_only: return "SFT_ONLY";
    case AblationVariant::grpo_vlm: return "GRPO_VLM";
    case AblationVariant::grpo_vdm: return "GRPO_VDM";
    case AblationVariant::grpo_cascade: return "GRPO_VLM_PLUS_VDM_CASCADE";
    case AblationVariant::joint_stage1: return "JOINT_STAGE1";
    case AblationVariant::joint_stage1_2: return "JOINT_STAGE1_2";
    case AblationVariant::joint_all_in_one: return "JOINT_ALL_IN_ONE";
  }
  return "?";
}

}  // namespace

VariantSpec VariantSpec::parse(const std::string& text) {
  VariantSpec spec;
  std::string base = text;
  std::vector<std::string> flags;
  std::size_t pos;
  while ((pos = base.rfind(':')) != std::string::npos) {
    flags.push_back(base.substr(pos + 1));
    base = base.substr(0, pos);
  }
  bool found = false;
  for (const AblationVariant v :
       {AblationVariant::sft_only, AblationVariant::grpo_vlm, AblationVariant::grpo_vdm,
        AblationVariant::grpo_cascade, AblationVariant::joint_stage1,
        AblationVariant::joint_stage1_2, AblationVariant::joint_all_in_one}) {
    if (base == variant_name(v)) {
      spec.variant = v;
      found = true;
      break;
    }
  }
  if (!found) throw std::invalid_argument("unknown ablation variant: " + base);
  for (const std::string& f : flags) {
    if (f == "no_rt1") spec.no_rt1 = true;
    else if (f == "no_rv1") spec.no_rv1 = true;
    else if (f == "no_rc2") spec.no_rc2 = true;
    else if (f == "no_rv2") spec.no_rv2 = true;
    else throw std::invalid_argument("unknown variant flag: " + f);
  }
  spec.validate();
  return spec;
}

std::string VariantSpec::name() const {
  std::string n = variant_name(variant);
  if (no_rt1) n += ":no_rt1";
  if (no_rv1) n += ":no_rv1";
  if (no_rc2) n += ":no_rc2";
  if (no_rv2) n += ":no_rv2";
  return n;
}

void VariantSpec::validate() const {
  const bool joint_stage1_family = variant == AblationVariant::joint_stage1 ||
                                   variant == AblationVariant::joint_stage1_2 ||
                                   variant == AblationVariant::joint_all_in_one;
  if ((no_rt1 || no_rv1) && !joint_stage1_family) {
    throw std::invalid_argument("variant flags no_rt1/no_rv1 require a joint variant");
  }
  if ((no_rc2 || no_rv2) && variant != AblationVariant::joint_stage1_2) {
    throw std::invalid_argument("variant flags no_rc2/no_rv2 require JOINT_STAGE1_2");
  }
}

std::vector<VariantSpec> all_base_variants() {
  std::vector<VariantSpec> out;
  for (const AblationVariant v :
       {AblationVariant::sft_only, AblationVariant::grpo_vlm, AblationVariant::grpo_vdm,
        AblationVariant::grpo_cascade, AblationVariant::joint_stage1,
        AblationVariant::joint_stage1_2, AblationVariant::joint_all_in_one}) {
    VariantSpec spec;
    spec.variant = v;
    out.push_back(spec);
  }
  return out;
}

double think_length(const Caption& caption) {
  if (caption.spans) {
    return static_cast<double>(caption.spans->think_end - caption.spans->think_begin);
  }
  const auto it =
      std::find(caption.tokens.begin(), caption.tokens.end(), Vocab::kAnswerOpen);
  return static_cast<double>(std::distance(caption.tokens.begin(), it));
}

double answer_length(const Caption& caption) {
  if (!caption.spans) return 0.0;
  return static_cast<double>(caption.spans->answer_end - caption.spans->answer_begin);
}

namespace {

// Emission target for the frame policy: flattened ground-truth frames plus
// the end token when it still fits under the frame budget.
Trajectory video_target(const SymbolicVideo& video, const Vocab& vocab, int max_frames) {
  Trajectory traj;
  const int frames = std::min(video.length(), max_frames);
  for (int f = 0; f < frames; ++f) {
    for (int s : video.frames[f].slots) traj.tokens.push_back(s);
  }
  if (frames < max_frames) {
    traj.tokens.push_back(vocab.symbol_count);  // end token at a frame boundary
    traj.terminated = true;
  }
  traj.logps.assign(traj.tokens.size(), 0.0);
  return traj;
}

Trajectory caption_target(const Caption& caption) {
  Trajectory traj;
  traj.tokens = caption.tokens;
  traj.logps.assign(traj.tokens.size(), 0.0);
  traj.terminated = !caption.tokens.empty() && caption.tokens.back() == Vocab::kEnd;
  return traj;
}

// Mean teacher-forced log-likelihood; also accumulates (1/T) grad log-lik.
double sft_episode_update(const Policy& policy, const SequenceContext& ctx,
                          const Trajectory& target, Mat& grad) {
  const Vec lp = log_probs(policy, ctx, target);
  const int len = target.length();
  double mean = 0.0;
  for (int t = 0; t < len; ++t) {
    mean += lp[t];
    accumulate_grad_log_prob(policy, ctx, target, t, 1.0 / len, grad);
  }
  return mean / len;
}

// Appends an eval record (and optional checkpoints) when the step count
// crosses the periodic boundary.
void maybe_periodic_eval(const PeriodicEval& periodic, const TrainConfig& cfg,
                         const Policy& captioner, const Policy& frame_policy, const Vocab& vocab,
                         const std::string& stage, int step, RunLog& log) {
  if (cfg.eval_every <= 0 || (step + 1) % cfg.eval_every != 0) return;
  if (periodic.eval_set != nullptr) {
    EvalRecord rec;
    rec.step = step;
    rec.stage = stage;
    rec.metrics = evaluate(captioner, frame_policy, *periodic.eval_set, vocab,
                           cfg.eval_config());
    log.append(std::move(rec));
  }
  if (!periodic.checkpoint_dir.empty()) {
    std::filesystem::create_directories(periodic.checkpoint_dir);
    const std::string tag = stage + "_" + std::to_string(step + 1);
    save_policy(captioner, periodic.checkpoint_dir / (tag + "_captioner.ckpt"));
    save_policy(frame_policy, periodic.checkpoint_dir / (tag + "_frame_policy.ckpt"));
  }
}

struct GroupStats {
  std::vector<std::pair<std::string, double>> component_means;
  std::vector<std::pair<std::string, double>> weights;
  double total = 0.0;
};

// Per-component group means; the logged total is re-derived from the means
// so the record satisfies total = sum(weight * component) exactly.
GroupStats summarize(const std::vector<RewardBreakdown>& breakdowns) {
  GroupStats stats;
  if (breakdowns.empty()) return stats;
  const RewardBreakdown& first = breakdowns.front();
  for (std::size_t k = 0; k < first.terms.size(); ++k) {
    double mean = 0.0;
    for (const RewardBreakdown& b : breakdowns) mean += b.terms[k].value;
    mean /= static_cast<double>(breakdowns.size());
    stats.component_means.emplace_back(first.terms[k].name, mean);
    stats.weights.emplace_back(first.terms[k].name, first.terms[k].weight);
    stats.total += first.terms[k].weight * mean;
  }
  return stats;
}

}  // namespace

void sft_train(Policy& captioner, Policy& frame_policy, const std::vector<Episode>& train,
               const Vocab& vocab, const TrainConfig& cfg, Rng& rng, RunLog& log,
               const PeriodicEval& periodic) {
  if (train.empty()) throw std::invalid_argument("sft_train: empty dataset");
  Optimizer cap_opt({cfg.sft_learning_rate, cfg.optimizer_mode});
  Optimizer frame_opt({cfg.frame_sft_learning_rate, cfg.optimizer_mode});
  Mat cap_grad(captioner.weights().rows(), captioner.weights().cols());
  Mat frame_grad(frame_policy.weights().rows(), frame_policy.weights().cols());

  for (int step = 0; step < cfg.sft_steps; ++step) {
    const Episode& ep = train[rng.next_int(static_cast<int>(train.size()))];

    const CaptionContext cap_ctx(vocab, ep.input_video, ep.question, cfg.caption_max_len);
    cap_grad.fill(0.0);
    const double cap_ll =
        sft_episode_update(captioner, cap_ctx, caption_target(ep.gt_caption), cap_grad);
    cap_opt.step(captioner.weights().flat(), cap_grad.flat());

    const FrameContext frame_ctx(vocab, ep.gt_caption, ep.input_video, cfg.n_ref_frames,
                                 cfg.video_max_frames);
    frame_grad.fill(0.0);
    const double frame_ll = sft_episode_update(
        frame_policy, frame_ctx, video_target(ep.gt_video, vocab, cfg.video_max_frames),
        frame_grad);
    frame_opt.step(frame_policy.weights().flat(), frame_grad.flat());

    StepRecord rec;
    rec.step = step;
    rec.stage = "sft";
    rec.components = {{"loglik_caption", cap_ll}, {"loglik_video", frame_ll}};
    rec.weights = {{"loglik_caption", 1.0}, {"loglik_video", 1.0}};
    rec.total = cap_ll + frame_ll;
    rec.think_len = think_length(ep.gt_caption);
    rec.answer_len = answer_length(ep.gt_caption);
    log.append(std::move(rec));
    maybe_periodic_eval(periodic, cfg, captioner, frame_policy, vocab, "sft", step, log);
  }
}

void stage1_train(Policy& captioner, const Policy& frame_policy,
                  const std::vector<Episode>& train, const Vocab& vocab, const TrainConfig& cfg,
                  Rng& rng, RunLog& log, bool include_rt1, bool include_rv1,
                  const PeriodicEval& periodic) {
  if (train.empty()) throw std::invalid_argument("stage1_train: empty dataset");
  const Policy ref = captioner.snapshot();
  Optimizer opt({cfg.grpo.learning_rate, cfg.optimizer_mode});

  for (int step = 0; step < cfg.stage1_steps; ++step) {
    const Episode& ep = train[rng.next_int(static_cast<int>(train.size()))];
    const CaptionContext ctx(vocab, ep.input_video, ep.question, cfg.caption_max_len);

    GroupRollout group =
        rollout_group(captioner, ctx, cfg.grpo.group_size, rng, std::to_string(ep.id));

    std::vector<RewardBreakdown> breakdowns;
    breakdowns.reserve(group.group_size());
    double think_sum = 0.0, answer_sum = 0.0;
    for (const Trajectory& traj : group.trajectories) {
      const Caption caption = trajectory_to_caption(traj, vocab);
      const FrameContext frame_ctx(vocab, caption, ep.input_video, cfg.n_ref_frames,
                                   cfg.video_max_frames);
      const SymbolicVideo video =
          trajectory_to_video(greedy_trajectory(frame_policy, frame_ctx), vocab);
      breakdowns.push_back(stage1_reward(caption, video, ep.gt_caption, ep.gt_video, vocab,
                                         cfg.lambda, include_rt1, include_rv1));
      group.rewards.push_back(breakdowns.back().total);
      think_sum += think_length(caption);
      answer_sum += answer_length(caption);
    }
    group.advantages = normalize_advantages(group.rewards, cfg.grpo.sigma_floor);
    const StepDiagnostics diag = grpo_step(captioner, group, ctx, ref, cfg.grpo, opt);

    const GroupStats stats = summarize(breakdowns);
    StepRecord rec;
    rec.step = step;
    rec.stage = "stage1";
    rec.components = stats.component_means;
    rec.weights = stats.weights;
    rec.total = stats.total;
    rec.kl = diag.kl;
    rec.clip_fraction = diag.clip_fraction;
    rec.ratio_mean = diag.mean_ratio;
    rec.think_len = think_sum / group.group_size();
    rec.answer_len = answer_sum / group.group_size();
    log.append(std::move(rec));
    maybe_periodic_eval(periodic, cfg, captioner, frame_policy, vocab, "stage1", step, log);
  }
}

AnchorResult anchor_sample(const Policy& frozen_captioner, const Episode& episode,
                           const Vocab& vocab, const TrainConfig& cfg, Rng& rng) {
  const CaptionContext ctx(vocab, episode.input_video, episode.question, cfg.caption_max_len);
  const std::vector<int> gt_answer = episode.gt_caption.answer_or_content(vocab);
  for (int attempt = 1; attempt <= cfg.anchor_max_retries; ++attempt) {
    const Trajectory traj = sample_trajectory(frozen_captioner, ctx, rng);
    const Caption caption = trajectory_to_caption(traj, vocab);
    const double rouge = rouge_l(caption.answer_or_content(vocab), gt_answer);
    if (rouge >= cfg.anchor_rouge_threshold) {
      return AnchorResult{caption, rouge, false, attempt};
    }
  }
  return AnchorResult{episode.gt_caption, 1.0, true, cfg.anchor_max_retries};
}

void stage2_train(const Policy& captioner, Policy& frame_policy,
                  const std::vector<Episode>& train, const Vocab& vocab, const TrainConfig& cfg,
                  Rng& rng, RunLog& log, AnchorMode anchor_mode, bool include_rv2,
                  bool include_rc2, const PeriodicEval& periodic) {
  if (train.empty()) throw std::invalid_argument("stage2_train: empty dataset");
  const Policy ref = frame_policy.snapshot();
  Optimizer opt({cfg.grpo.learning_rate, cfg.optimizer_mode});

  for (int step = 0; step < cfg.stage2_steps; ++step) {
    const Episode& ep = train[rng.next_int(static_cast<int>(train.size()))];
    const AnchorResult anchor = anchor_mode == AnchorMode::ground_truth
                                    ? AnchorResult{ep.gt_caption, 1.0, false, 0}
                                    : anchor_sample(captioner, ep, vocab, cfg, rng);

    const FrameContext ctx(vocab, anchor.caption, ep.input_video, cfg.n_ref_frames,
                           cfg.video_max_frames);
    GroupRollout group =
        rollout_group(frame_policy, ctx, cfg.grpo.group_size, rng, std::to_string(ep.id));

    std::vector<RewardBreakdown> breakdowns;
    breakdowns.reserve(group.group_size());
    for (const Trajectory& traj : group.trajectories) {
      const SymbolicVideo video = trajectory_to_video(traj, vocab);
      breakdowns.push_back(stage2_reward(video, anchor.caption, ep.gt_video, vocab, cfg.lambda,
                                         include_rv2, include_rc2));
      group.rewards.push_back(breakdowns.back().total);
    }
    group.advantages = normalize_advantages(group.rewards, cfg.grpo.sigma_floor);
    const StepDiagnostics diag = grpo_step(frame_policy, group, ctx, ref, cfg.grpo, opt);

    const GroupStats stats = summarize(breakdowns);
    StepRecord rec;
    rec.step = step;
    rec.stage = "stage2";
    rec.components = stats.component_means;
    rec.weights = stats.weights;
    rec.total = stats.total;
    rec.kl = diag.kl;
    rec.clip_fraction = diag.clip_fraction;
    rec.ratio_mean = diag.mean_ratio;
    rec.think_len = think_length(anchor.caption);
    rec.answer_len = answer_length(anchor.caption);
    rec.anchor_rouge = anchor.rouge;
    rec.anchor_fallback = anchor.fallback;
    log.append(std::move(rec));
    maybe_periodic_eval(periodic, cfg, captioner, frame_policy, vocab, "stage2", step, log);
  }
}

void all_in_one_train(Policy& captioner, Policy& frame_policy,
                      const std::vector<Episode>& train, const Vocab& vocab,
                      const TrainConfig& cfg, Rng& rng, RunLog& log, bool include_rt1,
                      bool include_rv1) {
  if (train.empty()) throw std::invalid_argument("all_in_one_train: empty dataset");
  const Policy cap_ref = captioner.snapshot();
  const Policy frame_ref = frame_policy.snapshot();
  Optimizer cap_opt({cfg.grpo.learning_rate, cfg.optimizer_mode});
  Optimizer frame_opt({cfg.grpo.learning_rate, cfg.optimizer_mode});
  // The single loop replaces the stage-1 loop; every policy's update count
  // stays within its staged-pipeline counterpart.
  const int steps = cfg.stage1_steps;

  for (int step = 0; step < steps; ++step) {
    const Episode& ep = train[rng.next_int(static_cast<int>(train.size()))];
    const CaptionContext cap_ctx(vocab, ep.input_video, ep.question, cfg.caption_max_len);

    GroupRollout cap_group =
        rollout_group(captioner, cap_ctx, cfg.grpo.group_size, rng, std::to_string(ep.id));

    // One sampled video per caption; the shared reward scores the pair.
    std::vector<Caption> captions;
    std::vector<std::unique_ptr<FrameContext>> frame_ctxs;
    std::vector<Trajectory> frame_trajs;
    std::vector<RewardBreakdown> breakdowns;
    double think_sum = 0.0, answer_sum = 0.0;
    for (const Trajectory& traj : cap_group.trajectories) {
      captions.push_back(trajectory_to_caption(traj, vocab));
      frame_ctxs.push_back(std::make_unique<FrameContext>(
          vocab, captions.back(), ep.input_video, cfg.n_ref_frames, cfg.video_max_frames));
      frame_trajs.push_back(sample_trajectory(frame_policy, *frame_ctxs.back(), rng));
      const SymbolicVideo video = trajectory_to_video(frame_trajs.back(), vocab);
      breakdowns.push_back(stage1_reward(captions.back(), video, ep.gt_caption, ep.gt_video,
                                         vocab, cfg.lambda, include_rt1, include_rv1));
      cap_group.rewards.push_back(breakdowns.back().total);
      think_sum += think_length(captions.back());
      answer_sum += answer_length(captions.back());
    }
    cap_group.advantages = normalize_advantages(cap_group.rewards, cfg.grpo.sigma_floor);
    const StepDiagnostics cap_diag =
        grpo_step(captioner, cap_group, cap_ctx, cap_ref, cfg.grpo, cap_opt);

    // Frame-policy update under the same advantages. Contexts differ per
    // trajectory, so the gradient accumulates over single-trajectory groups.
    const int g = cap_group.group_size();
    Mat frame_grad(frame_policy.weights().rows(), frame_policy.weights().cols());
    StepDiagnostics frame_diag;
    for (int i = 0; i < g; ++i) {
      GroupRollout single;
      single.trajectories = {frame_trajs[i]};
      single.rewards = {cap_group.rewards[i]};
      single.advantages = {cap_group.advantages[i]};
      StepDiagnostics d;
      const Mat gi =
          surrogate_gradient(frame_policy, single, *frame_ctxs[i], frame_ref, cfg.grpo, &d);
      for (std::size_t k = 0; k < frame_grad.size(); ++k) {
        frame_grad.data()[k] += gi.data()[k] / g;
      }
      frame_diag.objective += d.objective / g;
      frame_diag.mean_ratio += d.mean_ratio / g;
      frame_diag.clip_fraction += d.clip_fraction / g;
      frame_diag.kl += d.kl / g;
    }
    frame_opt.step(frame_policy.weights().flat(), frame_grad.flat());

    const GroupStats stats = summarize(breakdowns);
    StepRecord rec;
    rec.step = step;
    rec.stage = "joint";
    rec.components = stats.component_means;
    rec.weights = stats.weights;
    rec.total = stats.total;
    rec.kl = cap_diag.kl + frame_diag.kl;
    rec.clip_fraction = 0.5 * (cap_diag.clip_fraction + frame_diag.clip_fraction);
    rec.ratio_mean = 0.5 * (cap_diag.mean_ratio + frame_diag.mean_ratio);
    rec.think_len = think_sum / g;
    rec.answer_len = answer_sum / g;
    log.append(std::move(rec));
  }
}

double combined_score(const MetricRow& row) {
  const double frechet_norm = row.frechet / (1.0 + row.frechet);
  return (row.rouge_l + row.clip_v + row.clip_t + (1.0 - frechet_norm)) / 4.0;
}

VariantResult run_variant(const VariantSpec& spec, const std::vector<Episode>& train,
                          const std::vector<Episode>& eval_set, const Vocab& vocab,
                          const TrainConfig& cfg, const std::filesystem::path& checkpoint_dir) {
  spec.validate();
  cfg.validate();

  VariantResult result;
  result.captioner = make_captioner(vocab, cfg.caption_max_len);
  result.frame_policy = make_frame_policy(vocab, cfg.n_ref_frames, cfg.video_max_frames);

  auto config = config_echo(cfg, vocab);
  config["variant"] = spec.name();
  result.log.set_config(std::move(config));

  PeriodicEval periodic;
  periodic.eval_set = &eval_set;
  periodic.checkpoint_dir = checkpoint_dir;

  Rng rng(cfg.seed);
  sft_train(result.captioner, result.frame_policy, train, vocab, cfg, rng, result.log, periodic);

  switch (spec.variant) {
    case AblationVariant::sft_only:
      break;
    case AblationVariant::grpo_vlm:
      // Text-only composite: r_f + r_t1.
      stage1_train(result.captioner, result.frame_policy, train, vocab, cfg, rng, result.log,
                   true, false, periodic);
      break;
    case AblationVariant::grpo_vdm:
      // Video fidelity only, conditioned on ground-truth captions.
      stage2_train(result.captioner, result.frame_policy, train, vocab, cfg, rng, result.log,
                   AnchorMode::ground_truth, true, false, periodic);
      break;
    case AblationVariant::grpo_cascade: {
      Rng vlm_rng = rng.split();
      Rng vdm_rng = rng.split();
      stage1_train(result.captioner, result.frame_policy, train, vocab, cfg, vlm_rng, result.log,
                   true, false, periodic);
      stage2_train(result.captioner, result.frame_policy, train, vocab, cfg, vdm_rng, result.log,
                   AnchorMode::ground_truth, true, false, periodic);
      break;
    }
    case AblationVariant::joint_stage1:
      stage1_train(result.captioner, result.frame_policy, train, vocab, cfg, rng, result.log,
                   !spec.no_rt1, !spec.no_rv1, periodic);
      break;
    case AblationVariant::joint_stage1_2:
      stage1_train(result.captioner, result.frame_policy, train, vocab, cfg, rng, result.log,
                   !spec.no_rt1, !spec.no_rv1, periodic);
      stage2_train(result.captioner, result.frame_policy, train, vocab, cfg, rng, result.log,
                   AnchorMode::sampled, !spec.no_rv2, !spec.no_rc2, periodic);
      break;
    case AblationVariant::joint_all_in_one:
      all_in_one_train(result.captioner, result.frame_policy, train, vocab, cfg, rng, result.log,
                       !spec.no_rt1, !spec.no_rv1);
      break;
  }

  std::unordered_set<std::int64_t> train_ids;
  train_ids.reserve(train.size());
  for (const Episode& ep : train) train_ids.insert(ep.id);
  result.metrics =
      evaluate(result.captioner, result.frame_policy, eval_set, vocab, cfg.eval_config(),
               train_ids);

  EvalRecord eval_rec;
  eval_rec.step = cfg.sft_steps + cfg.stage1_steps + cfg.stage2_steps;
  eval_rec.stage = "final";
  eval_rec.metrics = result.metrics;
  result.log.append(std::move(eval_rec));
  return result;
}

}  // namespace duet
