#include "duet/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace duet {

GroupRollout rollout_group(const Policy& policy, const SequenceContext& ctx, int group_size,
                           Rng& rng, std::string context_id) {
  if (group_size < 2) throw std::invalid_argument("rollout_group: group size must be >= 2");
  GroupRollout group;
  group.context_id = std::move(context_id);
  group.trajectories.reserve(group_size);
  for (int i = 0; i < group_size; ++i) {
    group.trajectories.push_back(sample_trajectory(policy, ctx, rng));
  }
  return group;
}

Vec normalize_advantages(const Vec& rewards, double sigma_floor) {
  if (rewards.size() < 2) {
    throw std::invalid_argument("normalize_advantages: need at least 2 rewards");
  }
  const double g = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= g;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sigma = std::sqrt(var / g);
  Vec adv(rewards.size(), 0.0);
  if (sigma < sigma_floor) return adv;  // degenerate group
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / sigma;
  return adv;
}

namespace {

double token_kl_k3(double logp_theta, double logp_ref) {
  const double ratio = std::exp(logp_ref - logp_theta);
  if (!std::isfinite(ratio)) throw std::runtime_error("kl_estimate: non-finite ratio");
  return ratio - (logp_ref - logp_theta) - 1.0;
}

}  // namespace

double kl_estimate(const Policy& policy, const Policy& ref_policy, const SequenceContext& ctx,
                   const Trajectory& traj, KlMode mode) {
  if (traj.length() == 0) return 0.0;
  if (mode == KlMode::k3) {
    const Vec lp_theta = log_probs(policy, ctx, traj);
    const Vec lp_ref = log_probs(ref_policy, ctx, traj);
    double sum = 0.0;
    for (int t = 0; t < traj.length(); ++t) sum += token_kl_k3(lp_theta[t], lp_ref[t]);
    return sum / traj.length();
  }
  // Exact per-token KL(pi_theta || pi_ref) over the allowed vocabulary.
  double sum = 0.0;
  Vec features(ctx.feature_dim(), 0.0);
  const std::span<const int> tokens(traj.tokens);
  for (int t = 0; t < traj.length(); ++t) {
    ctx.features(tokens.first(t), features);
    const std::vector<bool> mask = ctx.allowed_mask(t);
    const Vec lp = log_softmax_masked(policy.logits(features), mask);
    const Vec lq = log_softmax_masked(ref_policy.logits(features), mask);
    double kl_t = 0.0;
    for (int j = 0; j < ctx.vocab_size(); ++j) {
      if (!mask[j]) continue;
      kl_t += std::exp(lp[j]) * (lp[j] - lq[j]);
    }
    sum += kl_t;
  }
  return sum / traj.length();
}

double surrogate_objective(const Policy& policy, const GroupRollout& group,
                           const SequenceContext& ctx, const Policy& ref_policy,
                           const GrpoConfig& cfg) {
  const int g = group.group_size();
  if (g == 0 || group.advantages.size() != static_cast<std::size_t>(g)) {
    throw std::invalid_argument("surrogate_objective: advantages not set");
  }
  double policy_term = 0.0;
  double kl_term = 0.0;
  for (int i = 0; i < g; ++i) {
    const Trajectory& traj = group.trajectories[i];
    const double adv = group.advantages[i];
    const Vec lp_theta = log_probs(policy, ctx, traj);
    double token_sum = 0.0;
    for (int t = 0; t < traj.length(); ++t) {
      const double ratio = std::exp(lp_theta[t] - traj.logps[t]);
      if (!std::isfinite(ratio)) {
        throw std::runtime_error("surrogate_objective: non-finite probability ratio");
      }
      const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
      token_sum += std::min(ratio * adv, clipped * adv);
    }
    policy_term += token_sum / std::max(1, traj.length());
    if (cfg.beta != 0.0) {
      kl_term += kl_estimate(policy, ref_policy, ctx, traj, cfg.kl_mode);
    }
  }
  return policy_term / g - cfg.beta * kl_term / g;
}

Mat surrogate_gradient(const Policy& policy, const GroupRollout& group, const SequenceContext& ctx,
                       const Policy& ref_policy, const GrpoConfig& cfg,
                       StepDiagnostics* diagnostics) {
  const int g = group.group_size();
  if (g == 0 || group.advantages.size() != static_cast<std::size_t>(g)) {
    throw std::invalid_argument("surrogate_gradient: advantages not set");
  }
  Mat grad(policy.weights().rows(), policy.weights().cols(), 0.0);

  double objective_policy = 0.0;
  double kl_total = 0.0;
  double ratio_sum = 0.0;
  long clipped_tokens = 0;
  long total_tokens = 0;

  Vec features(ctx.feature_dim(), 0.0);
  for (int i = 0; i < g; ++i) {
    const Trajectory& traj = group.trajectories[i];
    const double adv = group.advantages[i];
    const int len = traj.length();
    if (len == 0) continue;
    const double inv_len = 1.0 / len;
    const Vec lp_theta = log_probs(policy, ctx, traj);
    const Vec lp_ref = cfg.beta != 0.0 ? log_probs(ref_policy, ctx, traj) : Vec{};

    double token_sum = 0.0;
    double kl_sum = 0.0;
    for (int t = 0; t < len; ++t) {
      const double ratio = std::exp(lp_theta[t] - traj.logps[t]);
      if (!std::isfinite(ratio)) {
        throw std::runtime_error("surrogate_gradient: non-finite probability ratio");
      }
      ratio_sum += ratio;
      ++total_tokens;
      const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
      const double unclipped_term = ratio * adv;
      const double clipped_term = clipped * adv;
      token_sum += std::min(unclipped_term, clipped_term);

      // min picks the clipped branch strictly only when the ratio is outside
      // the trust region, where the clip derivative is zero.
      double coeff = 0.0;
      if (unclipped_term <= clipped_term) {
        coeff = adv * ratio * inv_len / g;
      } else {
        ++clipped_tokens;
      }

      if (cfg.beta != 0.0 && cfg.kl_mode == KlMode::k3) {
        const double ratio_ref = std::exp(lp_ref[t] - lp_theta[t]);
        if (!std::isfinite(ratio_ref)) {
          throw std::runtime_error("surrogate_gradient: non-finite reference ratio");
        }
        kl_sum += ratio_ref - (lp_ref[t] - lp_theta[t]) - 1.0;
        // d k3/d theta = (1 - ratio_ref) * d logp_theta
        coeff -= cfg.beta * (1.0 - ratio_ref) * inv_len / g;
      }
      if (coeff != 0.0) {
        accumulate_grad_log_prob(policy, ctx, traj, t, coeff, grad);
      }
    }
    objective_policy += token_sum * inv_len;

    if (cfg.beta != 0.0 && cfg.kl_mode == KlMode::exact) {
      // Exact KL both for the objective value and its gradient.
      const std::span<const int> tokens(traj.tokens);
      for (int t = 0; t < len; ++t) {
        ctx.features(tokens.first(t), features);
        const std::vector<bool> mask = ctx.allowed_mask(t);
        const Vec lp = log_softmax_masked(policy.logits(features), mask);
        const Vec lq = log_softmax_masked(ref_policy.logits(features), mask);
        double kl_t = 0.0;
        for (int j = 0; j < ctx.vocab_size(); ++j) {
          if (!mask[j]) continue;
          kl_t += std::exp(lp[j]) * (lp[j] - lq[j]);
        }
        kl_sum += kl_t;
        // d KL/d z_j = p_j * (log(p_j/q_j) - KL_t)
        const double scale = -cfg.beta * inv_len / g;
        const int vocab = ctx.vocab_size();
        double* grad_data = grad.data();
        for (int fi = 0; fi < ctx.feature_dim(); ++fi) {
          const double f = features[fi];
          if (f == 0.0) continue;
          double* row = grad_data + static_cast<std::size_t>(fi) * vocab;
          for (int j = 0; j < vocab; ++j) {
            if (!mask[j]) continue;
            row[j] += scale * f * std::exp(lp[j]) * ((lp[j] - lq[j]) - kl_t);
          }
        }
      }
    }
    kl_total += kl_sum * inv_len;
  }

  if (diagnostics != nullptr) {
    diagnostics->objective = objective_policy / g - cfg.beta * kl_total / g;
    diagnostics->mean_ratio = total_tokens > 0 ? ratio_sum / total_tokens : 1.0;
    diagnostics->clip_fraction =
        total_tokens > 0 ? static_cast<double>(clipped_tokens) / total_tokens : 0.0;
    diagnostics->kl = kl_total / g;
  }
  return grad;
}

StepDiagnostics grpo_step(Policy& policy, const GroupRollout& group, const SequenceContext& ctx,
                          const Policy& ref_policy, const GrpoConfig& cfg, Optimizer& optimizer) {
  StepDiagnostics diag;
  Mat grad = surrogate_gradient(policy, group, ctx, ref_policy, cfg, &diag);
  optimizer.step(policy.weights().flat(), grad.flat());
  return diag;
}

}  // namespace duet
