#pragma once

#include <string>
#include <vector>

#include "duet/math.hpp"
#include "duet/policy.hpp"

namespace duet {

enum class KlMode { k3, exact };

struct GrpoConfig {
  int group_size = 8;
  double clip = 1e-3;
  double beta = 0.004;
  double sigma_floor = 1e-8;  // groups with reward std below this get zero advantages
  double learning_rate = 0.1;
  KlMode kl_mode = KlMode::k3;
};

// G trajectories sampled for one context. The per-token log-probs inside the
// trajectories are the sampling policy's (pi_old, snapshotted at group start).
struct GroupRollout {
  std::string context_id;
  std::vector<Trajectory> trajectories;
  Vec rewards;
  Vec advantages;

  int group_size() const { return static_cast<int>(trajectories.size()); }
};

GroupRollout rollout_group(const Policy& policy, const SequenceContext& ctx, int group_size,
                           Rng& rng, std::string context_id = {});

// (r_i - mean) / population std; all zeros when the std is below sigma_floor.
Vec normalize_advantages(const Vec& rewards, double sigma_floor = 1e-8);

// Per-token k3 estimator (ratio - log ratio - 1 with ratio = pi_ref/pi_theta)
// averaged over the trajectory, or the exact per-token KL over the vocabulary
// in exact mode.
double kl_estimate(const Policy& policy, const Policy& ref_policy, const SequenceContext& ctx,
                   const Trajectory& traj, KlMode mode = KlMode::k3);

// Clipped-ratio surrogate with KL penalty: mean_i (1/T_i) sum_t
// min(rho*A, clip(rho)*A) - beta * mean_i KL_i.
double surrogate_objective(const Policy& policy, const GroupRollout& group,
                           const SequenceContext& ctx, const Policy& ref_policy,
                           const GrpoConfig& cfg);

struct StepDiagnostics {
  double objective = 0.0;
  double mean_ratio = 1.0;
  double clip_fraction = 0.0;
  double kl = 0.0;
};

// Analytic gradient of surrogate_objective w.r.t. the policy weights.
Mat surrogate_gradient(const Policy& policy, const GroupRollout& group, const SequenceContext& ctx,
                       const Policy& ref_policy, const GrpoConfig& cfg,
                       StepDiagnostics* diagnostics = nullptr);

// One ascent step on the surrogate. Advantages must be set.
StepDiagnostics grpo_step(Policy& policy, const GroupRollout& group, const SequenceContext& ctx,
                          const Policy& ref_policy, const GrpoConfig& cfg, Optimizer& optimizer);

}  // namespace duet
