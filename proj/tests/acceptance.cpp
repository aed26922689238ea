// Acceptance suite: runs every release criterion at its stated tolerance and
// prints one pass/fail line each. Exit code 0 only if all criteria pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "duet/eval.hpp"
#include "duet/grpo.hpp"
#include "duet/policy.hpp"
#include "duet/reward.hpp"
#include "duet/runlog.hpp"
#include "duet/train.hpp"
#include "duet/world.hpp"
#include "oracles.hpp"

#ifdef DUET_HAVE_EIGEN
#include <Eigen/Dense>
#endif

using namespace duet;

namespace {

int failures = 0;
std::vector<std::string> failure_notes;

void report(int index, const char* name, bool pass, double seconds, const std::string& note) {
  std::printf("criterion %2d [%s] %-38s %7.2fs  %s\n", index, pass ? "PASS" : "FAIL", name,
              seconds, note.c_str());
  std::fflush(stdout);
  if (!pass) {
    ++failures;
    failure_notes.push_back(std::string(name) + ": " + note);
  }
}

void run(int index, const char* name, const std::function<bool(std::string&)>& body) {
  const auto start = std::chrono::steady_clock::now();
  std::string note;
  bool pass = false;
  try {
    pass = body(note);
  } catch (const std::exception& e) {
    note = std::string("exception: ") + e.what();
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report(index, name, pass, seconds, note);
}

Policy random_policy(int feature_dim, int vocab, Rng& rng, double scale = 0.35) {
  Policy p(PolicyKind::captioner, feature_dim, vocab);
  for (double& w : p.weights().flat()) w = (rng.next_double() * 2.0 - 1.0) * scale;
  return p;
}

double mean_range(const std::vector<double>& xs, std::size_t begin, std::size_t end) {
  return std::accumulate(xs.begin() + begin, xs.begin() + end, 0.0) /
         static_cast<double>(end - begin);
}

std::vector<double> trailing_mean(const std::vector<double>& xs, int window) {
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const std::size_t lo = i + 1 >= static_cast<std::size_t>(window) ? i + 1 - window : 0;
    out[i] = mean_range(xs, lo, i + 1);
  }
  return out;
}

// Shared corpus and training artifacts for criteria 7-10.
struct TrainingArtifacts {
  Vocab vocab;
  WorldConfig world;
  std::vector<Episode> train;
  std::vector<Episode> eval_set;
  TrainConfig cfg;  // defaults
  static constexpr int kSeeds = 5;
  std::vector<VariantResult> joint_runs;  // JOINT_STAGE1_2, seeds 0..4

  TrainingArtifacts() {
    vocab.validate();
    world.vocab = vocab;
    const RuleTable rules = RuleTable::make(vocab, 7);
    Rng train_rng(7);
    train = generate_dataset(rules, CorpusCounts{2000, 2000}, 0, train_rng, world);
    Rng eval_rng(8);
    eval_set = generate_dataset(rules, CorpusCounts{200, 200}, 1000000, eval_rng, world);
  }

  void run_joint() {
    const VariantSpec spec = VariantSpec::parse("JOINT_STAGE1_2");
    for (int s = 0; s < kSeeds; ++s) {
      TrainConfig c = cfg;
      c.seed = static_cast<std::uint64_t>(s);
      joint_runs.push_back(run_variant(spec, train, eval_set, vocab, c));
    }
  }
};

}  // namespace

// [1] normalize_advantages matches an extended-precision evaluation of the
// group-relative advantage formula on 1000 random groups of 8.
bool criterion1(std::string& note) {
  Rng rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    Vec rewards(8);
    for (double& r : rewards) r = rng.next_double() * 4.0 - 1.0;
    const Vec got = normalize_advantages(rewards);
    const std::vector<double> expected = oracles::eq1_oracle(rewards, 1e-8);
    for (int i = 0; i < 8; ++i) worst = std::max(worst, std::abs(got[i] - expected[i]));
  }
  const Vec degenerate = normalize_advantages({2.5, 2.5, 2.5, 2.5, 2.5, 2.5, 2.5, 2.5});
  bool zeros = true;
  for (double a : degenerate) zeros = zeros && a == 0.0;
  note = "max abs err " + std::to_string(worst) + ", degenerate zeros: " + (zeros ? "yes" : "no");
  return worst < 1e-12 && zeros;
}

// [2] the clipped surrogate matches a term-by-term extended-precision oracle
// on random small instances and vanishes at the sampling policy.
bool criterion2(std::string& note) {
  GrpoConfig cfg;
  cfg.clip = 1e-3;
  cfg.beta = 0.004;
  Rng rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const oracles::TestContext ctx(4, 3, 3, 1000 + trial);
    const Policy sampler = random_policy(4, 3, rng);
    GroupRollout group = rollout_group(sampler, ctx, 2, rng);
    group.rewards = {rng.next_double(), rng.next_double()};
    group.advantages = normalize_advantages(group.rewards);
    const Policy current = random_policy(4, 3, rng);
    const Policy ref = random_policy(4, 3, rng);
    const double got = surrogate_objective(current, group, ctx, ref, cfg);
    const double expected = oracles::eq2_oracle(current, group, ctx, ref, cfg);
    worst = std::max(worst, std::abs(got - expected));
  }

  GrpoConfig beta0 = cfg;
  beta0.beta = 0.0;
  double worst_identity = 0.0;
  for (int trial = 0; trial < 300; ++trial) {
    const oracles::TestContext ctx(4, 3, 3, 5000 + trial);
    const Policy sampler = random_policy(4, 3, rng);
    GroupRollout group = rollout_group(sampler, ctx, 2, rng);
    group.rewards = {rng.next_double(), rng.next_double()};
    group.advantages = normalize_advantages(group.rewards);
    worst_identity = std::max(
        worst_identity, std::abs(surrogate_objective(sampler, group, ctx, sampler, beta0)));
  }
  note = "oracle err " + std::to_string(worst) + ", identity err " +
         std::to_string(worst_identity);
  return worst < 1e-10 && worst_identity < 1e-9;
}

// [3] the analytic gradient of the full objective (including the KL penalty)
// matches central finite differences on 100 random instances.
bool criterion3(std::string& note) {
  GrpoConfig cfg;
  cfg.clip = 1e-3;
  cfg.beta = 0.004;
  Rng rng(303);
  double worst = 0.0;
  int done = 0;
  int salt = 0;
  while (done < 100) {
    const oracles::TestContext ctx(4, 3, 3, 9000 + salt++);
    const Policy sampler = random_policy(4, 3, rng);
    GroupRollout group = rollout_group(sampler, ctx, 4, rng);
    group.rewards.resize(4);
    for (double& r : group.rewards) r = rng.next_double();
    group.advantages = normalize_advantages(group.rewards);
    Policy current = random_policy(4, 3, rng, 0.3);
    const Policy ref = random_policy(4, 3, rng, 0.3);

    // finite differences are invalid within h of the clip kinks
    bool near_kink = false;
    for (const Trajectory& traj : group.trajectories) {
      const Vec lp = log_probs(current, ctx, traj);
      for (int t = 0; t < traj.length(); ++t) {
        const double ratio = std::exp(lp[t] - traj.logps[t]);
        if (std::abs(ratio - (1.0 - cfg.clip)) < 1e-4 ||
            std::abs(ratio - (1.0 + cfg.clip)) < 1e-4) {
          near_kink = true;
        }
      }
    }
    if (near_kink) continue;

    const Mat analytic = surrogate_gradient(current, group, ctx, ref, cfg);
    const Mat fd = oracles::finite_difference_gradient(
        current, [&] { return surrogate_objective(current, group, ctx, ref, cfg); }, 1e-6);
    worst = std::max(worst, oracles::relative_error(analytic, fd));
    ++done;
  }
  note = "worst relative err " + std::to_string(worst) + " over 100 instances";
  return worst < 1e-4;
}

// [4] rouge_l and bleu agree with exhaustive DP-free oracles over a 4-token
// alphabet, and score 1 on identical sequences.
bool criterion4(std::string& note) {
  long checked = 0;
  // exhaustively enumerate candidate/reference pairs with |cand|+|ref| <= 8
  std::vector<std::vector<int>> by_length[9];
  by_length[0].push_back({});
  for (int len = 1; len <= 8; ++len) {
    for (const auto& shorter : by_length[len - 1]) {
      for (int t = 0; t < 4; ++t) {
        auto seq = shorter;
        seq.push_back(t);
        by_length[len].push_back(std::move(seq));
      }
    }
  }
  for (int m = 1; m <= 7; ++m) {
    for (int n = 1; n + m <= 8; ++n) {
      for (const auto& cand : by_length[m]) {
        for (const auto& ref : by_length[n]) {
          const double r = rouge_l(cand, ref);
          if (r != oracles::brute_rouge_l(cand, ref)) {
            note = "rouge mismatch";
            return false;
          }
          const int max_n = 1 + static_cast<int>(checked % 4);
          if (bleu(cand, ref, max_n) != oracles::brute_bleu(cand, ref, max_n)) {
            note = "bleu mismatch";
            return false;
          }
          ++checked;
        }
      }
    }
  }
  // random pairs with both lengths up to 8
  Rng rng(404);
  for (int trial = 0; trial < 100000; ++trial) {
    std::vector<int> cand(1 + rng.next_int(8)), ref(1 + rng.next_int(8));
    for (int& t : cand) t = rng.next_int(4);
    for (int& t : ref) t = rng.next_int(4);
    if (rouge_l(cand, ref) != oracles::brute_rouge_l(cand, ref)) {
      note = "rouge mismatch (random)";
      return false;
    }
    const int max_n = 1 + rng.next_int(4);
    if (bleu(cand, ref, max_n) != oracles::brute_bleu(cand, ref, max_n)) {
      note = "bleu mismatch (random)";
      return false;
    }
    ++checked;
  }
  // identity on every sequence of length <= 8
  for (int len = 1; len <= 8; ++len) {
    for (const auto& seq : by_length[len]) {
      if (rouge_l(seq, seq) != 1.0) {
        note = "rouge identity violated";
        return false;
      }
      for (int n = 1; n <= 4; ++n) {
        if (len >= n && bleu(seq, seq, n) != 1.0) {
          note = "bleu identity violated";
          return false;
        }
      }
    }
  }
  note = std::to_string(checked) + " pairs checked exactly";
  return true;
}

// [5] the symbolic Frechet distance is zero on identical sets, symmetric,
// and matches a reference eigendecomposition oracle on 3-dimensional sets.
bool criterion5(std::string& note) {
  Rng rng(505);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec> set;
    const int n = 4 + rng.next_int(12);
    const int dim = trial % 2 == 0 ? 3 : 32;
    for (int i = 0; i < n; ++i) {
      Vec x(dim);
      for (double& v : x) v = rng.next_double();
      set.push_back(x);
    }
    if (frechet_proxy(set, set) > 1e-9) {
      note = "identical sets not zero";
      return false;
    }
  }
  double worst_sym = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec> a, b;
    for (int i = 0; i < 6 + rng.next_int(6); ++i) {
      Vec x(3);
      for (double& v : x) v = rng.next_double();
      a.push_back(x);
    }
    for (int i = 0; i < 6 + rng.next_int(6); ++i) {
      Vec x(3);
      for (double& v : x) v = rng.next_double() * 2.0 - 0.5;
      b.push_back(x);
    }
    worst_sym = std::max(worst_sym, std::abs(frechet_proxy(a, b) - frechet_proxy(b, a)));
  }
  if (worst_sym > 1e-8) {
    note = "asymmetry " + std::to_string(worst_sym);
    return false;
  }

#ifdef DUET_HAVE_EIGEN
  using EMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using EVec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  double worst_rel = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vec> a, b;
    const int na = 4 + rng.next_int(10), nb = 4 + rng.next_int(10);
    for (int i = 0; i < na; ++i) {
      Vec x(3);
      for (double& v : x) v = rng.next_double() * 2.0 - 1.0;
      a.push_back(x);
    }
    for (int i = 0; i < nb; ++i) {
      Vec x(3);
      for (double& v : x) v = rng.next_double() * 3.0;
      b.push_back(x);
    }
    const auto moments = [](const std::vector<Vec>& set) {
      EVec mu = EVec::Zero(3);
      for (const Vec& x : set) {
        for (int i = 0; i < 3; ++i) mu(i) += x[i];
      }
      mu /= static_cast<long double>(set.size());
      EMat cov = EMat::Zero(3, 3);
      for (const Vec& x : set) {
        EVec d(3);
        for (int i = 0; i < 3; ++i) d(i) = x[i] - mu(i);
        cov += d * d.transpose();
      }
      cov /= static_cast<long double>(set.size());
      if (static_cast<int>(set.size()) < 4) cov += EMat::Identity(3, 3) * 1e-6L;
      return std::make_pair(mu, cov);
    };
    const auto [mu_a, cov_a] = moments(a);
    const auto [mu_b, cov_b] = moments(b);
    Eigen::SelfAdjointEigenSolver<EMat> es_a(cov_a);
    const EMat root = es_a.operatorSqrt();
    Eigen::SelfAdjointEigenSolver<EMat> es(root * cov_b * root);
    long double tr = 0.0L;
    for (int i = 0; i < 3; ++i) tr += std::sqrt(std::max<long double>(0.0L, es.eigenvalues()(i)));
    const long double expected =
        (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0L * tr;
    const double got = frechet_proxy(a, b);
    worst_rel = std::max(worst_rel, std::abs(got - static_cast<double>(expected)) /
                                        std::max(1e-12, std::abs(static_cast<double>(expected))));
  }
  note = "oracle relative err " + std::to_string(worst_rel);
  return worst_rel < 1e-6;
#else
  note = "Eigen oracle unavailable";
  return false;
#endif
}

// [6] the reward-design ranking fixtures: each stage's composite ranks the
// reference sample strictly first while each single component fails to
// separate one flawed sample.
bool criterion6(std::string& note) {
  Vocab v;
  v.validate();
  const auto caption = [&](std::vector<int> think, std::vector<int> answer) {
    std::vector<int> t;
    t.push_back(Vocab::kThinkOpen);
    t.insert(t.end(), think.begin(), think.end());
    t.push_back(Vocab::kThinkClose);
    t.push_back(Vocab::kAnswerOpen);
    t.insert(t.end(), answer.begin(), answer.end());
    t.push_back(Vocab::kAnswerClose);
    t.push_back(Vocab::kEnd);
    return Caption::from_tokens(std::move(t), v);
  };
  const auto frame = [](int a, int o, int act, int l) {
    Frame f;
    f.slots = {a, o, act, l};
    return f;
  };

  // stage 1
  SymbolicVideo gt_video;
  gt_video.frames.assign(3, frame(0, 8, 16, 24));
  const Caption gt_caption =
      caption({v.word(0), v.tok_then()}, {v.word(0), v.word(16), v.word(8), v.word(24)});
  const Caption wrong_action =
      caption({v.word(0), v.tok_then()}, {v.word(0), v.word(17), v.word(8), v.word(24)});
  SymbolicVideo scrambled;
  scrambled.frames.assign(3, frame(1, 9, 17, 25));

  const RewardBreakdown r_gt = stage1_reward(gt_caption, gt_video, gt_caption, gt_video, v);
  const RewardBreakdown r_s1 = stage1_reward(wrong_action, gt_video, gt_caption, gt_video, v);
  const RewardBreakdown r_s2 = stage1_reward(gt_caption, scrambled, gt_caption, gt_video, v);
  const bool s1_ok = r_gt.total > r_s1.total && r_gt.total > r_s2.total &&
                     r_s2.component("r_t1") == r_gt.component("r_t1") &&
                     r_s1.component("r_v1") == r_gt.component("r_v1");

  // stage 2: terse anchor naming the event action
  SymbolicVideo gt2;
  gt2.frames.assign(3, frame(0, 8, 16, 24));
  const Caption anchor = caption({v.word(0)}, {v.word(16)});
  SymbolicVideo faithful;
  faithful.frames.assign(3, frame(0, 8, 16, 25));
  SymbolicVideo wrong_act_vid;
  wrong_act_vid.frames.assign(3, frame(0, 8, 17, 24));
  SymbolicVideo wrong_scene;
  wrong_scene.frames.assign(3, frame(1, 9, 16, 25));

  const RewardBreakdown q_good = stage2_reward(faithful, anchor, gt2, v);
  const RewardBreakdown q_s1 = stage2_reward(wrong_act_vid, anchor, gt2, v);
  const RewardBreakdown q_s2 = stage2_reward(wrong_scene, anchor, gt2, v);
  const bool s2_ok = q_good.total > q_s1.total && q_good.total > q_s2.total &&
                     q_s1.component("r_v2") == q_good.component("r_v2") &&
                     q_s2.component("r_c2") == q_good.component("r_c2");

  note = std::string("stage1 ") + (s1_ok ? "ok" : "bad") + ", stage2 " + (s2_ok ? "ok" : "bad");
  return s1_ok && s2_ok;
}

// [7] every accepted non-fallback anchor in a full stage-2 run clears the
// ROUGE-L threshold, and fallbacks are logged.
bool criterion7(const TrainingArtifacts& art, std::string& note) {
  long anchors = 0, fallbacks = 0;
  for (const VariantResult& run : art.joint_runs) {
    for (const StepRecord* rec : run.log.steps("stage2")) {
      if (!rec->anchor_rouge.has_value() || !rec->anchor_fallback.has_value()) {
        note = "stage-2 record missing anchor audit fields";
        return false;
      }
      ++anchors;
      if (*rec->anchor_fallback) {
        ++fallbacks;
      } else if (*rec->anchor_rouge < art.cfg.anchor_rouge_threshold - 1e-12) {
        note = "accepted anchor below threshold";
        return false;
      }
    }
  }
  note = std::to_string(anchors) + " anchors audited, " + std::to_string(fallbacks) +
         " fallbacks logged";
  return anchors > 0;
}

// [8] training dynamics over 5 seeds on the default corpus: the format
// reward saturates early in stage 1, and both stages end above where they
// started.
bool criterion8(const TrainingArtifacts& art, std::string& note) {
  int ok_a = 0, ok_b = 0, ok_c = 0;
  for (const VariantResult& run : art.joint_runs) {
    std::vector<double> rf, total, rv2, rc2;
    for (const StepRecord* rec : run.log.steps("stage1")) {
      rf.push_back(rec->components[0].second);  // r_f leads the stage-1 breakdown
      total.push_back(rec->total);
    }
    for (const StepRecord* rec : run.log.steps("stage2")) {
      rv2.push_back(rec->components[0].second);
      rc2.push_back(rec->components[1].second);
    }
    const std::vector<double> rf_smooth = trailing_mean(rf, 50);
    const std::size_t quarter = rf.size() / 4;
    bool early = false;
    for (std::size_t i = 0; i < quarter; ++i) early = early || rf_smooth[i] >= 0.95;
    ok_a += early;

    const std::size_t n = total.size();
    ok_b += mean_range(total, n - n / 10, n) > mean_range(total, 0, n / 10);
    const std::size_t m = rv2.size();
    const bool v_up = mean_range(rv2, m - m / 10, m) > mean_range(rv2, 0, m / 10);
    const bool c_up = mean_range(rc2, m - m / 10, m) > mean_range(rc2, 0, m / 10);
    ok_c += v_up && c_up;
  }
  note = "(a) " + std::to_string(ok_a) + "/5 early r_f, (b) " + std::to_string(ok_b) +
         "/5 stage-1 gains, (c) " + std::to_string(ok_c) + "/5 stage-2 gains";
  return ok_a == TrainingArtifacts::kSeeds && ok_b >= 4 && ok_c >= 4;
}

// [9] ablation orderings on median combined held-out score over 5 seeds.
bool criterion9(const TrainingArtifacts& art, std::string& note) {
  const char* variants[] = {"SFT_ONLY", "GRPO_VLM", "JOINT_STAGE1", "JOINT_ALL_IN_ONE"};
  std::map<std::string, std::vector<MetricTable>> tables;
  for (const VariantResult& run : art.joint_runs) {
    tables["JOINT_STAGE1_2"].push_back(run.metrics);
  }
  for (const char* name : variants) {
    const VariantSpec spec = VariantSpec::parse(name);
    for (int s = 0; s < TrainingArtifacts::kSeeds; ++s) {
      TrainConfig c = art.cfg;
      c.seed = static_cast<std::uint64_t>(s);
      tables[name].push_back(run_variant(spec, art.train, art.eval_set, art.vocab, c).metrics);
    }
  }

  const auto median_score = [&](const std::string& name, bool procedural) {
    std::vector<double> xs;
    for (const MetricTable& t : tables[name]) {
      xs.push_back(combined_score(procedural ? t.procedural : t.predictive));
    }
    std::sort(xs.begin(), xs.end());
    return xs[xs.size() / 2];
  };

  bool ok = true;
  std::string detail;
  for (const bool procedural : {true, false}) {
    const double s12 = median_score("JOINT_STAGE1_2", procedural);
    const double s1 = median_score("JOINT_STAGE1", procedural);
    const double vlm = median_score("GRPO_VLM", procedural);
    const double sft = median_score("SFT_ONLY", procedural);
    const double aio = median_score("JOINT_ALL_IN_ONE", procedural);
    const bool chain = s12 >= s1 && s1 >= vlm && vlm >= sft;
    const bool vs_aio = s12 >= aio;
    ok = ok && chain && vs_aio;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s: S1_2=%.3f S1=%.3f VLM=%.3f SFT=%.3f AIO=%.3f%s ",
                  procedural ? "proc" : "pred", s12, s1, vlm, sft, aio,
                  chain && vs_aio ? "" : " (violated)");
    detail += buf;
  }
  note = detail;
  return ok;
}

// [10] freeze contracts and byte-exact reproducibility.
bool criterion10(const TrainingArtifacts& art, std::string& note) {
  TrainConfig cfg = art.cfg;
  cfg.seed = 0;

  // stage 1 leaves the frame policy untouched; stage 2 the captioner
  Policy captioner = make_captioner(art.vocab, cfg.caption_max_len);
  Policy frame_policy = make_frame_policy(art.vocab, cfg.n_ref_frames, cfg.video_max_frames);
  RunLog log;
  Rng rng(cfg.seed);
  sft_train(captioner, frame_policy, art.train, art.vocab, cfg, rng, log);
  const std::string frame_bytes = policy_bytes(frame_policy);
  stage1_train(captioner, frame_policy, art.train, art.vocab, cfg, rng, log);
  if (policy_bytes(frame_policy) != frame_bytes) {
    note = "stage 1 modified the frame policy";
    return false;
  }
  const std::string cap_bytes = policy_bytes(captioner);
  stage2_train(captioner, frame_policy, art.train, art.vocab, cfg, rng, log);
  if (policy_bytes(captioner) != cap_bytes) {
    note = "stage 2 modified the captioner";
    return false;
  }

  // identical config and seed reproduce the run log byte for byte
  const VariantSpec spec = VariantSpec::parse("JOINT_STAGE1_2");
  const VariantResult again = run_variant(spec, art.train, art.eval_set, art.vocab, cfg);
  if (again.log.serialize() != art.joint_runs[0].log.serialize()) {
    note = "run log not reproducible";
    return false;
  }
  if (policy_bytes(again.captioner) != policy_bytes(art.joint_runs[0].captioner) ||
      policy_bytes(again.frame_policy) != policy_bytes(art.joint_runs[0].frame_policy)) {
    note = "policies not reproducible";
    return false;
  }
  note = "freeze contracts hold; rerun is byte-identical";
  return true;
}

int main() {
  std::printf("duet acceptance suite\n");
  run(1, "group advantage exactness", criterion1);
  run(2, "surrogate objective exactness", criterion2);
  run(3, "gradient vs finite differences", criterion3);
  run(4, "text-metric oracles", criterion4);
  run(5, "frechet proxy oracle", criterion5);
  run(6, "reward-design ranking fixtures", criterion6);

  TrainingArtifacts art;
  {
    const auto start = std::chrono::steady_clock::now();
    art.run_joint();
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("  (joint training, 5 seeds on the default corpus: %.1fs)\n", seconds);
  }
  run(7, "anchor filter audit", [&](std::string& n) { return criterion7(art, n); });
  run(8, "training dynamics", [&](std::string& n) { return criterion8(art, n); });
  run(9, "ablation ordering", [&](std::string& n) { return criterion9(art, n); });
  run(10, "freeze and determinism contracts", [&](std::string& n) { return criterion10(art, n); });

  if (failures == 0) {
    std::printf("ACCEPTANCE: 10/10 criteria passed\n");
    return 0;
  }
  std::printf("ACCEPTANCE: %d criteria FAILED\n", failures);
  for (const std::string& f : failure_notes) std::printf("  - %s\n", f.c_str());
  return 1;
}
