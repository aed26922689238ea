#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "duet/train.hpp"

using namespace duet;

namespace {

struct Fixture {
  Vocab vocab;
  WorldConfig world;
  RuleTable rules = RuleTable::make(Vocab{}, 7);
  std::vector<Episode> train;
  std::vector<Episode> eval_set;

  explicit Fixture(int train_per_kind = 40, int eval_per_kind = 10) {
    vocab.validate();
    world.vocab = vocab;
    Rng rng(100);
    train = generate_dataset(rules, CorpusCounts{train_per_kind, train_per_kind}, 0, rng, world);
    Rng erng(101);
    eval_set =
        generate_dataset(rules, CorpusCounts{eval_per_kind, eval_per_kind}, 1000000, erng, world);
  }
};

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.sft_steps = 200;
  cfg.stage1_steps = 12;
  cfg.stage2_steps = 12;
  cfg.sft_learning_rate = 0.4;
  cfg.grpo.learning_rate = 0.05;
  cfg.seed = 3;
  return cfg;
}

double mean_of(const std::vector<double>& xs, std::size_t begin, std::size_t end) {
  return std::accumulate(xs.begin() + begin, xs.begin() + end, 0.0) / (end - begin);
}

}  // namespace

TEST_CASE("variant names parse and validate") {
  CHECK(VariantSpec::parse("SFT_ONLY").variant == AblationVariant::sft_only);
  CHECK(VariantSpec::parse("GRPO_VLM_PLUS_VDM_CASCADE").variant == AblationVariant::grpo_cascade);
  const VariantSpec flagged = VariantSpec::parse("JOINT_STAGE1_2:no_rc2");
  CHECK(flagged.no_rc2);
  CHECK(flagged.name() == "JOINT_STAGE1_2:no_rc2");
  CHECK(VariantSpec::parse("JOINT_STAGE1:no_rt1").no_rt1);

  CHECK_THROWS_AS(VariantSpec::parse("NOT_A_VARIANT"), std::invalid_argument);
  CHECK_THROWS_AS(VariantSpec::parse("SFT_ONLY:no_rt1"), std::invalid_argument);
  CHECK_THROWS_AS(VariantSpec::parse("GRPO_VLM:no_rv1"), std::invalid_argument);
  CHECK_THROWS_AS(VariantSpec::parse("JOINT_STAGE1:no_rc2"), std::invalid_argument);
  CHECK_THROWS_AS(VariantSpec::parse("JOINT_STAGE1_2:no_rx"), std::invalid_argument);
  CHECK(all_base_variants().size() == 7);
}

TEST_CASE("think and answer lengths read the caption template") {
  Vocab v;
  v.validate();
  const Caption c = Caption::from_tokens(
      {Vocab::kThinkOpen, v.word(0), v.word(1), Vocab::kThinkClose, Vocab::kAnswerOpen, v.word(2),
       Vocab::kAnswerClose, Vocab::kEnd},
      v);
  CHECK(think_length(c) == 2.0);
  CHECK(answer_length(c) == 1.0);

  const Caption malformed = Caption::from_tokens({v.word(0), Vocab::kAnswerOpen, v.word(2)}, v);
  CHECK(think_length(malformed) == 1.0);  // tokens before the answer-open marker
  CHECK(answer_length(malformed) == 0.0);
}

TEST_CASE("sft memorizes a single episode") {
  const Fixture fx(2, 1);
  const Episode& ep = fx.train.front();

  Policy captioner = make_captioner(fx.vocab);
  Policy frame_policy = make_frame_policy(fx.vocab);
  TrainConfig cfg = tiny_config();
  cfg.sft_steps = 800;
  cfg.sft_learning_rate = 0.6;
  cfg.frame_sft_learning_rate = 0.6;
  RunLog log;
  Rng rng(5);
  sft_train(captioner, frame_policy, {ep}, fx.vocab, cfg, rng, log);

  const CaptionContext ctx(fx.vocab, ep.input_video, ep.question, cfg.caption_max_len);
  const Trajectory greedy = greedy_trajectory(captioner, ctx);
  CHECK(greedy.tokens == ep.gt_caption.tokens);

  const FrameContext fctx(fx.vocab, ep.gt_caption, ep.input_video, cfg.n_ref_frames,
                          cfg.video_max_frames);
  const SymbolicVideo video = trajectory_to_video(greedy_trajectory(frame_policy, fctx), fx.vocab);
  CHECK(video == ep.gt_video);

  CHECK_THROWS_AS(sft_train(captioner, frame_policy, {}, fx.vocab, cfg, rng, log),
                  std::invalid_argument);
}

TEST_CASE("sft log-likelihood trends upward") {
  const Fixture fx(25, 1);
  Policy captioner = make_captioner(fx.vocab);
  Policy frame_policy = make_frame_policy(fx.vocab);
  TrainConfig cfg = tiny_config();
  cfg.sft_steps = 600;
  RunLog log;
  Rng rng(7);
  sft_train(captioner, frame_policy, fx.train, fx.vocab, cfg, rng, log);

  std::vector<double> totals;
  for (const StepRecord* rec : log.steps("sft")) totals.push_back(rec->total);
  REQUIRE(totals.size() == 600);
  CHECK(mean_of(totals, 500, 600) > mean_of(totals, 0, 100));
}

TEST_CASE("stage 1 freezes the frame policy and logs full breakdowns") {
  const Fixture fx;
  TrainConfig cfg = tiny_config();

  Policy captioner = make_captioner(fx.vocab);
  Policy frame_policy = make_frame_policy(fx.vocab);
  RunLog log;
  Rng rng(cfg.seed);
  sft_train(captioner, frame_policy, fx.train, fx.vocab, cfg, rng, log);

  const std::string frame_bytes = policy_bytes(frame_policy);
  const std::string cap_bytes = policy_bytes(captioner);
  stage1_train(captioner, frame_policy, fx.train, fx.vocab, cfg, rng, log);
  CHECK(policy_bytes(frame_policy) == frame_bytes);  // freeze contract
  CHECK(policy_bytes(captioner) != cap_bytes);

  const auto steps = log.steps("stage1");
  REQUIRE(static_cast<int>(steps.size()) == cfg.stage1_steps);
  for (const StepRecord* rec : steps) {
    REQUIRE(rec->components.size() == 3);
    CHECK(rec->components[0].first == "r_f");
    CHECK(rec->components[1].first == "r_t1");
    CHECK(rec->components[2].first == "r_v1");
    // reward accounting: the logged total is the exact fold
    double fold = 0.0;
    for (std::size_t k = 0; k < rec->components.size(); ++k) {
      fold += rec->weights[k].second * rec->components[k].second;
    }
    CHECK(rec->total == fold);
    for (const auto& [name, value] : rec->components) {
      CHECK(value >= 0.0);
      CHECK(value <= 1.0);
    }
  }
}

TEST_CASE("anchor sampling accepts, retries, and falls back") {
  const Fixture fx(2, 1);
  const Episode& ep = fx.train.front();
  TrainConfig cfg = tiny_config();

  // memorized captioner produces an accepted anchor on the first try
  Policy captioner = make_captioner(fx.vocab);
  Policy frame_policy = make_frame_policy(fx.vocab);
  cfg.sft_steps = 800;
  cfg.sft_learning_rate = 0.6;
  cfg.frame_sft_learning_rate = 0.6;
  RunLog log;
  Rng rng(5);
  sft_train(captioner, frame_policy, {ep}, fx.vocab, cfg, rng, log);
  Rng arng(9);
  const AnchorResult accepted = anchor_sample(captioner, ep, fx.vocab, cfg, arng);
  CHECK(!accepted.fallback);
  CHECK(accepted.attempts == 1);
  CHECK(accepted.rouge >= cfg.anchor_rouge_threshold);

  // a uniform-random captioner never clears the threshold
  const Policy uniform = make_captioner(fx.vocab);
  Rng urng(11);
  const AnchorResult fallback = anchor_sample(uniform, ep, fx.vocab, cfg, urng);
  CHECK(fallback.fallback);
  CHECK(fallback.attempts == cfg.anchor_max_retries);
  CHECK(fallback.caption == ep.gt_caption);
  CHECK(fallback.rouge == 1.0);

  // the rejection loop is reproducible: a cloned rng replays it exactly
  Rng replay_a(13), replay_b(13);
  const AnchorResult ra = anchor_sample(captioner, ep, fx.vocab, cfg, replay_a);
  const AnchorResult rb = anchor_sample(captioner, ep, fx.vocab, cfg, replay_b);
  CHECK(ra.caption == rb.caption);
  CHECK(ra.attempts == rb.attempts);
  CHECK(ra.fallback == rb.fallback);
}

TEST_CASE("stage 2 freezes the captioner and audits anchors") {
  const Fixture fx;
  TrainConfig cfg = tiny_config();
  cfg.stage2_steps = 20;

  Policy captioner = make_captioner(fx.vocab);
  Policy frame_policy = make_frame_policy(fx.vocab);
  RunLog log;
  Rng rng(cfg.seed);
  sft_train(captioner, frame_policy, fx.train, fx.vocab, cfg, rng, log);

  const std::string cap_bytes = policy_bytes(captioner);
  stage2_train(captioner, frame_policy, fx.train, fx.vocab, cfg, rng, log);
  CHECK(policy_bytes(captioner) == cap_bytes);  // freeze contract

  const auto steps = log.steps("stage2");
  REQUIRE(static_cast<int>(steps.size()) == cfg.stage2_steps);
  for (const StepRecord* rec : steps) {
    REQUIRE(rec->anchor_rouge.has_value());
    REQUIRE(rec->anchor_fallback.has_value());
    if (!*rec->anchor_fallback) {
      CHECK(*rec->anchor_rouge >= cfg.anchor_rouge_threshold);
    }
    REQUIRE(rec->components.size() == 2);
    CHECK(rec->components[0].first == "r_v2");
    CHECK(rec->components[1].first == "r_c2");
  }
}

TEST_CASE("run_variant honours drop flags and freeze contracts") {
  const Fixture fx(20, 5);
  TrainConfig cfg = tiny_config();
  cfg.sft_steps = 100;

  // GRPO_VDM leaves the captioner exactly at its SFT state
  {
    Policy captioner = make_captioner(fx.vocab);
    Policy frame_policy = make_frame_policy(fx.vocab);
    RunLog log;
    Rng rng(cfg.seed);
    sft_train(captioner, frame_policy, fx.train, fx.vocab, cfg, rng, log);
    const std::string sft_cap = policy_bytes(captioner);

    const VariantResult vdm =
        run_variant(VariantSpec::parse("GRPO_VDM"), fx.train, fx.eval_set, fx.vocab, cfg);
    CHECK(policy_bytes(vdm.captioner) == sft_cap);
    // and its stage-2 records carry r_v2 only
    for (const StepRecord* rec : vdm.log.steps("stage2")) {
      REQUIRE(rec->components.size() == 1);
      CHECK(rec->components[0].first == "r_v2");
      CHECK(!*rec->anchor_fallback);  // ground-truth anchors
    }
  }

  // no_rt1 removes the component from every stage-1 record
  {
    const VariantResult no_rt1 = run_variant(VariantSpec::parse("JOINT_STAGE1:no_rt1"), fx.train,
                                             fx.eval_set, fx.vocab, cfg);
    const auto steps = no_rt1.log.steps("stage1");
    REQUIRE(!steps.empty());
    for (const StepRecord* rec : steps) {
      for (const auto& [name, value] : rec->components) CHECK(name != "r_t1");
    }
  }

  // all-in-one updates both policies per step over the stage-1 step budget
  {
    const VariantResult aio = run_variant(VariantSpec::parse("JOINT_ALL_IN_ONE"), fx.train,
                                          fx.eval_set, fx.vocab, cfg);
    CHECK(static_cast<int>(aio.log.steps("joint").size()) == cfg.stage1_steps);
  }
}

TEST_CASE("identical config and seed reproduce the run log byte for byte") {
  const Fixture fx(10, 3);
  TrainConfig cfg = tiny_config();
  cfg.sft_steps = 60;
  cfg.stage1_steps = 6;
  cfg.stage2_steps = 6;

  const VariantSpec spec = VariantSpec::parse("JOINT_STAGE1_2");
  const VariantResult a = run_variant(spec, fx.train, fx.eval_set, fx.vocab, cfg);
  const VariantResult b = run_variant(spec, fx.train, fx.eval_set, fx.vocab, cfg);
  CHECK(a.log.serialize() == b.log.serialize());
  CHECK(policy_bytes(a.captioner) == policy_bytes(b.captioner));
  CHECK(policy_bytes(a.frame_policy) == policy_bytes(b.frame_policy));

  TrainConfig other = cfg;
  other.seed = cfg.seed + 1;
  const VariantResult c = run_variant(spec, fx.train, fx.eval_set, fx.vocab, other);
  CHECK(a.log.serialize() != c.log.serialize());
}

TEST_CASE("periodic evaluation and checkpoints follow eval_every") {
  const Fixture fx(10, 3);
  TrainConfig cfg = tiny_config();
  cfg.sft_steps = 20;
  cfg.stage1_steps = 6;
  cfg.stage2_steps = 6;
  cfg.eval_every = 10;

  const auto ckpt_dir = std::filesystem::temp_directory_path() / "duet_periodic_ckpts";
  std::filesystem::remove_all(ckpt_dir);
  const VariantResult result = run_variant(VariantSpec::parse("JOINT_STAGE1_2"), fx.train,
                                           fx.eval_set, fx.vocab, cfg, ckpt_dir);
  // sft steps 9 and 19 trigger evals; stages are shorter than the interval;
  // the final eval record is always present
  const auto evals = result.log.evals();
  REQUIRE(evals.size() == 3);
  CHECK(evals[0]->stage == "sft");
  CHECK(evals[0]->step == 9);
  CHECK(evals[1]->step == 19);
  CHECK(evals[2]->stage == "final");
  CHECK(std::filesystem::exists(ckpt_dir / "sft_10_captioner.ckpt"));
  CHECK(std::filesystem::exists(ckpt_dir / "sft_20_frame_policy.ckpt"));
}

TEST_CASE("combined score rewards similarity and penalizes distance") {
  MetricRow good;
  good.rouge_l = 1.0;
  good.clip_v = 1.0;
  good.clip_t = 1.0;
  good.frechet = 0.0;
  CHECK(combined_score(good) == 1.0);

  MetricRow worse = good;
  worse.frechet = 3.0;
  CHECK(combined_score(worse) < combined_score(good));
  MetricRow textless = good;
  textless.rouge_l = 0.2;
  CHECK(combined_score(textless) < combined_score(good));
}

TEST_CASE("config validation rejects out-of-range values") {
  TrainConfig cfg = tiny_config();
  cfg.anchor_rouge_threshold = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.grpo.group_size = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.sft_steps = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.grpo.clip = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
