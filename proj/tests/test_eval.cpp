#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "duet/eval.hpp"
#include "duet/train.hpp"
#include "duet/world.hpp"

using namespace duet;

namespace {

struct Fixture {
  Vocab vocab;
  WorldConfig world;
  RuleTable rules = RuleTable::make(Vocab{}, 7);
  std::vector<Episode> train;
  std::vector<Episode> eval_set;

  Fixture() {
    vocab.validate();
    world.vocab = vocab;
    Rng rng(100);
    train = generate_dataset(rules, CorpusCounts{6, 6}, 0, rng, world);
    Rng erng(101);
    eval_set = generate_dataset(rules, CorpusCounts{4, 4}, 1000000, erng, world);
  }
};

// A policy pair memorized on a single episode.
struct Memorized {
  Policy captioner;
  Policy frame_policy;

  explicit Memorized(const Episode& ep, const Vocab& vocab) {
    captioner = make_captioner(vocab);
    frame_policy = make_frame_policy(vocab);
    TrainConfig cfg;
    cfg.sft_steps = 800;
    cfg.sft_learning_rate = 0.6;
    cfg.frame_sft_learning_rate = 0.6;
    RunLog log;
    Rng rng(5);
    sft_train(captioner, frame_policy, {ep}, vocab, cfg, rng, log);
  }
};

}  // namespace

TEST_CASE("memorized policies ace a single-episode eval set") {
  const Fixture fx;
  Episode ep = fx.train.front();
  const Memorized m(ep, fx.vocab);

  ep.id = 999;  // avoid the train manifest in this check
  const MetricTable table = evaluate(m.captioner, m.frame_policy, {ep}, fx.vocab);
  const MetricRow& row = ep.question.kind == QuestionKind::procedural ? table.procedural
                                                                      : table.predictive;
  CHECK(row.episodes == 1);
  CHECK(row.rouge_l == doctest::Approx(1.0));
  CHECK(row.clip_v == doctest::Approx(1.0));
  CHECK(row.frechet <= 1e-9);
  CHECK(row.bleu1 == doctest::Approx(1.0));

  // random-init policies score strictly below the memorized pair
  const Policy zero_cap = make_captioner(fx.vocab);
  const Policy zero_frame = make_frame_policy(fx.vocab);
  const MetricTable zero = evaluate(zero_cap, zero_frame, {ep}, fx.vocab);
  const MetricRow& zrow = ep.question.kind == QuestionKind::procedural ? zero.procedural
                                                                       : zero.predictive;
  CHECK(zrow.rouge_l < row.rouge_l);
  CHECK(zrow.clip_v < row.clip_v);
  CHECK(zrow.frechet > row.frechet);
}

TEST_CASE("evaluation is deterministic, order-invariant, and non-mutating") {
  const Fixture fx;
  const Memorized m(fx.train.front(), fx.vocab);

  const std::string cap_bytes = policy_bytes(m.captioner);
  const std::string frame_bytes = policy_bytes(m.frame_policy);

  const MetricTable a = evaluate(m.captioner, m.frame_policy, fx.eval_set, fx.vocab);
  const MetricTable b = evaluate(m.captioner, m.frame_policy, fx.eval_set, fx.vocab);

  std::vector<Episode> shuffled = fx.eval_set;
  std::reverse(shuffled.begin(), shuffled.end());
  const MetricTable c = evaluate(m.captioner, m.frame_policy, shuffled, fx.vocab);

  const auto rows_equal = [](const MetricRow& x, const MetricRow& y) {
    return x.bleu1 == y.bleu1 && x.bleu2 == y.bleu2 && x.bleu3 == y.bleu3 &&
           x.bleu4 == y.bleu4 && x.rouge_l == y.rouge_l && x.frechet == y.frechet &&
           x.clip_v == y.clip_v && x.clip_t == y.clip_t && x.episodes == y.episodes;
  };
  CHECK(rows_equal(a.procedural, b.procedural));
  CHECK(rows_equal(a.predictive, b.predictive));
  CHECK(rows_equal(a.procedural, c.procedural));
  CHECK(rows_equal(a.predictive, c.predictive));

  CHECK(policy_bytes(m.captioner) == cap_bytes);
  CHECK(policy_bytes(m.frame_policy) == frame_bytes);
}

TEST_CASE("evaluation rejects train overlap and duplicate ids") {
  const Fixture fx;
  const Policy cap = make_captioner(fx.vocab);
  const Policy frame = make_frame_policy(fx.vocab);

  std::unordered_set<std::int64_t> train_ids;
  for (const Episode& ep : fx.train) train_ids.insert(ep.id);

  CHECK_NOTHROW(evaluate(cap, frame, fx.eval_set, fx.vocab, {}, train_ids));

  std::vector<Episode> overlapping = fx.eval_set;
  overlapping.front().id = fx.train.front().id;
  CHECK_THROWS_WITH_AS(evaluate(cap, frame, overlapping, fx.vocab, {}, train_ids),
                       doctest::Contains("overlaps the training manifest"),
                       std::invalid_argument);

  std::vector<Episode> duplicated = fx.eval_set;
  duplicated.push_back(duplicated.front());
  CHECK_THROWS_WITH_AS(evaluate(cap, frame, duplicated, fx.vocab, {}, train_ids),
                       doctest::Contains("duplicate"), std::invalid_argument);
}

TEST_CASE("report writes sorted rows that parse back exactly") {
  const auto dir = std::filesystem::temp_directory_path() / "duet_eval_tests";
  std::filesystem::create_directories(dir);

  MetricTable t1;
  t1.procedural.bleu1 = 0.125;
  t1.procedural.rouge_l = 1.0 / 3.0;
  t1.procedural.frechet = 0.75;
  t1.procedural.clip_v = 0.5;
  t1.procedural.clip_t = 0.25;
  t1.procedural.episodes = 3;
  MetricTable t2 = t1;
  t2.predictive.rouge_l = 0.9;

  report({{"B_VARIANT", t1}}, dir / "single");
  auto rows = parse_report_csv(dir / "single.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].first == "B_VARIANT:procedural");
  CHECK(rows[0].second.bleu1 == 0.125);
  CHECK(rows[0].second.rouge_l == 1.0 / 3.0);

  report({{"B_VARIANT", t1}, {"A_VARIANT", t2}}, dir / "pair");
  rows = parse_report_csv(dir / "pair.csv");
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].first == "A_VARIANT:procedural");  // sorted by variant name
  CHECK(rows[1].first == "A_VARIANT:predictive");
  CHECK(rows[1].second.rouge_l == 0.9);
  CHECK(rows[2].first == "B_VARIANT:procedural");

  CHECK_THROWS_WITH_AS(report({{"X", t1}, {"X", t2}}, dir / "dup"), doctest::Contains("duplicate"),
                       std::invalid_argument);
  CHECK_THROWS_AS(report({}, dir / "none"), std::invalid_argument);

  // the kv file carries the same values
  std::ifstream kv(dir / "pair.kv");
  std::string line;
  bool found = false;
  while (std::getline(kv, line)) {
    if (line.rfind("A_VARIANT:predictive.rouge_l=", 0) == 0) {
      CHECK(std::stod(line.substr(line.find('=') + 1)) == 0.9);
      found = true;
    }
  }
  CHECK(found);
}
