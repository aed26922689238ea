#include <benchmark/benchmark.h>

#include "duet/grpo.hpp"
#include "duet/policy.hpp"
#include "duet/reward.hpp"
#include "duet/train.hpp"
#include "duet/world.hpp"

using namespace duet;

namespace {

struct Setup {
  Vocab vocab;
  WorldConfig world;
  RuleTable rules = RuleTable::make(Vocab{}, 7);
  std::vector<Episode> episodes;
  Policy captioner;
  Policy frame_policy;

  Setup() {
    vocab.validate();
    world.vocab = vocab;
    Rng rng(1);
    episodes = generate_dataset(rules, CorpusCounts{64, 64}, 0, rng, world);
    captioner = make_captioner(vocab);
    frame_policy = make_frame_policy(vocab);
    Rng wrng(2);
    for (double& w : captioner.weights().flat()) w = (wrng.next_double() - 0.5) * 0.2;
    for (double& w : frame_policy.weights().flat()) w = (wrng.next_double() - 0.5) * 0.2;
  }
};

Setup& setup() {
  static Setup s;
  return s;
}

}  // namespace

static void BM_Softmax(benchmark::State& state) {
  Rng rng(3);
  Vec logits(state.range(0));
  for (double& v : logits) v = rng.next_double() * 10.0 - 5.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(softmax(logits));
  }
}
BENCHMARK(BM_Softmax)->Arg(45)->Arg(256);

static void BM_GenerateEpisode(benchmark::State& state) {
  Setup& s = setup();
  Rng rng(4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_episode(s.rules, QuestionKind::procedural, rng, s.world));
  }
}
BENCHMARK(BM_GenerateEpisode);

static void BM_SampleCaption(benchmark::State& state) {
  Setup& s = setup();
  const Episode& ep = s.episodes.front();
  const CaptionContext ctx(s.vocab, ep.input_video, ep.question);
  Rng rng(5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_trajectory(s.captioner, ctx, rng));
  }
}
BENCHMARK(BM_SampleCaption);

static void BM_RougeL(benchmark::State& state) {
  Rng rng(6);
  std::vector<int> a(state.range(0)), b(state.range(0));
  for (int& t : a) t = rng.next_int(16);
  for (int& t : b) t = rng.next_int(16);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rouge_l(a, b));
  }
}
BENCHMARK(BM_RougeL)->Arg(8)->Arg(48);

static void BM_Bleu4(benchmark::State& state) {
  Rng rng(7);
  std::vector<int> a(16), b(16);
  for (int& t : a) t = rng.next_int(8);
  for (int& t : b) t = rng.next_int(8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(bleu(a, b, 4));
  }
}
BENCHMARK(BM_Bleu4);

static void BM_FrechetProxy(benchmark::State& state) {
  Setup& s = setup();
  Rng rng(8);
  std::vector<Vec> set_a, set_b;
  for (int i = 0; i < 64; ++i) {
    Vec x(s.vocab.symbol_count);
    for (double& v : x) v = rng.next_double();
    set_a.push_back(x);
    for (double& v : x) v = rng.next_double();
    set_b.push_back(x);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(frechet_proxy(set_a, set_b));
  }
}
BENCHMARK(BM_FrechetProxy);

static void BM_GrpoStep(benchmark::State& state) {
  Setup& s = setup();
  const Episode& ep = s.episodes.front();
  const CaptionContext ctx(s.vocab, ep.input_video, ep.question);
  GrpoConfig cfg;
  Rng rng(9);
  for (auto _ : state) {
    state.PauseTiming();
    Policy policy = s.captioner.snapshot();
    GroupRollout group = rollout_group(policy, ctx, cfg.group_size, rng);
    group.rewards.resize(cfg.group_size);
    for (double& r : group.rewards) r = rng.next_double();
    group.advantages = normalize_advantages(group.rewards);
    Optimizer opt({cfg.learning_rate, OptimizerMode::ascent});
    state.ResumeTiming();
    benchmark::DoNotOptimize(grpo_step(policy, group, ctx, s.captioner, cfg, opt));
  }
}
BENCHMARK(BM_GrpoStep);

static void BM_Evaluate64(benchmark::State& state) {
  Setup& s = setup();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        evaluate(s.captioner, s.frame_policy, s.episodes, s.vocab, EvalConfig{}));
  }
}
BENCHMARK(BM_Evaluate64);

BENCHMARK_MAIN();
