// Command-line interface: dataset generation, training regimes, ablation
// sweeps, evaluation, and curve export.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>

#include "duet/eval.hpp"
#include "duet/runlog.hpp"
#include "duet/train.hpp"
#include "duet/world.hpp"

namespace fs = std::filesystem;
using namespace duet;

namespace {

void write_config_file(const fs::path& out_dir, const std::map<std::string, std::string>& config) {
  fs::create_directories(out_dir);
  std::ofstream out(out_dir / "config.txt");
  if (!out) throw std::runtime_error("cannot write " + (out_dir / "config.txt").string());
  for (const auto& [k, v] : config) out << k << "=" << v << "\n";
}

void add_train_options(CLI::App* cmd, TrainConfig& cfg) {
  cmd->add_option("--seed", cfg.seed, "Run seed");
  cmd->add_option("--sft-steps", cfg.sft_steps, "Supervised fine-tuning steps");
  cmd->add_option("--stage1-steps", cfg.stage1_steps, "Stage-1 steps (captioner)");
  cmd->add_option("--stage2-steps", cfg.stage2_steps, "Stage-2 steps (frame policy)");
  cmd->add_option("--group-size", cfg.grpo.group_size, "Rollout group size G");
  cmd->add_option("--clip", cfg.grpo.clip, "Ratio clip range");
  cmd->add_option("--beta", cfg.grpo.beta, "KL penalty coefficient");
  cmd->add_option("--anchor-threshold", cfg.anchor_rouge_threshold,
                  "Stage-2 anchor ROUGE-L acceptance threshold");
  cmd->add_option("--anchor-max-retries", cfg.anchor_max_retries,
                  "Anchor resamples before ground-truth fallback");
  cmd->add_option("--lambda-f", cfg.lambda.f, "Format reward weight");
  cmd->add_option("--lambda-t1", cfg.lambda.t1, "Text fidelity reward weight");
  cmd->add_option("--lambda-v1", cfg.lambda.v1, "Stage-1 video fidelity reward weight");
  cmd->add_option("--lambda-v2", cfg.lambda.v2, "Stage-2 video fidelity reward weight");
  cmd->add_option("--lambda-c2", cfg.lambda.c2, "Semantic alignment reward weight");
  cmd->add_option("--sft-lr", cfg.sft_learning_rate, "SFT learning rate (captioner)");
  cmd->add_option("--frame-sft-lr", cfg.frame_sft_learning_rate,
                  "SFT learning rate (frame policy)");
  cmd->add_option("--rl-lr", cfg.grpo.learning_rate, "RL learning rate");
  cmd->add_option("--eval-every", cfg.eval_every, "Periodic eval interval (0 = final only)");
  cmd->add_option("--n-ref", cfg.n_ref_frames, "Reference frames for the frame policy");
  cmd->add_option("--optimizer", [&cfg](const std::vector<std::string>& vals) {
        if (vals[0] == "ascent") cfg.optimizer_mode = OptimizerMode::ascent;
        else if (vals[0] == "adam") cfg.optimizer_mode = OptimizerMode::adam;
        else return false;
        return true;
      },
      "Optimizer: ascent (default) or adam");
  cmd->add_option("--kl-mode", [&cfg](const std::vector<std::string>& vals) {
        if (vals[0] == "k3") cfg.grpo.kl_mode = KlMode::k3;
        else if (vals[0] == "exact") cfg.grpo.kl_mode = KlMode::exact;
        else return false;
        return true;
      },
      "KL estimator: k3 (default) or exact");
}

struct LoadedData {
  Dataset train;
  Dataset eval;
};

LoadedData load_train_eval(const std::string& train_path, const std::string& eval_path) {
  LoadedData data;
  data.train = read_dataset(train_path);
  data.eval = read_dataset(eval_path);
  if (data.train.vocab.symbol_count != data.eval.vocab.symbol_count) {
    throw std::runtime_error("train and eval datasets use different vocabularies");
  }
  return data;
}

void save_run(const fs::path& out_dir, const VariantResult& result) {
  fs::create_directories(out_dir);
  result.log.write(out_dir / "runlog.jsonl");
  save_policy(result.captioner, out_dir / "captioner.ckpt");
  save_policy(result.frame_policy, out_dir / "frame_policy.ckpt");
}

int run_gen_data(std::uint64_t seed, int symbols, const fs::path& out_dir, int train_proc,
                 int train_pred, int eval_proc, int eval_pred) {
  Vocab vocab;
  vocab.symbol_count = symbols;
  vocab.validate();
  WorldConfig world;
  world.vocab = vocab;
  const RuleTable rules = RuleTable::make(vocab, seed);

  Rng train_rng(seed);
  const auto train =
      generate_dataset(rules, CorpusCounts{train_proc, train_pred}, 0, train_rng, world);
  Rng eval_rng(seed + 1);
  const auto eval =
      generate_dataset(rules, CorpusCounts{eval_proc, eval_pred}, 1000000, eval_rng, world);

  fs::create_directories(out_dir);
  write_dataset(train, vocab, out_dir / "train.jsonl");
  write_dataset(eval, vocab, out_dir / "eval.jsonl");

  std::map<std::string, std::string> config;
  config["command"] = "gen-data";
  config["seed"] = std::to_string(seed);
  config["symbols"] = std::to_string(symbols);
  config["train_procedural"] = std::to_string(train_proc);
  config["train_predictive"] = std::to_string(train_pred);
  config["eval_procedural"] = std::to_string(eval_proc);
  config["eval_predictive"] = std::to_string(eval_pred);
  write_config_file(out_dir, config);

  std::cout << "wrote " << train.size() << " train and " << eval.size() << " eval episodes to "
            << out_dir.string() << "\n";
  return 0;
}

MetricRow median_of(const std::vector<MetricTable>& tables, bool procedural) {
  const auto select = [&](const MetricTable& t) -> const MetricRow& {
    return procedural ? t.procedural : t.predictive;
  };
  const auto med = [&](double MetricRow::* field) {
    std::vector<double> xs;
    for (const MetricTable& t : tables) xs.push_back(select(t).*field);
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
  };
  MetricRow out = select(tables.front());
  out.bleu1 = med(&MetricRow::bleu1);
  out.bleu2 = med(&MetricRow::bleu2);
  out.bleu3 = med(&MetricRow::bleu3);
  out.bleu4 = med(&MetricRow::bleu4);
  out.rouge_l = med(&MetricRow::rouge_l);
  out.frechet = med(&MetricRow::frechet);
  out.clip_v = med(&MetricRow::clip_v);
  out.clip_t = med(&MetricRow::clip_t);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"duet: a desk-scale RL laboratory for caption/frame policy co-training"};
  app.require_subcommand(1);
  // key=value config with one [subcommand] section per command; explicit
  // flags always win
  app.set_config("--config", "", "Config file; place before the subcommand");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic episode corpus");
  std::uint64_t gen_seed = 0;
  int gen_symbols = 32;
  std::string gen_out;
  int train_proc = 2000, train_pred = 2000, eval_proc = 200, eval_pred = 200;
  gen->add_option("--seed", gen_seed, "World and corpus seed");
  gen->add_option("--symbols", gen_symbols, "Symbol vocabulary size (multiple of 4)");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--train-procedural", train_proc, "Procedural training episodes");
  gen->add_option("--train-predictive", train_pred, "Predictive training episodes");
  gen->add_option("--eval-procedural", eval_proc, "Procedural evaluation episodes");
  gen->add_option("--eval-predictive", eval_pred, "Predictive evaluation episodes");

  // train-sft
  auto* sft = app.add_subcommand("train-sft", "Supervised fine-tuning of both policies");
  TrainConfig sft_cfg;
  std::string sft_dataset, sft_out;
  sft->add_option("--dataset", sft_dataset, "Training dataset")->required();
  sft->add_option("--out", sft_out, "Output directory")->required();
  add_train_options(sft, sft_cfg);

  // train-joint
  auto* joint = app.add_subcommand("train-joint", "SFT plus the selected training regime");
  TrainConfig joint_cfg;
  std::string joint_dataset, joint_eval, joint_out;
  std::string joint_variant = "JOINT_STAGE1_2";
  joint->add_option("--dataset", joint_dataset, "Training dataset")->required();
  joint->add_option("--eval-dataset", joint_eval, "Held-out evaluation dataset")->required();
  joint->add_option("--out", joint_out, "Output directory")->required();
  joint->add_option("--variant", joint_variant, "Training regime (ablation variant name)");
  add_train_options(joint, joint_cfg);

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Run an ablation sweep over variants and seeds");
  TrainConfig ablate_cfg;
  std::string ablate_dataset, ablate_eval, ablate_out;
  std::string ablate_variants = "all";
  int ablate_seeds = 5;
  ablate->add_option("--dataset", ablate_dataset, "Training dataset")->required();
  ablate->add_option("--eval-dataset", ablate_eval, "Held-out evaluation dataset")->required();
  ablate->add_option("--out", ablate_out, "Output directory")->required();
  ablate->add_option("--variants", ablate_variants,
                     "Comma-separated variant names, or 'all' for the base set");
  ablate->add_option("--seeds", ablate_seeds, "Seeds per variant");
  add_train_options(ablate, ablate_cfg);

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate checkpointed policies on a held-out set");
  std::string eval_dataset, eval_train_dataset, eval_captioner, eval_frame, eval_out;
  std::string eval_name = "run";
  ev->add_option("--dataset", eval_dataset, "Evaluation dataset")->required();
  ev->add_option("--train-dataset", eval_train_dataset,
                 "Training dataset for the disjointness check");
  ev->add_option("--captioner", eval_captioner, "Captioner checkpoint")->required();
  ev->add_option("--frame-policy", eval_frame, "Frame policy checkpoint")->required();
  ev->add_option("--out", eval_out, "Output directory")->required();
  ev->add_option("--name", eval_name, "Row label in the report");

  // export-curves
  auto* curves =
      app.add_subcommand("export-curves", "Export training-curve series from a run log");
  std::string curves_runlog, curves_out;
  curves->add_option("--runlog", curves_runlog, "Run log path")->required();
  curves->add_option("--out", curves_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const auto parsed = app.get_subcommands();
    std::cerr << (parsed.empty() ? app.help() : parsed.front()->help());
    return 1;
  }

  try {
    if (gen->parsed()) {
      return run_gen_data(gen_seed, gen_symbols, gen_out, train_proc, train_pred, eval_proc,
                          eval_pred);
    }

    if (sft->parsed()) {
      sft_cfg.validate();
      const Dataset data = read_dataset(sft_dataset);
      Policy captioner = make_captioner(data.vocab, sft_cfg.caption_max_len);
      Policy frame_policy =
          make_frame_policy(data.vocab, sft_cfg.n_ref_frames, sft_cfg.video_max_frames);
      RunLog log;
      auto config = config_echo(sft_cfg, data.vocab);
      config["command"] = "train-sft";
      config["dataset"] = sft_dataset;
      log.set_config(config);
      Rng rng(sft_cfg.seed);
      sft_train(captioner, frame_policy, data.episodes, data.vocab, sft_cfg, rng, log);

      fs::create_directories(sft_out);
      log.write(fs::path(sft_out) / "runlog.jsonl");
      save_policy(captioner, fs::path(sft_out) / "captioner.ckpt");
      save_policy(frame_policy, fs::path(sft_out) / "frame_policy.ckpt");
      write_config_file(sft_out, config);
      std::cout << "sft complete: " << sft_out << "\n";
      return 0;
    }

    if (joint->parsed()) {
      joint_cfg.validate();
      const VariantSpec spec = VariantSpec::parse(joint_variant);
      const LoadedData data = load_train_eval(joint_dataset, joint_eval);
      const VariantResult result =
          run_variant(spec, data.train.episodes, data.eval.episodes, data.train.vocab, joint_cfg,
                      joint_cfg.eval_every > 0 ? fs::path(joint_out) / "checkpoints" : fs::path{});
      save_run(joint_out, result);
      auto config = config_echo(joint_cfg, data.train.vocab);
      config["command"] = "train-joint";
      config["dataset"] = joint_dataset;
      config["eval_dataset"] = joint_eval;
      config["variant"] = spec.name();
      write_config_file(joint_out, config);
      report({{spec.name(), result.metrics}}, fs::path(joint_out) / "report");
      std::cout << "train-joint complete: " << joint_out << "\n";
      return 0;
    }

    if (ablate->parsed()) {
      ablate_cfg.validate();
      if (ablate_seeds < 1) throw std::runtime_error("--seeds must be >= 1");
      std::vector<VariantSpec> specs;
      if (ablate_variants == "all") {
        specs = all_base_variants();
      } else {
        std::stringstream ss(ablate_variants);
        std::string name;
        while (std::getline(ss, name, ',')) {
          if (!name.empty()) specs.push_back(VariantSpec::parse(name));
        }
      }
      if (specs.empty()) throw std::runtime_error("no variants selected");

      const LoadedData data = load_train_eval(ablate_dataset, ablate_eval);
      fs::create_directories(ablate_out);
      std::ofstream scores(fs::path(ablate_out) / "combined.kv");
      std::vector<std::pair<std::string, MetricTable>> tables;

      for (const VariantSpec& spec : specs) {
        std::vector<MetricTable> per_seed;
        for (int s = 0; s < ablate_seeds; ++s) {
          TrainConfig cfg = ablate_cfg;
          cfg.seed = ablate_cfg.seed + static_cast<std::uint64_t>(s);
          const VariantResult result =
              run_variant(spec, data.train.episodes, data.eval.episodes, data.train.vocab, cfg);
          const std::string cell = spec.name() + "/seed" + std::to_string(s);
          save_run(fs::path(ablate_out) / spec.name() / ("seed" + std::to_string(s)), result);
          tables.emplace_back(cell, result.metrics);
          per_seed.push_back(result.metrics);
          scores << cell << ".procedural=" << combined_score(result.metrics.procedural) << "\n";
          scores << cell << ".predictive=" << combined_score(result.metrics.predictive) << "\n";
          std::cout << cell << " done\n";
        }
        MetricTable median_table;
        median_table.procedural = median_of(per_seed, true);
        median_table.predictive = median_of(per_seed, false);
        tables.emplace_back(spec.name() + "/median", median_table);
        scores << spec.name()
               << "/median.procedural=" << combined_score(median_table.procedural) << "\n";
        scores << spec.name()
               << "/median.predictive=" << combined_score(median_table.predictive) << "\n";
      }

      report(tables, fs::path(ablate_out) / "report");
      auto config = config_echo(ablate_cfg, data.train.vocab);
      config["command"] = "ablate";
      config["dataset"] = ablate_dataset;
      config["eval_dataset"] = ablate_eval;
      config["variants"] = ablate_variants;
      config["seeds"] = std::to_string(ablate_seeds);
      write_config_file(ablate_out, config);
      std::cout << "ablation sweep complete: " << ablate_out << "\n";
      return 0;
    }

    if (ev->parsed()) {
      const Dataset eval_data = read_dataset(eval_dataset);
      std::unordered_set<std::int64_t> train_ids;
      if (!eval_train_dataset.empty()) {
        const Dataset train_data = read_dataset(eval_train_dataset);
        for (const Episode& ep : train_data.episodes) train_ids.insert(ep.id);
      }
      const Policy captioner = load_policy(eval_captioner);
      const Policy frame_policy = load_policy(eval_frame);
      const MetricTable table = evaluate(captioner, frame_policy, eval_data.episodes,
                                         eval_data.vocab, EvalConfig{}, train_ids);
      fs::create_directories(eval_out);
      report({{eval_name, table}}, fs::path(eval_out) / "report");
      std::map<std::string, std::string> config;
      config["command"] = "eval";
      config["dataset"] = eval_dataset;
      config["train_dataset"] = eval_train_dataset;
      config["captioner"] = eval_captioner;
      config["frame_policy"] = eval_frame;
      config["name"] = eval_name;
      write_config_file(eval_out, config);
      std::cout << "eval complete: " << eval_out << "\n";
      return 0;
    }

    if (curves->parsed()) {
      export_curves(curves_runlog, curves_out);
      std::cout << "curves exported: " << curves_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
