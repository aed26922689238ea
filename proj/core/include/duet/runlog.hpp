#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "duet/eval.hpp"

namespace duet {

// One training step. Components and weights travel together so a reader can
// re-derive the total exactly.
struct StepRecord {
  std::int64_t step = 0;
  std::string stage;
  std::vector<std::pair<std::string, double>> components;  // group means
  std::vector<std::pair<std::string, double>> weights;
  double total = 0.0;  // fold of weight * component, in component order
  double kl = 0.0;
  double clip_fraction = 0.0;
  double ratio_mean = 1.0;
  double think_len = 0.0;   // tokens preceding the answer span
  double answer_len = 0.0;  // answer-span tokens
  std::optional<double> anchor_rouge;
  std::optional<bool> anchor_fallback;
};

struct EvalRecord {
  std::int64_t step = 0;
  std::string stage;
  MetricTable metrics;
};

// Append-only training log: a header echoing the resolved configuration,
// then one self-describing record per line, in append order.
class RunLog {
 public:
  using Record = std::variant<StepRecord, EvalRecord>;

  void set_config(std::map<std::string, std::string> config) { config_ = std::move(config); }
  const std::map<std::string, std::string>& config() const { return config_; }

  void append(StepRecord record) { records_.emplace_back(std::move(record)); }
  void append(EvalRecord record) { records_.emplace_back(std::move(record)); }

  const std::vector<Record>& records() const { return records_; }
  std::vector<const StepRecord*> steps(const std::string& stage = {}) const;
  std::vector<const EvalRecord*> evals() const;

  std::string serialize() const;
  void write(const std::filesystem::path& path) const;
  static RunLog read(const std::filesystem::path& path);

 private:
  std::map<std::string, std::string> config_;
  std::vector<Record> records_;
};

// Writes one step,value csv per curve series: stage-1 r_f, r_t1, r_v1,
// total, and thinking length; stage-2 r_v2, r_c2, and total. Values
// round-trip exactly.
void export_curves(const std::filesystem::path& runlog_path,
                   const std::filesystem::path& out_dir);

}  // namespace duet
