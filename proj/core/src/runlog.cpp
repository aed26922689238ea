#include "duet/runlog.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace duet {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json pairs_to_json(const std::vector<std::pair<std::string, double>>& pairs) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : pairs) j[k] = v;
  return j;
}

std::vector<std::pair<std::string, double>> pairs_from_json(const ordered_json& j) {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [k, v] : j.items()) out.emplace_back(k, v.get<double>());
  return out;
}

ordered_json row_to_json(const MetricRow& row) {
  ordered_json j;
  j["bleu1"] = row.bleu1;
  j["bleu2"] = row.bleu2;
  j["bleu3"] = row.bleu3;
  j["bleu4"] = row.bleu4;
  j["rouge_l"] = row.rouge_l;
  j["frechet"] = row.frechet;
  j["clip_v"] = row.clip_v;
  j["clip_t"] = row.clip_t;
  j["episodes"] = row.episodes;
  return j;
}

MetricRow row_from_json(const ordered_json& j) {
  MetricRow row;
  row.bleu1 = j.at("bleu1").get<double>();
  row.bleu2 = j.at("bleu2").get<double>();
  row.bleu3 = j.at("bleu3").get<double>();
  row.bleu4 = j.at("bleu4").get<double>();
  row.rouge_l = j.at("rouge_l").get<double>();
  row.frechet = j.at("frechet").get<double>();
  row.clip_v = j.at("clip_v").get<double>();
  row.clip_t = j.at("clip_t").get<double>();
  row.episodes = j.at("episodes").get<int>();
  return row;
}

ordered_json record_to_json(const StepRecord& s) {
  ordered_json j;
  j["type"] = "step";
  j["stage"] = s.stage;
  j["step"] = s.step;
  j["components"] = pairs_to_json(s.components);
  j["weights"] = pairs_to_json(s.weights);
  j["total"] = s.total;
  j["kl"] = s.kl;
  j["clip_fraction"] = s.clip_fraction;
  j["ratio_mean"] = s.ratio_mean;
  j["think_len"] = s.think_len;
  j["answer_len"] = s.answer_len;
  if (s.anchor_rouge) j["anchor_rouge"] = *s.anchor_rouge;
  if (s.anchor_fallback) j["anchor_fallback"] = *s.anchor_fallback;
  return j;
}

ordered_json record_to_json(const EvalRecord& e) {
  ordered_json j;
  j["type"] = "eval";
  j["stage"] = e.stage;
  j["step"] = e.step;
  j["procedural"] = row_to_json(e.metrics.procedural);
  j["predictive"] = row_to_json(e.metrics.predictive);
  return j;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<const StepRecord*> RunLog::steps(const std::string& stage) const {
  std::vector<const StepRecord*> out;
  for (const Record& r : records_) {
    if (const StepRecord* s = std::get_if<StepRecord>(&r)) {
      if (stage.empty() || s->stage == stage) out.push_back(s);
    }
  }
  return out;
}

std::vector<const EvalRecord*> RunLog::evals() const {
  std::vector<const EvalRecord*> out;
  for (const Record& r : records_) {
    if (const EvalRecord* e = std::get_if<EvalRecord>(&r)) out.push_back(e);
  }
  return out;
}

std::string RunLog::serialize() const {
  std::ostringstream out;
  ordered_json header;
  header["type"] = "header";
  ordered_json cfg = ordered_json::object();
  for (const auto& [k, v] : config_) cfg[k] = v;
  header["config"] = cfg;
  out << header.dump() << "\n";
  for (const Record& r : records_) {
    std::visit([&](const auto& rec) { out << record_to_json(rec).dump() << "\n"; }, r);
  }
  return out.str();
}

void RunLog::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("RunLog::write: cannot open " + path.string());
  out << serialize();
}

RunLog RunLog::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("RunLog::read: cannot open " + path.string());
  RunLog log;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const ordered_json j = ordered_json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        std::map<std::string, std::string> cfg;
        for (const auto& [k, v] : j.at("config").items()) cfg[k] = v.get<std::string>();
        log.set_config(std::move(cfg));
      } else if (type == "step") {
        StepRecord s;
        s.stage = j.at("stage").get<std::string>();
        s.step = j.at("step").get<std::int64_t>();
        s.components = pairs_from_json(j.at("components"));
        s.weights = pairs_from_json(j.at("weights"));
        s.total = j.at("total").get<double>();
        s.kl = j.at("kl").get<double>();
        s.clip_fraction = j.at("clip_fraction").get<double>();
        s.ratio_mean = j.at("ratio_mean").get<double>();
        s.think_len = j.at("think_len").get<double>();
        s.answer_len = j.at("answer_len").get<double>();
        if (j.contains("anchor_rouge")) s.anchor_rouge = j["anchor_rouge"].get<double>();
        if (j.contains("anchor_fallback")) s.anchor_fallback = j["anchor_fallback"].get<bool>();
        log.append(std::move(s));
      } else if (type == "eval") {
        EvalRecord e;
        e.stage = j.at("stage").get<std::string>();
        e.step = j.at("step").get<std::int64_t>();
        e.metrics.procedural = row_from_json(j.at("procedural"));
        e.metrics.predictive = row_from_json(j.at("predictive"));
        log.append(std::move(e));
      } else {
        throw std::runtime_error("unknown record type " + type);
      }
    } catch (const ordered_json::exception& e) {
      throw std::runtime_error("RunLog::read: " + path.string() + " line " +
                               std::to_string(line_no) + ": " + e.what());
    }
  }
  return log;
}

void export_curves(const std::filesystem::path& runlog_path,
                   const std::filesystem::path& out_dir) {
  const RunLog log = RunLog::read(runlog_path);
  std::filesystem::create_directories(out_dir);

  struct Series {
    const char* file;
    const char* stage;
    const char* component;  // nullptr selects the step total
  };
  // The eight panels of the stage-1/stage-2 training-curve figure.
  const Series series[] = {
      {"stage1_r_f.csv", "stage1", "r_f"},
      {"stage1_r_t1.csv", "stage1", "r_t1"},
      {"stage1_r_v1.csv", "stage1", "r_v1"},
      {"stage1_total.csv", "stage1", nullptr},
      {"stage1_think_len.csv", "stage1", "think_len"},
      {"stage2_r_v2.csv", "stage2", "r_v2"},
      {"stage2_r_c2.csv", "stage2", "r_c2"},
      {"stage2_total.csv", "stage2", nullptr},
  };

  for (const Series& s : series) {
    std::ofstream out(out_dir / s.file);
    if (!out) {
      throw std::runtime_error("export_curves: cannot open " + (out_dir / s.file).string());
    }
    out << "step,value\n";
    for (const StepRecord* rec : log.steps(s.stage)) {
      double value = 0.0;
      if (s.component == nullptr) {
        value = rec->total;
      } else if (std::string(s.component) == "think_len") {
        value = rec->think_len;
      } else {
        bool found = false;
        for (const auto& [name, v] : rec->components) {
          if (name == s.component) {
            value = v;
            found = true;
            break;
          }
        }
        if (!found) continue;  // component dropped by an ablation flag
      }
      out << rec->step << "," << format_double(value) << "\n";
    }
  }
}

}  // namespace duet
