#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "duet/runlog.hpp"

using namespace duet;

namespace {

std::filesystem::path temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "duet_runlog_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

StepRecord make_step(int step, const std::string& stage, double rf) {
  StepRecord rec;
  rec.step = step;
  rec.stage = stage;
  rec.components = {{"r_f", rf}, {"r_t1", 0.5 * rf}, {"r_v1", 0.25}};
  rec.weights = {{"r_f", 1.0}, {"r_t1", 1.0}, {"r_v1", 1.0}};
  rec.total = rf + 0.5 * rf + 0.25;
  rec.kl = 0.001 * step;
  rec.ratio_mean = 1.0;
  rec.think_len = 5.0;
  rec.answer_len = 4.0;
  return rec;
}

}  // namespace

TEST_CASE("runlog round-trips through its line format") {
  RunLog log;
  log.set_config({{"seed", "7"}, {"variant", "JOINT_STAGE1_2"}});
  log.append(make_step(0, "stage1", 0.125));
  log.append(make_step(1, "stage1", 0.75));
  StepRecord s2 = make_step(0, "stage2", 0.5);
  s2.components = {{"r_v2", 0.5}, {"r_c2", 0.25}};
  s2.weights = {{"r_v2", 1.0}, {"r_c2", 1.0}};
  s2.total = 0.75;
  s2.anchor_rouge = 0.875;
  s2.anchor_fallback = false;
  log.append(s2);
  EvalRecord ev;
  ev.step = 2;
  ev.stage = "final";
  ev.metrics.procedural.rouge_l = 0.625;
  ev.metrics.procedural.episodes = 10;
  log.append(ev);

  const auto path = temp_dir() / "log.jsonl";
  log.write(path);
  const RunLog loaded = RunLog::read(path);
  CHECK(loaded.config() == log.config());
  CHECK(loaded.records().size() == log.records().size());
  CHECK(loaded.serialize() == log.serialize());

  const auto steps = loaded.steps("stage2");
  REQUIRE(steps.size() == 1);
  CHECK(steps[0]->anchor_rouge == 0.875);
  CHECK(steps[0]->anchor_fallback == false);
  const auto evals = loaded.evals();
  REQUIRE(evals.size() == 1);
  CHECK(evals[0]->metrics.procedural.rouge_l == 0.625);
}

TEST_CASE("runlog read reports the offending line") {
  const auto path = temp_dir() / "broken.jsonl";
  std::ofstream out(path);
  out << R"({"type":"header","config":{}})" << "\n";
  out << "{not json\n";
  out.close();
  CHECK_THROWS_WITH_AS(RunLog::read(path), doctest::Contains("line 2"), std::runtime_error);
}

TEST_CASE("export_curves writes eight series with exact values") {
  const auto dir = temp_dir();

  // empty log: headers only
  RunLog empty;
  const auto empty_path = dir / "empty.jsonl";
  empty.write(empty_path);
  const auto empty_out = dir / "empty_curves";
  export_curves(empty_path, empty_out);
  const char* files[] = {"stage1_r_f.csv",  "stage1_r_t1.csv",     "stage1_r_v1.csv",
                         "stage1_total.csv", "stage1_think_len.csv", "stage2_r_v2.csv",
                         "stage2_r_c2.csv",  "stage2_total.csv"};
  for (const char* f : files) {
    std::ifstream in(empty_out / f);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "step,value");
    std::string rest;
    CHECK(!std::getline(in, rest));
  }

  // three stage-1 records and one stage-2 record
  RunLog log;
  log.append(make_step(0, "stage1", 1.0 / 3.0));
  log.append(make_step(1, "stage1", 0.2));
  log.append(make_step(2, "stage1", 0.7));
  StepRecord s2 = make_step(0, "stage2", 0.5);
  s2.components = {{"r_v2", 0.3}, {"r_c2", 0.9}};
  s2.weights = {{"r_v2", 1.0}, {"r_c2", 1.0}};
  s2.total = 1.2;
  log.append(s2);
  const auto path = dir / "three.jsonl";
  log.write(path);
  const auto out_dir = dir / "three_curves";
  export_curves(path, out_dir);

  std::ifstream rf(out_dir / "stage1_r_f.csv");
  std::string line;
  std::getline(rf, line);
  int rows = 0;
  const double expected[] = {1.0 / 3.0, 0.2, 0.7};
  while (std::getline(rf, line)) {
    const auto comma = line.find(',');
    CHECK(std::stoi(line.substr(0, comma)) == rows);
    // parse-back equality: %.17g round-trips doubles exactly
    CHECK(std::stod(line.substr(comma + 1)) == expected[rows]);
    ++rows;
  }
  CHECK(rows == 3);

  std::ifstream rv2(out_dir / "stage2_r_v2.csv");
  std::getline(rv2, line);
  std::getline(rv2, line);
  CHECK(std::stod(line.substr(line.find(',') + 1)) == 0.3);
}
