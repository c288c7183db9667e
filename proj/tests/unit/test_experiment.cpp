#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "shufgrad/error.hpp"
#include "shufgrad/experiment.hpp"
#include "shufgrad/random.hpp"

using namespace shufgrad;

namespace {

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

/// Raw CSV with the wall-clock column removed.
std::string without_wall(const std::string& raw) {
  std::string out;
  for (const auto& line : lines_of(raw)) out += line.substr(0, line.rfind(',')) + '\n';
  return out;
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.problem.id = "quartic";
  c.problem.dim = 4;
  c.problem.kmax = 2;
  c.repetitions = 3;
  c.epochs = 5;
  c.base_seed = 17;
  ArmSpec sgd{.name = "sgd", .algorithm = "sgd", .step = 0.01};
  ArmSpec rr{.name = "rr", .scheme = SchemeKind::RandomReshuffle, .step = 0.01};
  ArmSpec so{.name = "so", .scheme = SchemeKind::ShuffleOnce, .step = 0.01};
  c.arms = {sgd, rr, so};
  c.output = std::filesystem::temp_directory_path() / "shufgrad_test_experiment";
  return c;
}

}  // namespace

TEST_CASE("seed derivation") {
  CHECK(run_seed(5, 1, 2) == hash64({5, 1, 2}));
  CHECK(problem_seed(5, 2) == hash64({5, 2}));
  CHECK(run_seed(5, 0, 2) != run_seed(5, 1, 2));
}

TEST_CASE("raw csv shape, accounting and aggregation purity") {
  auto cfg = small_config();
  const auto result = run_experiment(cfg, {.jobs = 2});
  const auto raw = lines_of(result.raw_csv);
  REQUIRE_FALSE(raw.empty());
  CHECK(raw.front() == kRawHeader);
  CHECK(raw.size() == 1 + cfg.arms.size() * cfg.repetitions * cfg.epochs);
  for (std::size_t i = 1; i < raw.size(); ++i) {
    const auto cells = split(raw[i]);
    REQUIRE(cells.size() == 8);
    CHECK(std::stoull(cells[6]) == std::stoull(cells[2]) * 4 * 5);
    CHECK(cells[5].empty() == false);  // the quartic optimum is known
  }
  std::istringstream again(result.raw_csv);
  CHECK(aggregate_raw_csv(again) == result.aggregate_csv);
  CHECK(lines_of(result.aggregate_csv).front() == kAggregateHeader);

  std::ifstream file(cfg.output / "raw.csv");
  std::stringstream on_disk;
  on_disk << file.rdbuf();
  CHECK(on_disk.str() == result.raw_csv);
  std::filesystem::remove_all(cfg.output);
}

TEST_CASE("aggregate statistics are ordered and counted") {
  auto cfg = small_config();
  const auto result = run_experiment(cfg, {.write_files = false});
  for (const auto& line : lines_of(result.aggregate_csv)) {
    if (line == kAggregateHeader) continue;
    const auto cells = split(line);
    REQUIRE(cells.size() == 7);
    CHECK(std::stod(cells[4]) <= std::stod(cells[5]));
    CHECK(cells[6] == "3");
  }
}

TEST_CASE("single repetition aggregates to the run itself") {
  auto cfg = small_config();
  cfg.repetitions = 1;
  const auto result = run_experiment(cfg, {.write_files = false});
  for (const auto& line : lines_of(result.aggregate_csv)) {
    if (line == kAggregateHeader) continue;
    const auto cells = split(line);
    CHECK(cells[3] == cells[4]);
    CHECK(cells[3] == cells[5]);
  }
}

TEST_CASE("results do not depend on scheduling") {
  auto cfg = small_config();
  const auto one = run_experiment(cfg, {.jobs = 1, .write_files = false});
  const auto many = run_experiment(cfg, {.jobs = 4, .write_files = false});
  CHECK(without_wall(one.raw_csv) == without_wall(many.raw_csv));
  CHECK(one.runs.size() == 9);
  for (std::size_t i = 0; i < one.runs.size(); ++i) {
    CHECK(one.runs[i].arm == i / 3);
    CHECK(one.runs[i].rep == i % 3);
  }
}

TEST_CASE("identical arms produce identical aggregates") {
  auto cfg = small_config();
  ArmSpec a{.name = "a", .scheme = SchemeKind::RandomReshuffle, .step = 0.01, .seed_key = 9};
  ArmSpec b = a;
  b.name = "b";
  cfg.arms = {a, b};
  const auto result = run_experiment(cfg, {.write_files = false});
  std::string rows_a;
  std::string rows_b;
  for (const auto& line : lines_of(result.aggregate_csv)) {
    if (line.rfind("a,", 0) == 0) rows_a += line.substr(2) + '\n';
    if (line.rfind("b,", 0) == 0) rows_b += line.substr(2) + '\n';
  }
  CHECK_FALSE(rows_a.empty());
  CHECK(rows_a == rows_b);
}

TEST_CASE("diverging runs are reported and truncated") {
  auto cfg = small_config();
  cfg.arms = {ArmSpec{.name = "wild", .scheme = SchemeKind::Fixed, .step = 50.0}};
  cfg.repetitions = 2;
  const auto result = run_experiment(cfg, {.write_files = false});
  CHECK(result.diverged());
  for (const auto& run : result.runs) CHECK(run.diverged_epoch.has_value());
  CHECK(lines_of(result.raw_csv).size() < 1 + 2 * 5);
}

TEST_CASE("config parsing") {
  const auto cfg = parse_experiment_config(R"({
    "problem": {"id": "tiny", "centers": [[1, 0], [-1, 0]], "initial": [2, 2]},
    "arms": [{"name": "rr", "scheme": "random_reshuffle", "step": 0.1},
             {"name": "sgd", "algorithm": "sgd", "step": 0.1}],
    "repetitions": 2, "epochs": 3, "base_seed": 4, "output": "x"})");
  CHECK(cfg.problem.id == "tiny");
  CHECK(cfg.arms.size() == 2);
  CHECK(cfg.repetitions == 2);
  CHECK(cfg.output == "x");

  CHECK_THROWS_AS(parse_experiment_config(R"({"arms": [], "colour": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"arms": [{"name": "a", "step": 0.1}, {"name": "a", "step": 0.1}]})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"arms": [{"name": "a", "step": 0.1}], "repetitions": 0})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"arms": [{"name": "a"}]})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("{not json"), FormatError);
}

TEST_CASE("arms can use a plan file") {
  const auto dir = std::filesystem::temp_directory_path() / "shufgrad_test_plan";
  std::filesystem::create_directories(dir);
  {
    std::ofstream plan(dir / "plan.txt");
    plan << "theorem = 2\neta = 0.4\nepochs = 3\nn = 2\n";
  }
  {
    std::ofstream cfg(dir / "config.json");
    cfg << R"({"problem": {"id": "tiny"}, "arms": [{"name": "p", "scheme": "fixed", "plan": "plan.txt"}],
              "repetitions": 1, "epochs": 1, "output": "out"})";
  }
  const auto cfg = load_experiment_config(dir / "config.json");
  REQUIRE(cfg.arms.front().plan.has_value());
  const auto result = run_experiment(cfg, {.write_files = false});
  // eta 0.4 over n = 2 components: each update uses step 0.2.
  REQUIRE(result.runs.front().record.rows.size() == 1);
  const auto problem = make_problem(cfg.problem, problem_seed(cfg.base_seed, 0));
  RunConfig manual;
  manual.step = 0.2;
  manual.epochs = 1;
  CHECK(result.runs.front().record.final_point == run_shuffling(*problem, Scheme::fixed(2), manual).final_point);
  std::filesystem::remove_all(dir);
}

TEST_CASE("problem spec round trip") {
  ProblemSpec spec;
  spec.id = "phase";
  spec.measurements = 70;
  spec.dim = 7;
  spec.seed = 12;
  const auto back = parse_problem_spec(problem_spec_json(spec));
  CHECK(back.id == "phase");
  CHECK(back.measurements == 70);
  CHECK(back.dim == 7);
  CHECK(back.seed == 12u);
  const auto p = make_problem(back, 0);
  CHECK(p->size() == 70);
  CHECK(p->dim() == 7);
  CHECK_THROWS_AS(make_problem(ProblemSpec{.id = "nope"}, 0), ConfigError);
}

TEST_CASE("check suites pass on the built-in problems") {
  std::ostringstream out;
  CHECK(run_check_suite("permutation-oracle", {}, out));
  CHECK(run_check_suite("gradients", {.points = 3}, out));
  CHECK_FALSE(run_check_suite("ell-envelope", {.points = 3, .ell = "const:0.1"}, out));
  CHECK_THROWS_AS(run_check_suite("everything", {}, out), UsageError);
}
