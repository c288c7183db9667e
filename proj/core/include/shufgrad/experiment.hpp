#ifndef SHUFGRAD_EXPERIMENT_HPP
#define SHUFGRAD_EXPERIMENT_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "shufgrad/ingest.hpp"
#include "shufgrad/optimize.hpp"
#include "shufgrad/problems.hpp"
#include "shufgrad/shuffling.hpp"
#include "shufgrad/smoothness.hpp"

namespace shufgrad {

/// Which benchmark problem to build and with what parameters. Fields not
/// used by the chosen id are ignored.
struct ProblemSpec {
  std::string id = "quartic";  // quartic | exp | phase | dro | tiny
  std::size_t dim = 0;         // 0 picks the problem default
  int kmax = 10;
  std::size_t measurements = 3000;
  double noise_std = 4.0;
  double signal_variance = 0.5;
  double init_mean = 5.0;
  std::string dataset = "synthetic";  // CSV path or "synthetic"
  std::size_t rows = 2000;
  double lambda = 0.01;
  double regularization = 0.1;
  double initial_theta = 0.1;
  std::vector<std::vector<double>> centers = {{1.0, 0.0}, {-1.0, 0.0}};
  std::optional<std::vector<double>> initial;
  std::optional<std::uint64_t> seed;  // pins the data across repetitions
};

ProblemSpec parse_problem_spec(const std::string& json_text);
std::string problem_spec_json(const ProblemSpec& spec);

/// Builds the problem for one repetition. DRO datasets are loaded or
/// synthesized once per call unless `dataset` is supplied.
std::unique_ptr<FiniteSumProblem> make_problem(const ProblemSpec& spec, std::uint64_t seed,
                                               const RegressionDataset* dataset = nullptr);

/// The dataset a DRO spec refers to, preprocessed.
RegressionDataset load_problem_dataset(const ProblemSpec& spec, std::uint64_t seed);

struct ArmSpec {
  std::string name;
  std::string algorithm = "shuffling";  // shuffling | sgd
  SchemeKind scheme = SchemeKind::RandomReshuffle;
  /// For explicit schemes: "gradient_norm" sorts components by |grad f(w0; i)|, largest first.
  std::string order = "gradient_norm";
  std::optional<double> step;              // per-update stepsize
  std::optional<std::filesystem::path> plan;  // plan file; step = eta / updates per epoch
  std::size_t batch = 1;
  std::optional<std::uint64_t> seed_key;   // defaults to the arm index
};

struct ExperimentConfig {
  ProblemSpec problem;
  std::vector<ArmSpec> arms;
  std::size_t repetitions = 100;
  std::uint64_t epochs = 100;
  std::uint64_t base_seed = 0;
  std::vector<std::string> metrics = {"objective", "grad_norm_sq", "dist_sq"};
  std::filesystem::path output = "out";

  void validate() const;
};

/// JSON object with keys problem, arms, repetitions, epochs, base_seed,
/// metrics, output. Unknown keys are ConfigErrors. Relative plan paths are
/// resolved against `base_dir`.
ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// hash64(base, r): the data seed of repetition r, shared by all arms.
std::uint64_t problem_seed(std::uint64_t base_seed, std::size_t rep);
/// hash64(base, key, r) with key = the arm's seed_key or its index.
std::uint64_t run_seed(std::uint64_t base_seed, std::uint64_t arm_key, std::size_t rep);

struct RunOutcome {
  std::size_t arm = 0;
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  TrajectoryRecord record;  // rows up to the last finite epoch
  std::optional<std::uint64_t> diverged_epoch;
  std::string error;
};

struct ExperimentResult {
  std::vector<RunOutcome> runs;  // ordered by (arm, rep)
  std::string raw_csv;
  std::string aggregate_csv;
  bool diverged() const noexcept;
};

struct ExperimentOptions {
  std::size_t jobs = 0;  // 0 = hardware concurrency
  bool write_files = true;
  /// Called from worker threads with (arm, rep, t, w_0^{(t)}).
  std::function<void(std::size_t, std::size_t, std::uint64_t, const Vector&)> on_epoch_start;
};

ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentOptions& options = {});

inline constexpr const char* kRawHeader = "arm,rep,epoch,objective,grad_norm_sq,dist_sq,evals,wall_ms";
inline constexpr const char* kAggregateHeader = "arm,epoch,metric,mean,p05,p95,count";

void write_raw_csv(const ExperimentConfig& config, const std::vector<RunOutcome>& runs,
                   std::ostream& out);

/// Per (arm, epoch, metric): mean, 5% and 95% percentiles and count. Epochs
/// where fewer runs than the repetition count (the number of distinct rep
/// ids in the file) report values have empty statistics. Metrics with no
/// values anywhere are omitted.
std::string aggregate_raw_csv(std::istream& raw);

/// Exit codes shared by the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2, kExitDiverged = 3 };

/// Inputs for the plan pipeline beyond the problem itself.
struct PlanRequest {
  Theorem theorem = Theorem::NonconvexReshuffle;
  double epsilon = 0.1;
  std::optional<double> delta;
  std::optional<std::uint64_t> target_epochs;
  std::optional<std::string> ell;  // overrides the problem's declared ell
  std::optional<double> f_star;    // lower bound when the optimum is unknown
  std::optional<double> A;
  std::optional<double> sigma;
  std::size_t sublevel_budget = 10000;
  std::uint64_t seed = 0;
};

/// Derives problem statistics (fitting A and sigma when not given) and plans.
StepsizePlan plan_for_problem(const FiniteSumProblem& problem, const PlanRequest& request);

/// Problem statistics the plan pipeline would use.
ProblemStats problem_stats(const FiniteSumProblem& problem, const PlanRequest& request);

struct CheckOptions {
  std::uint64_t seed = 0;
  std::size_t points = 10;
  std::optional<ProblemSpec> problem;  // ell-envelope target; quartic by default
  std::optional<std::string> ell;      // ell-envelope override
};

/// Runs one diagnostic suite (gradients, variance, ell-envelope,
/// permutation-oracle), printing one line per check. Returns true when all pass.
bool run_check_suite(const std::string& suite, const CheckOptions& options, std::ostream& out);

}  // namespace shufgrad

#endif  // SHUFGRAD_EXPERIMENT_HPP
