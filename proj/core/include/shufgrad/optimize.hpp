#ifndef SHUFGRAD_OPTIMIZE_HPP
#define SHUFGRAD_OPTIMIZE_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shufgrad/problems.hpp"
#include "shufgrad/shuffling.hpp"

namespace shufgrad {

struct RecordOptions {
  bool objective = true;
  bool grad_norm_sq = true;
  bool distance = true;  // only when the problem knows its optimum
  bool average = true;   // running mean of epoch-start iterates
};

/// Saved optimizer state at an epoch boundary.
struct Checkpoint {
  Vector point;                 // iterate after `epoch` epochs
  std::uint64_t epoch = 0;
  std::uint64_t scheme_seed = 0;
  std::uint64_t sgd_seed = 0;
  std::uint64_t averaged = 0;   // epoch-start iterates folded into `average`
  Vector average;
};

/// Flat little-endian file: "SHGRADv1", u64 dim, dim f64 iterate, u64 epoch,
/// u64 scheme seed, u64 sgd seed, u64 averaged count, dim f64 running average.
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& cp);
Checkpoint read_checkpoint(const std::filesystem::path& path);

struct RunConfig {
  /// Stepsize of one update. With batch 1 this is eta_t / n; with batch b it
  /// is eta_t / ceil(n / b) and each update uses the batch-mean gradient.
  double step = 0.0;
  std::uint64_t epochs = 1;
  std::size_t batch = 1;
  std::uint64_t seed = 0;  // sampling stream for run_sgd
  RecordOptions record;

  /// Called with (t, w) at every recorded point w = w_0^{(t)}, t = 1..T+1.
  std::function<void(std::uint64_t, const Vector&)> on_epoch_start;

  std::optional<std::filesystem::path> checkpoint_path;
  std::uint64_t checkpoint_every = 0;  // epochs; 0 disables
  std::optional<Checkpoint> resume;

  /// When false, a non-finite iterate ends the run early and is reported in
  /// TrajectoryRecord::divergence instead of throwing DivergenceError.
  bool throw_on_divergence = true;

  void validate() const;
};

struct EpochRow {
  std::uint64_t epoch = 0;
  std::optional<double> objective;
  std::optional<double> grad_norm_sq;
  std::optional<double> dist_sq;
  std::uint64_t evals = 0;  // cumulative component-gradient evaluations
  double wall_ms = 0.0;     // since the start of the run
};

struct DivergenceInfo {
  std::uint64_t epoch = 0;
  std::size_t step = 0;  // 1-based inner step (update) that left the finite range
  double last_finite_objective = 0.0;
  std::string message;
};

/// Row t holds the metrics at the iterate reached after epoch t, which is
/// the start point w_0^{(t+1)} of the next epoch. `initial` holds epoch 0.
struct TrajectoryRecord {
  std::string algorithm;
  std::size_t n = 0;
  EpochRow initial;
  std::vector<EpochRow> rows;
  Vector final_point;
  std::optional<Vector> average;
  std::uint64_t averaged = 0;
  std::optional<DivergenceInfo> divergence;
};

TrajectoryRecord run_shuffling(const FiniteSumProblem& problem, const Scheme& scheme,
                               const RunConfig& config);

/// i.i.d. uniform component sampling with metrics every n samples, so its
/// epochs match the shuffling runs' gradient-evaluation budget.
TrajectoryRecord run_sgd(const FiniteSumProblem& problem, const RunConfig& config);

/// (1/T) sum_{t=1..T} w_0^{(t)}.
Vector averaged_iterate(const TrajectoryRecord& record);

/// (epoch, objective) of the smallest recorded objective; earliest on ties.
std::pair<std::uint64_t, double> best_iterate(const TrajectoryRecord& record);

}  // namespace shufgrad

#endif  // SHUFGRAD_OPTIMIZE_HPP
