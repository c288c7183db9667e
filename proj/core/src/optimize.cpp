#include "shufgrad/optimize.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "shufgrad/error.hpp"
#include "shufgrad/random.hpp"

namespace shufgrad {

namespace {

constexpr char kMagic[8] = {'S', 'H', 'G', 'R', 'A', 'D', 'v', '1'};
constexpr std::uint64_t kSgdTag = 0x534744;  // "SGD"

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_f64(std::ostream& out, const Vector& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(v.size())));
}

std::uint64_t get_u64(std::istream& in, const std::string& what) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("checkpoint truncated at " + what);
  return v;
}

Vector get_f64(std::istream& in, std::uint64_t dim, const std::string& what) {
  Vector v(static_cast<Eigen::Index>(dim));
  if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * dim)))
    throw FormatError("checkpoint truncated at " + what);
  return v;
}

/// Evaluates metrics, drives the callbacks and checkpoints around an update rule.
class Runner {
 public:
  Runner(const FiniteSumProblem& problem, const RunConfig& config, std::string algorithm,
         std::uint64_t scheme_seed)
      : problem_(problem), config_(config), scheme_seed_(scheme_seed) {
    config.validate();
    record_.algorithm = std::move(algorithm);
    record_.n = problem.size();
    track_distance_ = config.record.distance && problem.optimum_point().has_value();
    start_ = std::chrono::steady_clock::now();
  }

  /// `epoch(t, w)` runs one epoch in place; `replay(t, w)` reruns it from
  /// the same start, returning the first inner step with a non-finite iterate.
  template <class Epoch, class Replay>
  TrajectoryRecord run(Epoch&& epoch, Replay&& replay) {
    Vector w = problem_.initial_point();
    std::uint64_t first = 1;
    if (config_.resume) {
      const auto& cp = *config_.resume;
      if (static_cast<std::size_t>(cp.point.size()) != problem_.dim())
        throw UsageError("resume checkpoint has dimension " + std::to_string(cp.point.size()));
      w = cp.point;
      first = cp.epoch + 1;
      if (cp.averaged > 0) {
        sum_ = cp.average * static_cast<double>(cp.averaged);
        record_.averaged = cp.averaged;
      }
    } else if (!w.allFinite()) {
      throw DomainError(problem_.name() + ": initial point is not finite");
    }
    record_.initial = measure(first - 1, w);
    double last_objective = record_.initial.objective.value_or(std::numeric_limits<double>::quiet_NaN());

    Vector start;
    for (std::uint64_t t = first; t <= config_.epochs; ++t) {
      visit(t, w);
      start = w;
      epoch(t, w);
      if (!w.allFinite()) {
        const std::size_t step = replay(t, start);
        return diverge(t, step, last_objective, start,
                       record_.algorithm + " diverged in epoch " + std::to_string(t) +
                           " at inner step " + std::to_string(step));
      }
      EpochRow row = measure(t, w);
      if (row.objective && !std::isfinite(*row.objective))
        return diverge(t, problem_.size(), last_objective, start,
                       record_.algorithm + ": objective overflowed after epoch " + std::to_string(t));
      if (row.objective) last_objective = *row.objective;
      record_.rows.push_back(row);
      if (config_.checkpoint_path && config_.checkpoint_every > 0 && t % config_.checkpoint_every == 0)
        save(t, w);
    }
    visit(config_.epochs + 1, w);
    record_.final_point = w;
    if (config_.record.average && record_.averaged > 0)
      record_.average = sum_ / static_cast<double>(record_.averaged);
    return std::move(record_);
  }

 private:
  TrajectoryRecord diverge(std::uint64_t t, std::size_t step, double last_objective,
                           const Vector& last_finite, const std::string& message) {
    if (config_.throw_on_divergence) throw DivergenceError(t, step, last_objective, message);
    record_.divergence = DivergenceInfo{t, step, last_objective, message};
    record_.final_point = last_finite;
    return std::move(record_);
  }

  void visit(std::uint64_t t, const Vector& w) {
    if (config_.on_epoch_start) config_.on_epoch_start(t, w);
    // Epoch-start iterates w_0^{(1..T)}; the final point is not part of the mean.
    if (config_.record.average && t <= config_.epochs) {
      if (sum_.size() == 0) sum_ = Vector::Zero(w.size());
      sum_ += w;
      ++record_.averaged;
    }
  }

  EpochRow measure(std::uint64_t t, const Vector& w) {
    EpochRow row;
    row.epoch = t;
    row.evals = t * problem_.size();
    if (config_.record.objective) row.objective = problem_.full_value(w);
    if (config_.record.grad_norm_sq) {
      problem_.full_gradient(w, grad_);
      row.grad_norm_sq = grad_.squaredNorm();
    }
    if (track_distance_) row.dist_sq = problem_.distance_sq_to_optimum(w);
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    return row;
  }

  void save(std::uint64_t t, const Vector& w) const {
    Checkpoint cp;
    cp.point = w;
    cp.epoch = t;
    cp.scheme_seed = scheme_seed_;
    cp.sgd_seed = config_.seed;
    cp.averaged = record_.averaged;
    cp.average = record_.averaged > 0 ? Vector(sum_ / static_cast<double>(record_.averaged))
                                      : Vector::Zero(w.size());
    write_checkpoint(*config_.checkpoint_path, cp);
  }

  const FiniteSumProblem& problem_;
  const RunConfig& config_;
  std::uint64_t scheme_seed_;
  TrajectoryRecord record_;
  bool track_distance_ = false;
  Vector sum_;
  Vector grad_;
  std::chrono::steady_clock::time_point start_;
};

/// One batched update per group of `batch` consecutive indices.
template <class IndexAt>
std::size_t batched_epoch(const FiniteSumProblem& problem, Vector& w, std::size_t count,
                          std::size_t batch, double step, IndexAt&& index_at, bool stop_on_nonfinite) {
  const auto d = w.size();
  Vector g(d);
  Vector acc(d);
  std::size_t update = 0;
  for (std::size_t lo = 0; lo < count; lo += batch) {
    const std::size_t hi = std::min(count, lo + batch);
    acc.setZero();
    for (std::size_t j = lo; j < hi; ++j) {
      problem.component_gradient(w, index_at(j), g);
      acc += g;
    }
    w.noalias() -= (step / static_cast<double>(hi - lo)) * acc;
    ++update;
    if (stop_on_nonfinite && !w.allFinite()) return update;
  }
  return update;
}

}  // namespace

void RunConfig::validate() const {
  if (!std::isfinite(step) || step < 0.0) throw UsageError("run config: step must be finite and >= 0");
  if (epochs == 0) throw UsageError("run config: epochs must be >= 1");
  if (batch == 0) throw UsageError("run config: batch size must be >= 1");
  if (resume && resume->epoch >= epochs)
    throw UsageError("run config: checkpoint epoch " + std::to_string(resume->epoch) +
                     " is not before the final epoch");
}

TrajectoryRecord run_shuffling(const FiniteSumProblem& problem, const Scheme& scheme,
                               const RunConfig& config) {
  const std::size_t n = problem.size();
  if (scheme.size() != n)
    throw UsageError("scheme is for " + std::to_string(scheme.size()) + " components, problem has " +
                     std::to_string(n));
  Runner runner(problem, config, "shuffling:" + std::string(to_string(scheme.kind())), scheme.seed());
  std::vector<std::size_t> perm;
  Vector scratch(static_cast<Eigen::Index>(problem.dim()));
  const double step = config.step;

  auto epoch = [&](std::uint64_t t, Vector& w) {
    scheme.permutation_for_epoch(t, perm);
    if (config.batch == 1) {
      for (std::size_t i : perm) problem.descend_component(w, i, step, scratch);
    } else {
      batched_epoch(problem, w, n, config.batch, step, [&](std::size_t j) { return perm[j]; }, false);
    }
  };
  auto replay = [&](std::uint64_t t, Vector w) -> std::size_t {
    scheme.permutation_for_epoch(t, perm);
    if (config.batch == 1) {
      for (std::size_t j = 0; j < n; ++j) {
        problem.descend_component(w, perm[j], step, scratch);
        if (!w.allFinite()) return j + 1;
      }
      return n;
    }
    return batched_epoch(problem, w, n, config.batch, step, [&](std::size_t j) { return perm[j]; }, true);
  };
  return runner.run(epoch, replay);
}

TrajectoryRecord run_sgd(const FiniteSumProblem& problem, const RunConfig& config) {
  const std::size_t n = problem.size();
  Runner runner(problem, config, "sgd", 0);
  Vector scratch(static_cast<Eigen::Index>(problem.dim()));
  const double step = config.step;
  std::vector<std::size_t> picks(n);

  // Each epoch draws from its own counter stream, so a resumed run replays
  // exactly the samples an uninterrupted run would have used.
  auto draw = [&](std::uint64_t t) {
    CounterRng rng(hash64({config.seed, kSgdTag, t}));
    for (auto& p : picks) p = static_cast<std::size_t>(rng.below(n));
  };
  auto epoch = [&](std::uint64_t t, Vector& w) {
    draw(t);
    if (config.batch == 1) {
      for (std::size_t i : picks) problem.descend_component(w, i, step, scratch);
    } else {
      batched_epoch(problem, w, n, config.batch, step, [&](std::size_t j) { return picks[j]; }, false);
    }
  };
  auto replay = [&](std::uint64_t t, Vector w) -> std::size_t {
    draw(t);
    if (config.batch == 1) {
      for (std::size_t j = 0; j < n; ++j) {
        problem.descend_component(w, picks[j], step, scratch);
        if (!w.allFinite()) return j + 1;
      }
      return n;
    }
    return batched_epoch(problem, w, n, config.batch, step, [&](std::size_t j) { return picks[j]; }, true);
  };
  return runner.run(epoch, replay);
}

Vector averaged_iterate(const TrajectoryRecord& record) {
  if (!record.average) throw UsageError("averaged_iterate: running average was not recorded");
  return *record.average;
}

std::pair<std::uint64_t, double> best_iterate(const TrajectoryRecord& record) {
  if (record.rows.empty()) throw UsageError("best_iterate: empty record");
  std::optional<std::pair<std::uint64_t, double>> best;
  for (const auto& row : record.rows) {
    if (!row.objective) throw UsageError("best_iterate: objective was not recorded");
    if (!best || *row.objective < best->second) best = std::make_pair(row.epoch, *row.objective);
  }
  return *best;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& cp) {
  if (cp.average.size() != 0 && cp.average.size() != cp.point.size())
    throw UsageError("checkpoint: average and point differ in dimension");
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write checkpoint " + tmp);
    out.write(kMagic, sizeof kMagic);
    put_u64(out, static_cast<std::uint64_t>(cp.point.size()));
    put_f64(out, cp.point);
    put_u64(out, cp.epoch);
    put_u64(out, cp.scheme_seed);
    put_u64(out, cp.sgd_seed);
    put_u64(out, cp.averaged);
    put_f64(out, cp.average.size() != 0 ? cp.average : Vector::Zero(cp.point.size()));
    if (!out) throw FormatError("failed writing checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw FormatError(path.string() + ": not a shufgrad checkpoint");
  const std::uint64_t dim = get_u64(in, "dimension");
  if (dim == 0 || dim > (std::uint64_t{1} << 32)) throw FormatError(path.string() + ": implausible dimension");
  Checkpoint cp;
  cp.point = get_f64(in, dim, "iterate");
  cp.epoch = get_u64(in, "epoch");
  cp.scheme_seed = get_u64(in, "scheme seed");
  cp.sgd_seed = get_u64(in, "sgd seed");
  cp.averaged = get_u64(in, "average count");
  cp.average = get_f64(in, dim, "average");
  return cp;
}

}  // namespace shufgrad
