#include "shufgrad/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "shufgrad/error.hpp"
#include "shufgrad/random.hpp"

namespace shufgrad {

namespace {

constexpr std::uint64_t kProbeTag = 0x50524F4245ULL;  // "PROBE"

std::vector<double> variance_grid() {
  std::vector<double> grid{0.0};
  for (int k = -20; k <= 20; ++k) grid.push_back(std::ldexp(1.0, k));
  return grid;
}

double sigma2_for(double A, std::span<const VarianceSample> samples) {
  double s = 0.0;
  for (const auto& p : samples) s = std::max(s, p.variance - A * p.grad_norm_sq);
  return s;
}

Vector random_unit(std::size_t dim, std::uint64_t key) {
  CounterRng rng(key);
  Vector v(static_cast<Eigen::Index>(dim));
  for (auto& x : v) x = 2.0 * rng.uniform() - 1.0;
  const double norm = v.norm();
  if (norm == 0.0) v[0] = 1.0;
  return v / (norm == 0.0 ? 1.0 : norm);
}

}  // namespace

VarianceSample variance_sample(const FiniteSumProblem& problem, const Vector& w) {
  const std::size_t n = problem.size();
  std::vector<Vector> grads(n);
  Vector mean = Vector::Zero(w.size());
  for (std::size_t i = 0; i < n; ++i) {
    problem.component_gradient(w, i, grads[i]);
    mean += grads[i];
  }
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const auto& g : grads) var += (g - mean).squaredNorm();
  if (!std::isfinite(var)) throw DomainError("variance_sample: non-finite gradients");
  return {mean.squaredNorm(), var / static_cast<double>(n)};
}

VarianceFit fit_variance_constants(std::span<const VarianceSample> samples) {
  if (samples.empty()) throw UsageError("fit_variance_constants: no samples");
  const auto grid = variance_grid();
  double best = std::numeric_limits<double>::infinity();
  for (double A : grid) best = std::min(best, sigma2_for(A, samples));

  VarianceFit fit;
  fit.points = samples.size();
  for (double A : grid) {
    const double s2 = sigma2_for(A, samples);
    if (s2 <= 1.01 * best) {
      fit.A_hat = A;
      fit.sigma2_hat = s2;
      break;
    }
  }
  // v - A g rounds differently from A g + sigma^2; bump sigma^2 until every
  // sample satisfies the inequality as evaluated in floating point.
  for (int guard = 0; guard < 64; ++guard) {
    bool ok = true;
    for (const auto& p : samples)
      if (p.variance > fit.A_hat * p.grad_norm_sq + fit.sigma2_hat) ok = false;
    if (ok) break;
    fit.sigma2_hat = std::nextafter(fit.sigma2_hat, std::numeric_limits<double>::infinity());
  }
  fit.max_violation = -std::numeric_limits<double>::infinity();
  for (const auto& p : samples)
    fit.max_violation = std::max(fit.max_violation, p.variance - fit.A_hat * p.grad_norm_sq - fit.sigma2_hat);
  return fit;
}

VarianceFit estimate_variance_constants(const FiniteSumProblem& problem, std::span<const Vector> points) {
  if (points.empty()) throw UsageError("estimate_variance_constants: empty sample set");
  if (points.size() < 2) throw UsageError("estimate_variance_constants: need at least two points");
  std::vector<VarianceSample> samples;
  samples.reserve(points.size());
  for (const auto& w : points) samples.push_back(variance_sample(problem, w));
  return fit_variance_constants(samples);
}

double component_gradient_rms(const FiniteSumProblem& problem, const Vector& w) {
  Vector g;
  double sum = 0.0;
  for (std::size_t i = 0; i < problem.size(); ++i) {
    problem.component_gradient(w, i, g);
    sum += g.squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(problem.size()));
}

ProbeResult probe_point(const FiniteSumProblem& problem, const Vector& w_in,
                        const std::optional<EllFunction>& ell, const ProbeOptions& options,
                        std::uint64_t stream) {
  if (options.iterations < 2) throw UsageError("probe: need at least two power iterations");
  Vector w = w_in;
  if (options.perturbation > 0.0) {
    CounterRng rng(hash64({options.seed, kProbeTag, stream, 1}));
    for (auto& x : w) x += options.perturbation * (2.0 * rng.uniform() - 1.0);
  }
  const double h = options.relative_step * (1.0 + w.norm());
  Vector grad = problem.full_gradient(w);
  Vector gp(w.size());
  Vector gm(w.size());
  const auto hvp = [&](const Vector& v) {
    problem.full_gradient(w + h * v, gp);
    problem.full_gradient(w - h * v, gm);
    return Vector((gp - gm) / (2.0 * h));
  };

  ProbeResult r;
  r.grad_norm = grad.norm();
  Vector v = random_unit(problem.dim(), hash64({options.seed, kProbeTag, stream}));
  double lambda = 0.0;
  double previous = 0.0;
  for (int it = 0; it < options.iterations; ++it) {
    const Vector hv = hvp(v);
    previous = lambda;
    lambda = hv.norm();
    if (lambda == 0.0) break;
    v = hv / lambda;
  }
  r.hessian_estimate = lambda;
  r.flagged = lambda > 0.0 && std::fabs(lambda - previous) > options.stagnation * lambda;
  if (ell) {
    r.ell_bound = (*ell)(r.grad_norm);
    r.violated = !r.flagged && r.hessian_estimate > r.ell_bound * (1.0 + options.tolerance);
  }
  return r;
}

ProbeReport probe_ell_envelope(const FiniteSumProblem& problem, std::span<const Vector> points,
                               const std::optional<EllFunction>& ell, const ProbeOptions& options) {
  ProbeReport report;
  std::uint64_t stream = 0;
  for (const auto& w : points) {
    report.probes.push_back(probe_point(problem, w, ell, options, stream++));
    const auto& p = report.probes.back();
    if (p.flagged) ++report.flagged;
    if (p.violated) ++report.violations;
  }
  return report;
}

void write_probe_csv(const ProbeReport& report, std::ostream& out) {
  out << "grad_norm,hessian_estimate,ell_bound,violated\n";
  char buf[128];
  for (const auto& p : report.probes) {
    if (p.flagged) continue;
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%d\n", p.grad_norm, p.hessian_estimate,
                  p.ell_bound, p.violated ? 1 : 0);
    out << buf;
  }
}

Matrix finite_difference_hessian(const FiniteSumProblem& problem, const Vector& w, double h) {
  const auto d = w.size();
  Matrix H(d, d);
  Vector e = Vector::Zero(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    e[j] = h;
    H.col(j) = (problem.full_gradient(w + e) - problem.full_gradient(w - e)) / (2.0 * h);
    e[j] = 0.0;
  }
  return 0.5 * (H + H.transpose());
}

double brute_force_partial_average_variance(std::span<const Vector> X, std::size_t k) {
  const std::size_t n = X.size();
  if (n < 2 || n > 8) throw UsageError("brute force oracle supports 2 <= n <= 8, got " + std::to_string(n));
  if (k < 1 || k > n) throw UsageError("brute force oracle needs 1 <= k <= n");
  Vector mean = Vector::Zero(X[0].size());
  for (const auto& x : X) {
    if (x.size() != mean.size()) throw UsageError("brute force oracle: vectors differ in dimension");
    mean += x;
  }
  mean /= static_cast<double>(n);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double total = 0.0;
  std::size_t count = 0;
  Vector partial(mean.size());
  do {
    partial.setZero();
    for (std::size_t j = 0; j < k; ++j) partial += X[perm[j]];
    total += (partial / static_cast<double>(k) - mean).squaredNorm();
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return total / static_cast<double>(count);
}

boost::rational<std::int64_t> brute_force_partial_average_variance(std::span<const std::int64_t> X,
                                                                    std::size_t k) {
  const std::size_t n = X.size();
  if (n < 2 || n > 8) throw UsageError("brute force oracle supports 2 <= n <= 8, got " + std::to_string(n));
  if (k < 1 || k > n) throw UsageError("brute force oracle needs 1 <= k <= n");
  const std::int64_t S = std::accumulate(X.begin(), X.end(), std::int64_t{0});
  const auto nn = static_cast<std::int64_t>(n);
  const auto kk = static_cast<std::int64_t>(k);

  // (1/k) sum - S/n = (n * sum - k S) / (k n); accumulate the squared numerators.
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::int64_t total = 0;
  std::int64_t count = 0;
  do {
    std::int64_t partial = 0;
    for (std::size_t j = 0; j < k; ++j) partial += X[perm[j]];
    const std::int64_t num = nn * partial - kk * S;
    total += num * num;
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return boost::rational<std::int64_t>(total, count * kk * kk * nn * nn);
}

double gradient_relative_error(const FiniteSumProblem& problem, const Vector& w,
                               std::optional<std::size_t> component, double h) {
  const Vector g = component ? problem.component_gradient(w, *component) : problem.full_gradient(w);
  const auto value = [&](const Vector& x) {
    return component ? problem.component_value(x, *component) : problem.full_value(x);
  };
  Vector fd(w.size());
  Vector x = w;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    x[j] = w[j] + h;
    const double up = value(x);
    x[j] = w[j] - h;
    const double down = value(x);
    x[j] = w[j];
    fd[j] = (up - down) / (2.0 * h);
  }
  return (fd - g).norm() / std::max(1.0, g.norm());
}

SumStructureError sum_structure_error(const FiniteSumProblem& problem, const Vector& w) {
  const std::size_t n = problem.size();
  double value_sum = 0.0;
  double value_abs = 0.0;
  double grad_abs = 0.0;
  Vector grad_sum = Vector::Zero(w.size());
  Vector g;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = problem.component_value(w, i);
    value_sum += v;
    value_abs += std::fabs(v);
    problem.component_gradient(w, i, g);
    grad_sum += g;
    grad_abs += g.norm();
  }
  const double nd = static_cast<double>(n);
  SumStructureError err;
  const double value_scale = std::max(value_abs / nd, std::numeric_limits<double>::min());
  const double grad_scale = std::max(grad_abs / nd, std::numeric_limits<double>::min());
  err.value = std::fabs(problem.full_value(w) - value_sum / nd) / value_scale;
  err.gradient = (problem.full_gradient(w) - grad_sum / nd).norm() / grad_scale;
  return err;
}

double lemma_component_bound_excess(const FiniteSumProblem& problem, const Vector& w, double A,
                                    double sigma) {
  const double n = static_cast<double>(problem.size());
  double worst = 0.0;
  Vector g;
  for (std::size_t i = 0; i < problem.size(); ++i) {
    problem.component_gradient(w, i, g);
    worst = std::max(worst, g.norm());
  }
  const double bound = std::sqrt(2.0 * (1.0 + n * A)) * problem.full_gradient(w).norm() +
                       std::sqrt(2.0 * n) * sigma;
  return worst - bound;
}

double lemma_gradient_gap_excess(const FiniteSumProblem& problem, const Vector& w,
                                 const EllFunction& ell, double f_star) {
  const double gn = problem.full_gradient(w).norm();
  return gn * gn - 2.0 * ell(2.0 * gn) * (problem.full_value(w) - f_star);
}

void InequalityTally::add(std::uint64_t epoch, double excess) {
  ++checked;
  worst_excess = std::max(worst_excess, excess);
  if (!(excess <= slack)) {
    ++violations;
    if (!first_violation) first_violation = epoch;
  }
}

}  // namespace shufgrad
