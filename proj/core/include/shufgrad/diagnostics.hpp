#ifndef SHUFGRAD_DIAGNOSTICS_HPP
#define SHUFGRAD_DIAGNOSTICS_HPP

#include <boost/rational.hpp>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "shufgrad/ell.hpp"
#include "shufgrad/problems.hpp"

namespace shufgrad {

/// (|grad F(w)|^2, (1/n) sum_i |grad f(w;i) - grad F(w)|^2) at one point.
struct VarianceSample {
  double grad_norm_sq = 0.0;
  double variance = 0.0;
};

struct VarianceFit {
  double A_hat = 0.0;
  double sigma2_hat = 0.0;
  std::size_t points = 0;
  /// max_s (v_s - A g_s - sigma^2); never positive.
  double max_violation = 0.0;
};

/// grad F is taken as the mean of the component gradients.
VarianceSample variance_sample(const FiniteSumProblem& problem, const Vector& w);

/// For each A in {0} U {2^k : k = -20..20}, sigma^2(A) = max_s (v_s - A g_s)_+.
/// Reports the smallest A whose sigma^2(A) is within 1% of the grid minimum.
/// The fit is feasible on every sample by construction.
VarianceFit fit_variance_constants(std::span<const VarianceSample> samples);

/// Samples the problem at `points` (at least two) and fits (A, sigma^2).
/// Include a stationary point when one is known: without a sample where
/// grad F = 0 the smallest feasible sigma^2 keeps shrinking as A grows.
VarianceFit estimate_variance_constants(const FiniteSumProblem& problem,
                                        std::span<const Vector> points);

/// sqrt((1/n) sum_i |grad f(w; i)|^2).
double component_gradient_rms(const FiniteSumProblem& problem, const Vector& w);

struct ProbeOptions {
  double relative_step = 1e-4;  // h = relative_step * (1 + |w|)
  int iterations = 30;
  double stagnation = 1e-3;     // relative change of the last power step
  double tolerance = 0.05;      // violation when hessian > ell(grad) * (1 + tolerance)
  double perturbation = 0.0;    // random jitter applied to each point first
  std::uint64_t seed = 0;
};

struct ProbeResult {
  double grad_norm = 0.0;
  double hessian_estimate = 0.0;
  double ell_bound = std::numeric_limits<double>::quiet_NaN();
  bool violated = false;
  bool flagged = false;  // power iteration did not settle; excluded from checks
};

struct ProbeReport {
  std::vector<ProbeResult> probes;
  std::size_t violations = 0;
  std::size_t flagged = 0;
};

/// Power iteration on central-difference Hessian-vector products of F.
ProbeResult probe_point(const FiniteSumProblem& problem, const Vector& w,
                        const std::optional<EllFunction>& ell, const ProbeOptions& options,
                        std::uint64_t stream = 0);

ProbeReport probe_ell_envelope(const FiniteSumProblem& problem, std::span<const Vector> points,
                               const std::optional<EllFunction>& ell, const ProbeOptions& options = {});

/// grad_norm,hessian_estimate,ell_bound,violated (flagged probes are skipped).
void write_probe_csv(const ProbeReport& report, std::ostream& out);

/// Dense central-difference Hessian of F; meant for small dimensions.
Matrix finite_difference_hessian(const FiniteSumProblem& problem, const Vector& w, double h);

/// Average of |(1/k) sum_{j<k} X_{pi_j} - mean(X)|^2 over all n! orders.
/// Requires 2 <= n <= 8 and 1 <= k <= n.
double brute_force_partial_average_variance(std::span<const Vector> X, std::size_t k);
/// Same enumeration over integer scalars, exactly.
boost::rational<std::int64_t> brute_force_partial_average_variance(std::span<const std::int64_t> X,
                                                                    std::size_t k);

/// |g_fd - g| / max(1, |g|) for component i, or for F when i is empty.
double gradient_relative_error(const FiniteSumProblem& problem, const Vector& w,
                               std::optional<std::size_t> component, double h = 1e-5);

struct SumStructureError {
  double value = 0.0;     // relative to the mean |f(w;i)|
  double gradient = 0.0;  // relative to the mean |grad f(w;i)|
};

/// Compares full_value/full_gradient against explicit component averages.
SumStructureError sum_structure_error(const FiniteSumProblem& problem, const Vector& w);

/// max_i |grad f(w;i)| - (sqrt(2(1+nA)) |grad F(w)| + sqrt(2n) sigma).
double lemma_component_bound_excess(const FiniteSumProblem& problem, const Vector& w, double A,
                                    double sigma);

/// |grad F(w)|^2 - 2 ell(2 |grad F(w)|) (F(w) - F*).
double lemma_gradient_gap_excess(const FiniteSumProblem& problem, const Vector& w,
                                 const EllFunction& ell, double f_star);

/// Counts violations of an inequality of the form excess <= slack.
struct InequalityTally {
  double slack = 1e-9;
  std::size_t checked = 0;
  std::size_t violations = 0;
  double worst_excess = -std::numeric_limits<double>::infinity();
  std::optional<std::uint64_t> first_violation;

  void add(std::uint64_t epoch, double excess);
  bool clean() const noexcept { return violations == 0; }
};

}  // namespace shufgrad

#endif  // SHUFGRAD_DIAGNOSTICS_HPP
