#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "shufgrad/diagnostics.hpp"
#include "shufgrad/error.hpp"
#include "shufgrad/random.hpp"

using namespace shufgrad;

namespace {

/// f(x) = e^x + e^-x in one dimension, a single component.
class CoshProblem final : public FiniteSumProblem {
 public:
  std::string name() const override { return "cosh"; }
  std::size_t size() const override { return 1; }
  std::size_t dim() const override { return 1; }
  Vector initial_point() const override { return Vector::Zero(1); }

 protected:
  double do_component_value(const Vector& w, std::size_t) const override {
    return std::exp(w[0]) + std::exp(-w[0]);
  }
  void do_component_gradient(const Vector& w, std::size_t, Vector& out) const override {
    out.resize(1);
    out[0] = std::exp(w[0]) - std::exp(-w[0]);
  }
};

Vector gaussian_point(std::size_t dim, std::uint64_t seed) {
  auto engine = make_engine(seed);
  std::normal_distribution<double> normal;
  Vector w(static_cast<Eigen::Index>(dim));
  for (auto& x : w) x = normal(engine);
  return w;
}

}  // namespace

TEST_CASE("variance fit with identical components is zero") {
  const Vector c = (Vector(2) << 1, 2).finished();
  TinyQuadraticProblem p({c, c, c, c});
  const std::vector<Vector> pts{Vector::Zero(2), c, (Vector(2) << -3, 5).finished()};
  const auto fit = estimate_variance_constants(p, pts);
  CHECK(fit.A_hat == 0.0);
  CHECK(fit.sigma2_hat == 0.0);
  CHECK(fit.points == 3);
}

TEST_CASE("variance fit recovers the tiny quadratic spread") {
  const std::vector<Vector> centers{(Vector(2) << 1, 0).finished(), (Vector(2) << -1, 2).finished(),
                                    (Vector(2) << 0.5, -1).finished()};
  TinyQuadraticProblem p(centers);
  const Vector mean = (centers[0] + centers[1] + centers[2]) / 3;
  double spread = 0;
  for (const auto& c : centers) spread += (c - mean).squaredNorm();
  spread /= 3;
  std::vector<Vector> pts;
  for (std::uint64_t s = 0; s < 8; ++s) pts.push_back(3 * gaussian_point(2, s));
  pts.push_back(mean);
  const auto fit = estimate_variance_constants(p, pts);
  CHECK(fit.A_hat == 0.0);
  CHECK(fit.sigma2_hat == doctest::Approx(spread).epsilon(1e-14));
}

TEST_CASE("quartic component variance depends on the point") {
  QuarticProblem p;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Vector x = gaussian_point(50, 40 + s);
    const auto v = variance_sample(p, x);
    CHECK(v.variance == doctest::Approx(oracle::quartic_variance(x, 10)).epsilon(1e-11));
    CHECK(v.grad_norm_sq == doctest::Approx(oracle::quartic_full_gradient(x, 10).squaredNorm()).epsilon(1e-12));
  }
  const auto at_zero = variance_sample(p, Vector::Zero(50));
  CHECK(at_zero.variance == doctest::Approx(770.0 / 21).epsilon(1e-14));
  CHECK(at_zero.grad_norm_sq == 0.0);
}

TEST_CASE("variance fit is feasible and follows the grid rule") {
  CounterRng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<VarianceSample> samples;
    for (int s = 0; s < 6; ++s) samples.push_back({10 * rng.uniform(), 5 * rng.uniform()});
    const auto fit = fit_variance_constants(samples);
    for (const auto& s : samples) CHECK(s.variance <= fit.A_hat * s.grad_norm_sq + fit.sigma2_hat);
    CHECK(fit.max_violation <= 0.0);
    const bool on_grid = fit.A_hat == 0.0 || std::exp2(std::round(std::log2(fit.A_hat))) == fit.A_hat;
    CHECK(on_grid);
  }
  CHECK_THROWS_AS(fit_variance_constants(std::vector<VarianceSample>{}), UsageError);
  QuarticProblem q(2, 1);
  CHECK_THROWS_AS(estimate_variance_constants(q, std::vector<Vector>{Vector::Ones(2)}), UsageError);
}

TEST_CASE("probe sees the identity hessian of a quadratic") {
  TinyQuadraticProblem p({(Vector(3) << 1, 2, 3).finished(), (Vector(3) << -1, 0, 1).finished()});
  std::vector<Vector> pts;
  for (std::uint64_t s = 0; s < 6; ++s) pts.push_back(5 * gaussian_point(3, s));
  const auto report = probe_ell_envelope(p, pts, EllFunction::constant(1.0));
  CHECK(report.violations == 0);
  for (const auto& r : report.probes) {
    CHECK(r.hessian_estimate == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.ell_bound == 1.0);
  }
}

TEST_CASE("probe detects the one-dimensional quartic violation") {
  QuarticProblem p(1, 0);  // F(x) = x^4
  const auto r = probe_point(p, Vector::Constant(1, 2.0), EllFunction::power(3, 2.0 / 3), {});
  CHECK(r.grad_norm == doctest::Approx(32.0).epsilon(1e-12));
  CHECK(r.hessian_estimate == doctest::Approx(48.0).epsilon(1e-6));
  CHECK(r.ell_bound == doctest::Approx(3 * std::pow(32.0, 2.0 / 3)).epsilon(1e-12));
  CHECK(r.violated);
  CHECK_FALSE(r.flagged);
}

TEST_CASE("cosh satisfies the affine ell on a grid") {
  CoshProblem p;
  std::vector<Vector> pts;
  for (int k = -20; k <= 20; ++k) pts.push_back(Vector::Constant(1, 0.5 * k));
  const auto report = probe_ell_envelope(p, pts, EllFunction::affine(5, 5));
  CHECK(report.violations == 0);
  CHECK(report.flagged == 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double x = pts[i][0];
    CHECK(report.probes[i].hessian_estimate == doctest::Approx(std::exp(x) + std::exp(-x)).epsilon(1e-6));
  }
}

TEST_CASE("power iteration agrees with a dense eigensolve") {
  PhaseRetrievalProblem p({.measurements = 60, .dim = 6, .seed = 4});
  for (std::uint64_t s = 0; s < 4; ++s) {
    const Vector w = gaussian_point(6, 300 + s);
    const Matrix H = finite_difference_hessian(p, w, 1e-4);
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (H + H.transpose()));
    const double dense = eig.eigenvalues().cwiseAbs().maxCoeff();
    const auto r = probe_point(p, w, std::nullopt, {});
    if (!r.flagged) CHECK(r.hessian_estimate == doctest::Approx(dense).epsilon(1e-4));
    CHECK(std::isnan(r.ell_bound));
  }
}

TEST_CASE("probe csv layout") {
  ProbeReport report;
  report.probes.push_back({.grad_norm = 1, .hessian_estimate = 2, .ell_bound = 3, .violated = false});
  report.probes.push_back({.grad_norm = 4, .hessian_estimate = 5, .ell_bound = 6, .violated = true, .flagged = true});
  std::ostringstream out;
  write_probe_csv(report, out);
  CHECK(out.str() == "grad_norm,hessian_estimate,ell_bound,violated\n1,2,3,0\n");
}

TEST_CASE("brute-force partial average variance") {
  const std::vector<std::int64_t> pm{1, -1};
  CHECK(brute_force_partial_average_variance(std::span<const std::int64_t>(pm), 1) ==
        boost::rational<std::int64_t>(1));
  const std::vector<Vector> X{Vector::Constant(2, 1.0), Vector::Constant(2, 4.0), Vector::Constant(2, -2.0)};
  CHECK(brute_force_partial_average_variance(X, 3) == 0.0);
  std::vector<Vector> nine(9, Vector::Zero(1));
  CHECK_THROWS_AS(brute_force_partial_average_variance(nine, 2), UsageError);
  CHECK_THROWS_AS(brute_force_partial_average_variance(X, 0), UsageError);
}

TEST_CASE("floating brute force matches the closed-form factor") {
  CounterRng rng(11);
  for (std::size_t n = 2; n <= 6; ++n) {
    for (int family = 0; family < 20; ++family) {
      std::vector<Vector> X;
      for (std::size_t i = 0; i < n; ++i) {
        Vector x(3);
        for (auto& v : x) v = 4 * rng.uniform() - 2;
        X.push_back(x);
      }
      Vector m = Vector::Zero(3);
      for (const auto& x : X) m += x;
      m /= static_cast<double>(n);
      double pop = 0;
      for (const auto& x : X) pop += (x - m).squaredNorm();
      pop /= static_cast<double>(n);
      for (std::size_t k = 1; k <= n; ++k) {
        const double factor = static_cast<double>(n - k) / static_cast<double>(k * (n - 1));
        CHECK(std::abs(brute_force_partial_average_variance(X, k) - factor * pop) <= 1e-12);
      }
    }
  }
}

TEST_CASE("finite-difference and sum structure helpers") {
  ExpStrongProblem p(5, 2);
  const Vector w = gaussian_point(5, 9);
  CHECK(gradient_relative_error(p, w, std::nullopt) < 1e-7);
  CHECK(gradient_relative_error(p, w, 3) < 1e-7);
  const auto e = sum_structure_error(p, w);
  CHECK(e.value < 1e-12);
  CHECK(e.gradient < 1e-12);
}

TEST_CASE("inequality tally") {
  InequalityTally t;
  t.add(1, -1.0);
  t.add(2, 1e-10);
  CHECK(t.clean());
  t.add(3, 0.5);
  t.add(4, 0.25);
  CHECK_FALSE(t.clean());
  CHECK(t.violations == 2);
  CHECK(t.checked == 4);
  CHECK(*t.first_violation == 3);
  CHECK(t.worst_excess == 0.5);
}

TEST_CASE("gradient bound excess helpers on the tiny quadratic") {
  TinyQuadraticProblem p({(Vector(1) << 1).finished(), (Vector(1) << -1).finished()});
  const Vector w = Vector::Constant(1, 2.0);
  // components: |2-1| = 1, |2+1| = 3; grad F = 2; bound sqrt(2)*2 + 2*sigma
  CHECK(lemma_component_bound_excess(p, w, 0.0, 1.0) == doctest::Approx(3 - (std::sqrt(2.0) * 2 + 2)));
  // |grad F|^2 - 2 ell (F - F*) with ell = 1: 4 - 2 * (2.5 - 0.5) = 0
  CHECK(lemma_gradient_gap_excess(p, w, EllFunction::constant(1.0), 0.5) == doctest::Approx(0.0));
}
