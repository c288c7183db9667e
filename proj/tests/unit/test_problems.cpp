#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "shufgrad/error.hpp"
#include "shufgrad/ingest.hpp"
#include "shufgrad/problems.hpp"
#include "shufgrad/random.hpp"

using namespace shufgrad;

namespace {

Vector gaussian_point(std::size_t dim, std::uint64_t seed, double scale = 1.0, double shift = 0.0) {
  auto engine = make_engine(seed);
  std::normal_distribution<double> normal(shift, scale);
  Vector w(static_cast<Eigen::Index>(dim));
  for (auto& x : w) x = normal(engine);
  return w;
}

Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& w, double h) {
  Vector g(w.size());
  Vector p = w;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    p[j] = w[j] + h;
    const double up = f(p);
    p[j] = w[j] - h;
    const double down = f(p);
    p[j] = w[j];
    g[j] = (up - down) / (2 * h);
  }
  return g;
}

double relative_gap(const Vector& approx, const Vector& exact) {
  return (approx - exact).norm() / std::max(1.0, exact.norm());
}

TinyQuadraticProblem two_point_tiny() {
  return TinyQuadraticProblem({(Vector(2) << 1, 0).finished(), (Vector(2) << -1, 0).finished()});
}

std::unique_ptr<DROProblem> small_dro(std::uint64_t seed) {
  auto data = synthesize(seed, 120, 6);
  preprocess(data, {.drop_columns = {}, .target_column = "y"});
  return std::make_unique<DROProblem>(DROProblem::from_dataset(data, {.seed = seed}));
}

}  // namespace

TEST_CASE("quartic component gradient at all-ones") {
  QuarticProblem p;
  // coordinate 3 (0-based 2), k = 5
  const std::size_t i = 2 * 21 + (5 + 10);
  CHECK(p.decode(i) == std::pair<std::size_t, int>{2, 5});
  const Vector g = p.component_gradient(Vector::Ones(50), i);
  CHECK(g[2] == 9.0);
  CHECK(g.norm() == 9.0);
  CHECK(p.size() == 1050);
}

TEST_CASE("quartic full gradient against brute-force sum") {
  QuarticProblem p;
  const Vector g = p.full_gradient(Vector::Ones(50));
  for (Eigen::Index j = 0; j < 50; ++j) CHECK(g[j] == doctest::Approx(0.08).epsilon(1e-14));
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Vector x = gaussian_point(50, s);
    CHECK(relative_gap(p.full_gradient(x), oracle::quartic_full_gradient(x, 10)) < 1e-13);
  }
}

TEST_CASE("quartic cancellation of the linear terms") {
  QuarticProblem p;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Vector x = gaussian_point(50, 100 + s);
    const double expected = x.array().pow(4).sum() / 50.0;
    CHECK(std::abs(p.full_value(x) - expected) <= 1e-12 * std::max(1.0, expected));
  }
}

TEST_CASE("tiny quadratic gradients and optimum") {
  auto p = two_point_tiny();
  const Vector g = p.component_gradient(Vector::Zero(2), 0);
  CHECK(g[0] == -1.0);
  CHECK(g[1] == 0.0);
  const Vector star = *p.optimum_point();
  CHECK(p.full_gradient(star).norm() == 0.0);
  CHECK(*p.optimum_value() == doctest::Approx(0.5));
  CHECK(p.center_spread() == doctest::Approx(1.0));
}

TEST_CASE("exp problem gradient vanishes at the origin") {
  ExpStrongProblem p;
  CHECK(p.full_gradient(Vector::Zero(50)).norm() < 1e-12);
  CHECK(p.optimum_point()->norm() == 0.0);
}

TEST_CASE("exp problem optimum matches long-double descent") {
  ExpStrongProblem p;
  const auto m = oracle::exp_minimum_by_descent(50, 10);
  CHECK(m.grad_norm <= 1e-12L);
  CHECK(static_cast<double>(m.value) == doctest::Approx(*p.optimum_value()).epsilon(1e-13));
}

TEST_CASE("phase retrieval single measurement") {
  Matrix a(1, 2);
  a << 1, 0;
  PhaseRetrievalProblem p(a, (Vector(1) << 4).finished(), Vector::Zero(2));
  const Vector z = (Vector(2) << 1, 0).finished();
  const Vector g = p.component_gradient(z, 0);
  CHECK(g[0] == -6.0);
  CHECK(g[1] == 0.0);
  const Vector fd = central_difference([&](const Vector& w) { return p.component_value(w, 0); }, z, 1e-5);
  CHECK(relative_gap(fd, g) < 1e-6);
}

TEST_CASE("phase retrieval without noise fits the signal exactly") {
  PhaseRetrievalProblem p({.measurements = 200, .dim = 10, .noise_std = 0.0, .seed = 3});
  CHECK(std::abs(p.full_value(p.signal())) <= 1e-18);
  CHECK(p.optimum_value().has_value());
  CHECK(p.distance_sq_to_optimum(-p.signal()) == 0.0);
  PhaseRetrievalProblem noisy({.measurements = 200, .dim = 10, .seed = 3});
  CHECK_FALSE(noisy.optimum_value().has_value());
}

TEST_CASE("phase retrieval data is a function of the seed") {
  PhaseRetrievalProblem a({.measurements = 50, .dim = 5, .seed = 9});
  PhaseRetrievalProblem b({.measurements = 50, .dim = 5, .seed = 9});
  PhaseRetrievalProblem c({.measurements = 50, .dim = 5, .seed = 10});
  CHECK(a.observations() == b.observations());
  CHECK(a.initial_point() == b.initial_point());
  CHECK(a.observations() != c.observations());
}

TEST_CASE("argument validation") {
  QuarticProblem p(3, 1);
  CHECK_THROWS_AS(p.component_gradient(Vector::Ones(3), 9), UsageError);
  CHECK_THROWS_AS(p.component_value(Vector::Ones(2), 0), UsageError);
  Vector bad = Vector::Ones(3);
  bad[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(p.full_gradient(bad), DomainError);
  bad[1] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(p.component_gradient(bad, 0), DomainError);
  CHECK_THROWS_AS(TinyQuadraticProblem({}), UsageError);
}

TEST_CASE("finite differences agree with analytic gradients") {
  std::vector<std::unique_ptr<FiniteSumProblem>> problems;
  problems.push_back(std::make_unique<QuarticProblem>(8, 3));
  problems.push_back(std::make_unique<ExpStrongProblem>(8, 3));
  problems.push_back(std::make_unique<PhaseRetrievalProblem>(
      PhaseRetrievalProblem::Options{.measurements = 40, .dim = 6, .seed = 1}));
  problems.push_back(std::make_unique<TinyQuadraticProblem>(two_point_tiny()));
  problems.push_back(small_dro(5));

  for (const auto& p : problems) {
    const double tol = p->name() == "dro" ? 1e-4 : 1e-5;
    for (std::uint64_t s = 0; s < 10; ++s) {
      const Vector w = p->initial_point() + gaussian_point(p->dim(), 1000 + s, 0.5);
      const Vector full = central_difference([&](const Vector& v) { return p->full_value(v); }, w, 1e-5);
      CHECK_MESSAGE(relative_gap(full, p->full_gradient(w)) <= tol, p->name());
      const std::size_t i = (s * 7919) % p->size();
      const Vector comp =
          central_difference([&](const Vector& v) { return p->component_value(v, i); }, w, 1e-5);
      CHECK_MESSAGE(relative_gap(comp, p->component_gradient(w, i)) <= tol, p->name());
    }
  }
}

TEST_CASE("full value and gradient are component averages") {
  std::vector<std::unique_ptr<FiniteSumProblem>> problems;
  problems.push_back(std::make_unique<QuarticProblem>());
  problems.push_back(std::make_unique<ExpStrongProblem>());
  problems.push_back(std::make_unique<PhaseRetrievalProblem>(
      PhaseRetrievalProblem::Options{.measurements = 300, .dim = 20, .seed = 2}));
  problems.push_back(small_dro(6));

  for (const auto& p : problems) {
    for (std::uint64_t s = 0; s < 100; ++s) {
      const Vector w = p->initial_point() + gaussian_point(p->dim(), 5000 + s, 0.3);
      long double value = 0;
      long double scale = 0;
      Vector grad = Vector::Zero(static_cast<Eigen::Index>(p->dim()));
      double gscale = 0;
      for (std::size_t i = 0; i < p->size(); ++i) {
        const double v = p->component_value(w, i);
        value += v;
        scale += std::abs(v);
        const Vector g = p->component_gradient(w, i);
        grad += g;
        gscale += g.norm();
      }
      const double n = static_cast<double>(p->size());
      const double mean_value = static_cast<double>(value / n);
      const double value_scale = std::max(1.0, static_cast<double>(scale / n));
      CHECK(std::abs(p->full_value(w) - mean_value) <= 1e-12 * value_scale);
      CHECK((p->full_gradient(w) - grad / n).norm() <= 1e-12 * std::max(1.0, gscale / n));
    }
  }
}

TEST_CASE("dual minimization single sample") {
  const std::vector<double> losses{0.0};
  const auto m = minimize_dual(losses, 1.0);
  CHECK(std::abs(m.theta) < 1e-8);
  CHECK(std::abs(m.value) < 1e-12);
}

TEST_CASE("dual minimization with equal losses shifts theta") {
  const std::vector<double> losses(5, 3.7);
  const auto m = minimize_dual(losses, 1.0);
  CHECK(m.theta == doctest::Approx(3.7).epsilon(1e-8));
  CHECK(m.value == doctest::Approx(3.7).epsilon(1e-12));
}

TEST_CASE("dual minimization against a grid scan") {
  for (double lambda : {1.0, 0.5, 2.0}) {
    const std::vector<double> losses{0.0, 2.0};
    const auto m = minimize_dual(losses, lambda);
    const auto g = oracle::dual_grid_minimum(losses, lambda, -10, 10, 1e-4);
    CHECK(std::abs(m.value - g.value) <= 1e-6);
    CHECK(m.value <= g.value + 1e-12);
  }
  const std::vector<double> none;
  CHECK_THROWS_AS(minimize_dual(none, 1.0), UsageError);
}

TEST_CASE("dro partial objective is the dual minimum at fixed weights") {
  auto p = small_dro(8);
  const Vector w = p->initial_point();
  const auto m = dro_partial_objective(*p, w);
  std::vector<double> losses;
  for (std::size_t i = 0; i < p->size(); ++i) losses.push_back(p->sample_loss(w.head(6), i));
  Vector at = w;
  at[6] = m.theta;
  CHECK(p->full_value(at) == doctest::Approx(m.value).epsilon(1e-12));
  at[6] = m.theta + 1e-3;
  CHECK(p->full_value(at) >= m.value);
  at[6] = m.theta - 1e-3;
  CHECK(p->full_value(at) >= m.value);
  CHECK(p->dim() == 7);
  CHECK(p->initial_point()[6] == 0.1);
}
