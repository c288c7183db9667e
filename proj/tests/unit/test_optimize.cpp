#include <cmath>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "shufgrad/diagnostics.hpp"
#include "shufgrad/error.hpp"
#include "shufgrad/experiment.hpp"
#include "shufgrad/optimize.hpp"

using namespace shufgrad;

namespace {

TinyQuadraticProblem two_point_tiny(std::optional<Vector> init = std::nullopt) {
  return TinyQuadraticProblem({(Vector(2) << 1, 0).finished(), (Vector(2) << -1, 0).finished()}, init);
}

/// n copies of the same quadratic bowl.
TinyQuadraticProblem identical_components(std::size_t n) {
  const Vector c = (Vector(3) << 0.5, -1.0, 2.0).finished();
  return TinyQuadraticProblem(std::vector<Vector>(n, c), Vector::Zero(3));
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("shufgrad_test_" + name);
}

bool same_rows(const TrajectoryRecord& a, const TrajectoryRecord& b) {
  if (a.rows.size() != b.rows.size()) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const auto& x = a.rows[i];
    const auto& y = b.rows[i];
    if (x.epoch != y.epoch || x.objective != y.objective || x.grad_norm_sq != y.grad_norm_sq ||
        x.dist_sq != y.dist_sq || x.evals != y.evals)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("one fixed-order epoch on the tiny quadratic") {
  auto p = two_point_tiny(Vector::Zero(2));
  RunConfig cfg;
  cfg.step = 0.5 / 2;
  cfg.epochs = 1;
  const auto rec = run_shuffling(p, Scheme::fixed(2), cfg);
  CHECK(rec.final_point[0] == -0.0625);
  CHECK(rec.final_point[1] == 0.0);
  REQUIRE(rec.rows.size() == 1);
  CHECK(rec.rows[0].evals == 2);
  CHECK(rec.initial.epoch == 0);
  CHECK(*rec.rows[0].objective == p.full_value(rec.final_point));
}

TEST_CASE("identical components make every scheme bit-identical") {
  auto p = identical_components(6);
  RunConfig cfg;
  cfg.step = 0.03;
  cfg.epochs = 15;
  const auto fixed = run_shuffling(p, Scheme::fixed(6), cfg);
  const auto once = run_shuffling(p, Scheme::shuffle_once(6, 3), cfg);
  const auto rr = run_shuffling(p, Scheme::random_reshuffle(6, 4), cfg);
  CHECK(fixed.final_point == once.final_point);
  CHECK(fixed.final_point == rr.final_point);
  CHECK(same_rows(fixed, rr));
  CHECK(same_rows(fixed, once));

  // n plain gradient steps of size eta / n per epoch.
  Vector w = Vector::Zero(3);
  for (int s = 0; s < 15 * 6; ++s) w -= 0.03 * p.full_gradient(w);
  CHECK(w == fixed.final_point);
}

TEST_CASE("zero stepsize leaves the iterate in place") {
  QuarticProblem p(4, 2);
  RunConfig cfg;
  cfg.step = 0.0;
  cfg.epochs = 5;
  for (const auto& rec : {run_shuffling(p, Scheme::random_reshuffle(p.size(), 1), cfg), run_sgd(p, cfg)}) {
    CHECK(rec.final_point == p.initial_point());
    for (const auto& row : rec.rows) CHECK(*row.objective == p.full_value(p.initial_point()));
    CHECK(averaged_iterate(rec) == p.initial_point());
  }
}

TEST_CASE("sgd with one component matches shuffling") {
  TinyQuadraticProblem p({(Vector(2) << 3, -1).finished()}, Vector::Zero(2));
  RunConfig cfg;
  cfg.step = 0.2;
  cfg.epochs = 8;
  cfg.seed = 123;
  const auto a = run_sgd(p, cfg);
  const auto b = run_shuffling(p, Scheme::random_reshuffle(1, 9), cfg);
  CHECK(a.final_point == b.final_point);
  CHECK(same_rows(a, b));
}

TEST_CASE("sgd contracts towards the optimum on average") {
  auto p = two_point_tiny((Vector(2) << 3, 2).finished());
  const double initial = p.distance_sq_to_optimum(p.initial_point());
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RunConfig cfg;
    cfg.step = 0.1;
    cfg.epochs = 10000;
    cfg.seed = seed;
    cfg.record = {.objective = false, .grad_norm_sq = false, .distance = false, .average = false};
    const auto rec = run_sgd(p, cfg);
    total += p.distance_sq_to_optimum(rec.final_point);
  }
  CHECK(total / 100 < initial);
}

TEST_CASE("averaged iterate of a two-epoch run") {
  auto p = two_point_tiny((Vector(2) << 2, 1).finished());
  std::vector<Vector> starts;
  RunConfig cfg;
  cfg.step = 0.2;
  cfg.epochs = 2;
  cfg.on_epoch_start = [&](std::uint64_t t, const Vector& w) {
    CHECK(t == starts.size() + 1);
    starts.push_back(w);
  };
  const auto rec = run_shuffling(p, Scheme::random_reshuffle(2, 8), cfg);
  REQUIRE(starts.size() == 3);
  CHECK(starts.back() == rec.final_point);
  CHECK((averaged_iterate(rec) - (starts[0] + starts[1]) / 2).norm() <= 1e-15);
  CHECK(rec.averaged == 2);

  cfg.record.average = false;
  cfg.on_epoch_start = nullptr;
  CHECK_THROWS_AS(averaged_iterate(run_shuffling(p, Scheme::fixed(2), cfg)), UsageError);
}

TEST_CASE("best iterate") {
  TrajectoryRecord rec;
  const auto fill = [&](std::vector<double> values) {
    rec.rows.clear();
    std::uint64_t t = 0;
    for (double v : values) rec.rows.push_back({.epoch = ++t, .objective = v});
  };
  fill({5, 4, 3, 2});
  CHECK(best_iterate(rec) == std::pair<std::uint64_t, double>{4, 2});
  fill({3, 1, 2});
  CHECK(best_iterate(rec) == std::pair<std::uint64_t, double>{2, 1});
  fill({2, 1, 1});
  CHECK(best_iterate(rec).first == 2);
  fill({});
  CHECK_THROWS_AS(best_iterate(rec), UsageError);
  rec.rows.push_back({.epoch = 1});
  CHECK_THROWS_AS(best_iterate(rec), UsageError);
}

TEST_CASE("gradient evaluations are counted per epoch") {
  QuarticProblem p(5, 3);
  for (std::size_t batch : {1u, 4u, 35u}) {
    RunConfig cfg;
    cfg.step = 1e-3;
    cfg.epochs = 6;
    cfg.batch = batch;
    const auto rec = run_shuffling(p, Scheme::random_reshuffle(p.size(), 2), cfg);
    for (const auto& row : rec.rows) CHECK(row.evals == row.epoch * p.size());
    const auto sgd = run_sgd(p, cfg);
    for (const auto& row : sgd.rows) CHECK(row.evals == row.epoch * p.size());
  }
}

TEST_CASE("full batch reduces to gradient descent") {
  QuarticProblem p(5, 3);
  RunConfig cfg;
  cfg.step = 0.01;
  cfg.epochs = 4;
  cfg.batch = p.size();
  const auto rec = run_shuffling(p, Scheme::fixed(p.size()), cfg);
  Vector w = p.initial_point();
  for (int t = 0; t < 4; ++t) w -= 0.01 * p.full_gradient(w);
  CHECK((rec.final_point - w).norm() <= 1e-12);
}

TEST_CASE("runs are deterministic") {
  ExpStrongProblem p(6, 3);
  RunConfig cfg;
  cfg.step = 1e-3;
  cfg.epochs = 20;
  cfg.seed = 5;
  CHECK(same_rows(run_shuffling(p, Scheme::random_reshuffle(p.size(), 1), cfg),
                  run_shuffling(p, Scheme::random_reshuffle(p.size(), 1), cfg)));
  CHECK(same_rows(run_sgd(p, cfg), run_sgd(p, cfg)));
  cfg.seed = 6;
  const auto other = run_sgd(p, cfg);
  cfg.seed = 5;
  CHECK_FALSE(same_rows(run_sgd(p, cfg), other));
}

TEST_CASE("small steps descend until the iterate reaches the step-size neighbourhood") {
  // A shuffling epoch with step s = eta/2 has a biased fixed point at
  // distance O(s) from the optimum, so monotone descent can only be asked
  // for outside a ball of that size.
  auto p = two_point_tiny((Vector(2) << 4, -3).finished());
  for (double eta : {0.1, 0.05, 0.01}) {
    RunConfig cfg;
    cfg.step = eta / 2;
    cfg.epochs = 2000;
    for (const auto& scheme : {Scheme::fixed(2), Scheme::random_reshuffle(2, 1)}) {
      const auto rec = run_shuffling(p, scheme, cfg);
      double previous = *rec.initial.objective;
      double previous_dist = *rec.initial.dist_sq;
      for (const auto& row : rec.rows) {
        if (previous_dist > eta * eta) CHECK(*row.objective <= previous);
        previous = *row.objective;
        previous_dist = *row.dist_sq;
      }
      CHECK(*rec.rows.back().dist_sq <= eta * eta);
    }
  }
}

TEST_CASE("fixed order overshoots the optimum and settles at a biased point") {
  auto p = two_point_tiny((Vector(2) << 4, 0).finished());
  const double s = 0.05;
  RunConfig cfg;
  cfg.step = s;
  cfg.epochs = 3000;
  const auto rec = run_shuffling(p, Scheme::fixed(2), cfg);
  // epoch map x -> (1-s)^2 x - s^2 with fixed point -s/(2-s)
  CHECK(rec.final_point[0] == doctest::Approx(-s / (2 - s)).epsilon(1e-12));
  bool rose = false;
  for (std::size_t t = 1; t < rec.rows.size(); ++t)
    rose = rose || *rec.rows[t].objective > *rec.rows[t - 1].objective;
  CHECK(rose);
}

TEST_CASE("divergence is reported with its location") {
  QuarticProblem p(3, 1);
  RunConfig cfg;
  cfg.step = 50.0;
  cfg.epochs = 10;
  try {
    run_shuffling(p, Scheme::fixed(p.size()), cfg);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.epoch() >= 1);
    CHECK(e.step() >= 1);
    CHECK(e.step() <= p.size());
    CHECK(std::isfinite(e.last_finite_objective()));
  }
  cfg.throw_on_divergence = false;
  const auto rec = run_sgd(p, cfg);
  REQUIRE(rec.divergence.has_value());
  CHECK(rec.rows.size() == rec.divergence->epoch - 1);
  CHECK(rec.final_point.allFinite());
}

TEST_CASE("config validation") {
  QuarticProblem p(2, 1);
  RunConfig cfg;
  cfg.step = -1.0;
  CHECK_THROWS_AS(run_sgd(p, cfg), UsageError);
  cfg.step = 0.1;
  cfg.epochs = 0;
  CHECK_THROWS_AS(run_sgd(p, cfg), UsageError);
  cfg.epochs = 1;
  cfg.batch = 0;
  CHECK_THROWS_AS(run_sgd(p, cfg), UsageError);
  cfg.batch = 1;
  CHECK_THROWS_AS(run_shuffling(p, Scheme::fixed(3), cfg), UsageError);
}

TEST_CASE("checkpoint round trip") {
  Checkpoint cp;
  cp.point = (Vector(3) << 1.5, -2, 1e-300).finished();
  cp.epoch = 17;
  cp.scheme_seed = 0xDEADBEEF;
  cp.sgd_seed = 42;
  cp.averaged = 17;
  cp.average = (Vector(3) << 0.25, 0.5, -0.75).finished();
  const auto path = temp_file("roundtrip.ckpt");
  write_checkpoint(path, cp);
  const auto back = read_checkpoint(path);
  CHECK(back.point == cp.point);
  CHECK(back.epoch == 17);
  CHECK(back.scheme_seed == cp.scheme_seed);
  CHECK(back.sgd_seed == 42);
  CHECK(back.averaged == 17);
  CHECK(back.average == cp.average);
  // Header: 8-byte magic then the dimension.
  CHECK(std::filesystem::file_size(path) == 8 + 8 + 3 * 8 + 4 * 8 + 3 * 8);
  std::filesystem::resize_file(path, 20);
  CHECK_THROWS_AS(read_checkpoint(path), FormatError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_checkpoint(temp_file("missing.ckpt")), FormatError);
}

TEST_CASE("resuming from a checkpoint reproduces the uninterrupted run") {
  ExpStrongProblem p(4, 2);
  const auto path = temp_file("resume.ckpt");
  RunConfig full;
  full.step = 2e-3;
  full.epochs = 12;
  full.seed = 77;
  const auto scheme = Scheme::random_reshuffle(p.size(), 31);
  const auto whole = run_shuffling(p, scheme, full);
  const auto whole_sgd = run_sgd(p, full);

  RunConfig first = full;
  first.epochs = 5;
  first.checkpoint_path = path;
  first.checkpoint_every = 5;
  run_shuffling(p, scheme, first);
  RunConfig second = full;
  second.resume = read_checkpoint(path);
  CHECK(second.resume->epoch == 5);
  const auto rest = run_shuffling(p, scheme, second);
  CHECK(rest.final_point == whole.final_point);
  CHECK(rest.rows.back().evals == whole.rows.back().evals);
  CHECK((*rest.average - *whole.average).norm() <= 1e-14);

  run_sgd(p, first);
  second.resume = read_checkpoint(path);
  CHECK(run_sgd(p, second).final_point == whole_sgd.final_point);
  std::filesystem::remove(path);
}

TEST_CASE("component bound and gradient gap hold along a tiny trajectory") {
  auto p = two_point_tiny((Vector(2) << 3, -4).finished());
  const auto fit = estimate_variance_constants(
      p, std::vector<Vector>{p.initial_point(), *p.optimum_point(), Vector::Ones(2)});
  const auto ell = *p.declared_ell();
  InequalityTally bound;
  InequalityTally gap;
  RunConfig cfg;
  cfg.step = 0.05;
  cfg.epochs = 100;
  cfg.on_epoch_start = [&](std::uint64_t t, const Vector& w) {
    bound.add(t, lemma_component_bound_excess(p, w, fit.A_hat, std::sqrt(fit.sigma2_hat)));
    gap.add(t, lemma_gradient_gap_excess(p, w, ell, *p.optimum_value()));
  };
  run_shuffling(p, Scheme::random_reshuffle(2, 3), cfg);
  CHECK(bound.checked == 101);
  CHECK(bound.clean());
  CHECK(gap.clean());
}

TEST_CASE("averaged iterate obeys Jensen on the quartic problem under a convex plan") {
  QuarticProblem p(5, 2);
  PlanRequest req;
  req.theorem = Theorem::ConvexReshuffle;
  req.epsilon = 0.5;
  req.delta = 0.5;
  const auto plan = plan_for_problem(p, req);
  REQUIRE(plan.epochs <= 200000);
  RunConfig cfg;
  cfg.step = plan.per_step();
  cfg.epochs = plan.epochs;
  cfg.record.grad_norm_sq = false;
  long double sum = 0;
  cfg.on_epoch_start = [&](std::uint64_t t, const Vector& w) {
    if (t <= plan.epochs) sum += p.full_value(w);
  };
  const auto rec = run_shuffling(p, Scheme::random_reshuffle(p.size(), 5), cfg);
  const double mean_value = static_cast<double>(sum / plan.epochs);
  CHECK(p.full_value(averaged_iterate(rec)) <= mean_value + 1e-9);
}
