#include "shufgrad/smoothness.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "shufgrad/error.hpp"
#include "shufgrad/random.hpp"

namespace shufgrad {

namespace {

using real = long double;

constexpr real kInf = std::numeric_limits<real>::infinity();
constexpr std::uint64_t kMaxEpochs = std::uint64_t{1} << 62;
// Inequalities must hold with this relative slack in long double, so that
// rounding cannot flip them when re-evaluated in exact arithmetic.
constexpr double kComfort = 1e-17;

/// a / b with a non-negative numerator, treating b == 0 as an absent bound.
real bound_div(real a, real b) {
  if (b == 0) return kInf;
  return a / b;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

Precondition make_check(std::string name, std::string relation, real lhs, real rhs) {
  Precondition p;
  p.name = std::move(name);
  p.relation = std::move(relation);
  p.lhs = static_cast<double>(lhs);
  p.rhs = static_cast<double>(rhs);
  const real scale = std::isinf(rhs) ? real(1) : std::max(std::fabs(rhs), real(1e-300));
  if (p.relation == "<=") {
    p.holds = lhs <= rhs;
    p.margin = std::isinf(rhs) ? INFINITY : static_cast<double>((rhs - lhs) / scale);
  } else if (p.relation == ">=") {
    p.holds = lhs >= rhs;
    p.margin = std::isinf(rhs) ? -INFINITY : static_cast<double>((lhs - rhs) / scale);
  } else {
    const real diff = std::fabs(lhs - rhs);
    p.holds = diff <= real(1e-12) * scale;
    p.margin = static_cast<double>(-diff / scale);
  }
  return p;
}

real required(const std::optional<double>& v) { return static_cast<real>(*v); }

struct Terms {
  real n, A, sigma, L, delta1, eps;
};

Terms terms_of(const ConstantsBundle& c) {
  return {static_cast<real>(c.n),     static_cast<real>(c.A),      static_cast<real>(c.sigma),
          static_cast<real>(c.L),     static_cast<real>(c.delta1), static_cast<real>(c.epsilon)};
}

// Upper bound on eta shared by theorems 1 and 5.
real eta_cap_reshuffle(const Terms& t) { return 1 / (2 * t.L * std::sqrt(t.A / t.n + 1)); }
// Upper bound on eta for the nonconvex any-order plan.
real eta_cap_any(const Terms& t) { return 1 / (t.L * std::sqrt(2 * (3 * t.A + 2))); }

// Right-hand side terms of the strongly convex reshuffling plan, without the 4/mu factor.
std::array<real, 4> t3_terms(const ConstantsBundle& c, real T) {
  const Terms t = terms_of(c);
  const real mu = required(c.mu);
  const real delta = required(c.delta);
  const real cubic = t.sigma == 0 ? real(0) : std::cbrt(bound_div(T * t.sigma * t.sigma * t.L * t.L, t.n * t.delta1));
  return {real(2), t.L * std::sqrt(2 * (3 * t.A + 2)),
          t.L * t.sigma * std::sqrt(8 / (t.n * mu * delta * t.eps)), cubic};
}

real t4_eta_cap(const ConstantsBundle& c) {
  const Terms t = terms_of(c);
  const real mu = required(c.mu);
  const real ss = required(c.sigma_star);
  return bound_div(t.delta1 * mu * mu, 9 * (mu * mu + t.L * t.L) * ss * ss);
}

// eta(T) of the convex reshuffling plan: the smallest of its three upper bounds.
real t5_eta(const ConstantsBundle& c, real T) {
  const Terms t = terms_of(c);
  const real ss = required(c.sigma_star);
  const real d2 = required(c.dist0_sq);
  const real a = eta_cap_reshuffle(t);
  const real b = std::cbrt(bound_div(t.n * t.delta1, T * t.sigma * t.sigma * t.L * t.L));
  const real e = std::cbrt(bound_div(3 * t.n * d2, 2 * t.L * T * ss * ss));
  return std::min({a, b, e});
}

real t6_eta_cap(const ConstantsBundle& c) {
  const Terms t = terms_of(c);
  return std::sqrt(3 * t.eps / (2 * t.L)) / static_cast<real>(c.Gprime);
}

std::uint64_t ceil_epochs(real x, const char* constraint) {
  if (!(x < static_cast<real>(kMaxEpochs)))
    throw InfeasibleError(constraint, std::string("epoch budget overflows (") + constraint + ")");
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(x)));
}

const Precondition* binding(const std::vector<Precondition>& checks) {
  const Precondition* worst = nullptr;
  for (const auto& p : checks)
    if (!p.holds && (!worst || p.margin < worst->margin)) worst = &p;
  return worst;
}

[[noreturn]] void throw_infeasible(const std::vector<Precondition>& checks, const std::string& why) {
  const Precondition* b = binding(checks);
  const std::string name = b ? b->name : "unknown";
  throw InfeasibleError(name, why + ": binding constraint " + name +
                                  (b ? " (" + fmt(b->lhs) + " " + b->relation + " " + fmt(b->rhs) + ")"
                                     : std::string()));
}

bool comfortable(const Precondition& p) {
  return p.holds && (p.relation == "==" || p.margin >= kComfort);
}

bool is_eta_upper_bound(const Precondition& p) {
  return p.relation == "<=" && (p.name.rfind("eta_", 0) == 0 || p.name == "sum_eta_cubed");
}

/// Nudges (eta, T) across rounding-level violations: eta down by one ulp for
/// a failing upper bound on eta, T up by one for a failing lower bound on T.
/// A caller-supplied T is never changed.
bool polish(const ConstantsBundle& c, double& eta, std::uint64_t& T, bool eta_fixed, bool T_fixed) {
  for (int round = 0; round < 64; ++round) {
    const auto checks = evaluate_preconditions(c, eta, T);
    bool all = true;
    bool changed = false;
    for (const auto& p : checks) {
      if (comfortable(p)) continue;
      all = false;
      if (!p.holds && std::fabs(p.margin) > 1e-9) return false;
      if (is_eta_upper_bound(p) && !eta_fixed) {
        eta = std::nextafter(eta, 0.0);
        changed = true;
      } else if (p.name == "epochs_min" && p.relation == ">=" && !T_fixed) {
        ++T;
        changed = true;
      }
    }
    if (all) return true;
    if (!changed) return false;
  }
  return false;
}

StepsizePlan finish(const ConstantsBundle& c, double eta, std::uint64_t T, bool eta_fixed,
                    bool T_fixed, const char* what) {
  if (!polish(c, eta, T, eta_fixed, T_fixed)) throw_infeasible(evaluate_preconditions(c, eta, T), what);
  StepsizePlan plan;
  plan.constants = c;
  plan.eta = eta;
  plan.epochs = T;
  plan.preconditions = evaluate_preconditions(c, eta, T);
  return plan;
}

// Theorems 1 and 2: eta <= cap, T eta^3 <= budget, T >= lower / eta.
StepsizePlan plan_cubic_budget(const ConstantsBundle& c, real cap, real suggested, real budget,
                               real lower_numerator, std::optional<std::uint64_t> target) {
  if (target) {
    const real T = static_cast<real>(*target);
    const real eta = std::min(cap, std::cbrt(budget / T));
    return finish(c, static_cast<double>(eta), *target, false, true, "target epoch budget infeasible");
  }
  real eta = std::min(cap, suggested);
  std::uint64_t T = 1;
  for (int iter = 0; iter < 100; ++iter) {
    T = ceil_epochs(lower_numerator / eta, "epochs_min");
    if (static_cast<real>(T) * eta * eta * eta <= budget) break;
    eta = std::cbrt(budget / static_cast<real>(T)) * (1 - real(1e-12));
  }
  return finish(c, static_cast<double>(eta), T, false, false, "no admissible stepsize");
}

// Theorems 3 and 4: eta is a function of T; iterate T <- required(T) from T = 2.
template <class EtaOf, class Required>
StepsizePlan plan_fixed_point(const ConstantsBundle& c, EtaOf eta_of, Required required_epochs,
                              std::optional<std::uint64_t> target) {
  if (target) {
    const auto T = *target;
    if (T < 2) throw InfeasibleError("epochs_min", "log-dependent stepsize needs T >= 2");
    return finish(c, static_cast<double>(eta_of(static_cast<real>(T))), T, true, true,
                  "target epoch budget infeasible");
  }
  std::uint64_t T = 2;
  for (int iter = 0; iter < 100; ++iter) {
    const double eta = static_cast<double>(eta_of(static_cast<real>(T)));
    const auto checks = evaluate_preconditions(c, eta, T);
    if (std::all_of(checks.begin(), checks.end(), comfortable)) {
      StepsizePlan plan;
      plan.constants = c;
      plan.eta = eta;
      plan.epochs = T;
      plan.preconditions = checks;
      return plan;
    }
    const real next = required_epochs(static_cast<real>(T));
    if (!std::isfinite(static_cast<double>(next)))
      throw_infeasible(checks, "fixed-point iteration diverged");
    T = std::max<std::uint64_t>(T + 1, ceil_epochs(next, "epochs_min"));
  }
  const double eta = static_cast<double>(eta_of(static_cast<real>(T)));
  throw_infeasible(evaluate_preconditions(c, eta, T), "fixed-point iteration did not converge");
}

}  // namespace

Theorem theorem_from_id(int id) {
  if (id < 1 || id > 6) throw UsageError("theorem id must be in 1..6, got " + std::to_string(id));
  return static_cast<Theorem>(id);
}

double solve_G(const EllFunction& ell, double H) {
  if (!(H >= 0.0) || !std::isfinite(H)) throw DomainError("solve_G: H must be finite and >= 0");
  if (H == 0.0) return 0.0;
  const auto excess = [&](double u) { return u * u - 2.0 * ell(2.0 * u) * H; };

  int last_inside = -61;  // largest k with excess(H 2^k) <= 0
  for (int k = -60; k <= 200; ++k)
    if (excess(std::ldexp(H, k)) <= 0.0) last_inside = k;
  if (last_inside == 200)
    throw DomainError("solve_G: u^2 <= 2 ell(2u) H still holds at u = H*2^200 for ell = " +
                      ell.describe() + "; ell is not sub-quadratic");

  double lo = last_inside < -60 ? 0.0 : std::ldexp(H, last_inside);
  double hi = std::ldexp(H, last_inside + 1);
  for (int iter = 0; iter < 60; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (excess(mid) <= 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

ConstantsBundle constants_for_theorem(Theorem theorem, const ProblemStats& stats,
                                      const EllFunction& ell, std::optional<double> delta,
                                      double epsilon) {
  const int id = theorem_id(theorem);
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon", "epsilon must be positive");
  if (stats.n == 0) throw ConfigError("n", "component count must be positive");
  if (!(stats.delta1 >= 0.0) || !std::isfinite(stats.delta1))
    throw ConfigError("delta1", "initial gap F(w0) - F* must be finite and >= 0");
  if (!(stats.A >= 0.0)) throw ConfigError("A", "A must be >= 0");
  if (!(stats.sigma >= 0.0)) throw ConfigError("sigma", "sigma must be >= 0");

  const bool needs_delta = id == 1 || id == 3 || id == 5;
  if (needs_delta) {
    if (!delta) throw ConfigError("delta", "theorem " + std::to_string(id) + " requires delta");
    if (!(*delta > 0.0 && *delta < 1.0)) throw ConfigError("delta", "delta must lie in (0, 1)");
  }
  const bool needs_mu = id == 3 || id == 4;
  if (needs_mu && !(stats.mu && *stats.mu > 0.0))
    throw ConfigError("mu", "theorem " + std::to_string(id) + " requires strong convexity mu > 0");
  const bool needs_sigma_star = id == 4 || id == 5;
  if (needs_sigma_star && !(stats.sigma_star && *stats.sigma_star >= 0.0))
    throw ConfigError("sigma_star", "theorem " + std::to_string(id) + " requires sigma_star");
  const bool needs_dist = id == 5 || id == 6;
  if (needs_dist && !(stats.dist0_sq && *stats.dist0_sq >= 0.0))
    throw ConfigError("dist0_sq", "theorem " + std::to_string(id) + " requires |w0 - w*|^2");
  const bool needs_sublevel = id == 4 || id == 6;
  if (needs_sublevel && !(stats.gprime_sublevel && *stats.gprime_sublevel > 0.0))
    throw ConfigError("gprime_sublevel",
                      "theorem " + std::to_string(id) + " requires a positive sublevel gradient bound");

  ConstantsBundle c;
  c.theorem = theorem;
  c.epsilon = epsilon;
  c.delta = needs_delta ? delta : std::nullopt;
  c.delta1 = stats.delta1;
  c.n = stats.n;
  c.A = stats.A;
  c.sigma = stats.sigma;
  c.mu = stats.mu;
  c.sigma_star = stats.sigma_star;
  c.dist0_sq = stats.dist0_sq;
  c.ell = ell.describe();
  c.heuristic = stats.estimated || needs_sublevel;

  if (needs_sublevel) {
    c.Gprime = *stats.gprime_sublevel;
  } else {
    double H = 0.0;
    switch (theorem) {
      case Theorem::NonconvexReshuffle:
      case Theorem::ConvexReshuffle:
        H = 4.0 * stats.delta1 / *delta;
        break;
      case Theorem::NonconvexAnyOrder:
        H = 2.0 * stats.delta1;
        break;
      case Theorem::StronglyConvexReshuffle:
        H = std::max(3.0 * stats.sigma * stats.sigma / (4.0 * *stats.mu) * std::log(4.0 / epsilon) +
                         stats.delta1,
                     4.0 * stats.delta1 / *delta);
        break;
      default:
        break;
    }
    c.H = H;
    c.G = solve_G(ell, H);
    const double n = static_cast<double>(stats.n);
    c.Gprime = std::sqrt(2.0 * (1.0 + n * stats.A)) * *c.G + std::sqrt(2.0 * n) * stats.sigma;
  }
  c.L = ell(2.0 * c.Gprime);
  return c;
}

std::vector<Precondition> evaluate_preconditions(const ConstantsBundle& c, double eta_in,
                                                 std::uint64_t epochs) {
  const real eta = eta_in;
  const real T = static_cast<real>(epochs);
  const Terms t = terms_of(c);
  std::vector<Precondition> out;
  switch (c.theorem) {
    case Theorem::NonconvexReshuffle: {
      const real delta = required(c.delta);
      out.push_back(make_check("eta_max", "<=", eta, eta_cap_reshuffle(t)));
      out.push_back(make_check("sum_eta_cubed", "<=", T * eta * eta * eta,
                               bound_div(t.n * t.delta1, t.L * t.L * t.sigma * t.sigma)));
      out.push_back(make_check("epochs_min", ">=", T,
                               bound_div(32 * t.delta1, eta * delta * t.eps * t.eps)));
      break;
    }
    case Theorem::NonconvexAnyOrder: {
      out.push_back(make_check("eta_max", "<=", eta, eta_cap_any(t)));
      out.push_back(make_check("sum_eta_cubed", "<=", T * eta * eta * eta,
                               bound_div(2 * t.delta1, 3 * t.sigma * t.sigma * t.L * t.L)));
      out.push_back(make_check("epochs_min", ">=", T, bound_div(8 * t.delta1, eta * t.eps * t.eps)));
      break;
    }
    case Theorem::StronglyConvexReshuffle: {
      const real mu = required(c.mu);
      const real delta = required(c.delta);
      const real lg = std::log(std::sqrt(t.n) * T);
      out.push_back(make_check("eta_formula", "==", eta, 4 * lg / (mu * T)));
      out.push_back(make_check("epochs_min", ">=", T, 4 * std::sqrt(t.delta1 / (t.n * delta * t.eps))));
      const auto terms = t3_terms(c, T);
      const char* names[] = {"ratio_vs_2", "ratio_vs_L", "ratio_vs_sigma", "ratio_vs_cubic"};
      const real ratio = lg > 0 ? T / lg : real(0);
      for (std::size_t k = 0; k < terms.size(); ++k)
        out.push_back(make_check(names[k], ">=", ratio, 4 / mu * terms[k]));
      break;
    }
    case Theorem::StronglyConvexAnyOrder: {
      const real mu = required(c.mu);
      const real lg = std::log(T);
      out.push_back(make_check("eta_formula", "==", eta, 6 * lg / (mu * T)));
      out.push_back(make_check("eta_max", "<=", eta, t4_eta_cap(c)));
      out.push_back(make_check("epochs_min", ">=", T, 12 * t.L * t.L * lg / (mu * mu)));
      break;
    }
    case Theorem::ConvexReshuffle: {
      const real delta = required(c.delta);
      const real ss = required(c.sigma_star);
      const real d2 = required(c.dist0_sq);
      out.push_back(make_check("eta_max", "<=", eta, eta_cap_reshuffle(t)));
      out.push_back(make_check("eta_variance", "<=", eta,
                               std::cbrt(bound_div(t.n * t.delta1, T * t.sigma * t.sigma * t.L * t.L))));
      out.push_back(make_check("eta_optimum", "<=", eta,
                               std::cbrt(bound_div(3 * t.n * d2, 2 * t.L * T * ss * ss))));
      out.push_back(make_check("epochs_min", ">=", T, bound_div(4 * d2, eta * delta * t.eps)));
      break;
    }
    case Theorem::ConvexAnyOrder: {
      const real d2 = required(c.dist0_sq);
      out.push_back(make_check("eta_max", "<=", eta, t6_eta_cap(c)));
      out.push_back(make_check("epochs_min", ">=", T, bound_div(d2, eta * t.eps)));
      break;
    }
  }
  return out;
}

bool StepsizePlan::satisfied() const noexcept {
  return !preconditions.empty() &&
         std::all_of(preconditions.begin(), preconditions.end(), [](const auto& p) { return p.holds; });
}

StepsizePlan stepsize_plan(const ConstantsBundle& c, std::optional<std::uint64_t> target) {
  if (target && *target == 0) throw UsageError("stepsize_plan: target epochs must be >= 1");
  if (!(c.L > 0.0) || !std::isfinite(c.L)) throw ConfigError("L", "L must be finite and positive");
  const Terms t = terms_of(c);

  switch (c.theorem) {
    case Theorem::NonconvexReshuffle: {
      const real delta = required(c.delta);
      const real cap = eta_cap_reshuffle(t);
      // sqrt(n) eps * cap is the suggested choice for eps <= 1/sqrt(n); the
      // third term keeps T eta^3 within budget once T = 32 D1/(eta delta eps^2).
      real suggested = std::sqrt(t.n) * t.eps * cap;
      if (t.sigma > 0)
        suggested = std::min(suggested, t.eps * std::sqrt(t.n * delta / 32) / (t.L * t.sigma));
      const real budget = bound_div(t.n * t.delta1, t.L * t.L * t.sigma * t.sigma);
      return plan_cubic_budget(c, cap, suggested, budget, 32 * t.delta1 / (delta * t.eps * t.eps),
                               target);
    }
    case Theorem::NonconvexAnyOrder: {
      const real cap = eta_cap_any(t);
      real suggested = t.eps * cap;
      if (t.sigma > 0) suggested = std::min(suggested, t.eps / (std::sqrt(real(12)) * t.sigma * t.L));
      const real budget = bound_div(2 * t.delta1, 3 * t.sigma * t.sigma * t.L * t.L);
      return plan_cubic_budget(c, cap, suggested, budget, 8 * t.delta1 / (t.eps * t.eps), target);
    }
    case Theorem::StronglyConvexReshuffle: {
      const real mu = required(c.mu);
      const real delta = required(c.delta);
      const real floor_T = 4 * std::sqrt(t.delta1 / (t.n * delta * t.eps));
      auto eta_of = [&](real T) { return 4 * std::log(std::sqrt(t.n) * T) / (mu * T); };
      auto need = [&](real T) {
        const auto terms = t3_terms(c, T);
        const real worst = *std::max_element(terms.begin(), terms.end());
        return std::max(floor_T, std::log(std::sqrt(t.n) * T) * 4 / mu * worst);
      };
      return plan_fixed_point(c, eta_of, need, target);
    }
    case Theorem::StronglyConvexAnyOrder: {
      const real mu = required(c.mu);
      const real cap = t4_eta_cap(c);
      auto eta_of = [&](real T) { return 6 * std::log(T) / (mu * T); };
      auto need = [&](real T) {
        const real lg = std::log(T);
        return std::max(12 * t.L * t.L * lg / (mu * mu), std::isinf(cap) ? real(0) : 6 * lg / (mu * cap));
      };
      return plan_fixed_point(c, eta_of, need, target);
    }
    case Theorem::ConvexReshuffle: {
      const real delta = required(c.delta);
      const real d2 = required(c.dist0_sq);
      auto feasible = [&](std::uint64_t T) {
        const real eta = t5_eta(c, static_cast<real>(T));
        return static_cast<real>(T) >= bound_div(4 * d2, eta * delta * t.eps);
      };
      if (target)
        return finish(c, static_cast<double>(t5_eta(c, static_cast<real>(*target))), *target, false,
                      true, "target epoch budget infeasible");
      // T * eta(T) is non-decreasing, so feasibility is monotone in T.
      std::uint64_t hi = 1;
      while (!feasible(hi)) {
        if (hi >= kMaxEpochs) throw InfeasibleError("epochs_min", "no admissible epoch budget below 2^62");
        hi *= 2;
      }
      std::uint64_t lo = hi / 2;  // infeasible (or 0)
      while (hi - lo > 1) {
        const std::uint64_t mid = lo + (hi - lo) / 2;
        if (feasible(mid))
          hi = mid;
        else
          lo = mid;
      }
      return finish(c, static_cast<double>(t5_eta(c, static_cast<real>(hi))), hi, false,
                    false, "no admissible stepsize");
    }
    case Theorem::ConvexAnyOrder: {
      if (!(c.Gprime > 0.0)) throw InfeasibleError("eta_max", "G' must be positive");
      const real d2 = required(c.dist0_sq);
      const real eta = t6_eta_cap(c);
      if (target) return finish(c, static_cast<double>(eta), *target, false, true, "target epoch budget infeasible");
      return finish(c, static_cast<double>(eta), ceil_epochs(bound_div(d2, eta * t.eps), "epochs_min"),
                    false, false, "no admissible stepsize");
    }
  }
  throw UsageError("stepsize_plan: unknown theorem");
}

SublevelEstimate estimate_Gprime_sublevel(const FiniteSumProblem& problem, std::size_t budget,
                                          const SublevelOptions& options) {
  if (budget == 0) throw UsageError("estimate_Gprime_sublevel: budget must be positive");
  const Vector w0 = problem.initial_point();
  const double level = problem.full_value(w0);
  const auto mu = problem.strong_convexity();
  const auto w_star = problem.optimum_point();
  const auto f_star = problem.optimum_value();

  Vector center;
  double radius = 0.0;
  if (options.radius) {
    center = w0;
    radius = *options.radius;
  } else if (mu && *mu > 0.0 && w_star && f_star) {
    center = *w_star;
    radius = std::sqrt(std::max(0.0, 2.0 * (level - *f_star) / *mu));
  } else if (mu && *mu > 0.0) {
    // |w0 - w*| <= |grad F(w0)|/mu and S lies within sqrt(2 D1/mu) <= that of w*.
    center = w0;
    radius = 2.0 * problem.full_gradient(w0).norm() / *mu;
  } else if (w_star) {
    // No curvature information: a ball twice as wide as |w0 - w*| around w*.
    center = *w_star;
    radius = 2.0 * (w0 - *w_star).norm();
  } else {
    throw UsageError("estimate_Gprime_sublevel: needs strong convexity, a known optimum or a radius");
  }

  SublevelEstimate est;
  Vector g(static_cast<Eigen::Index>(problem.dim()));
  const auto max_component_norm = [&](const Vector& w) {
    double best = 0.0;
    for (std::size_t i = 0; i < problem.size(); ++i) {
      problem.component_gradient(w, i, g);
      best = std::max(best, g.norm());
    }
    return best;
  };
  const auto consider = [&](const Vector& w) {
    ++est.evaluated;
    if (problem.full_value(w) <= level) {
      ++est.accepted;
      est.value = std::max(est.value, max_component_norm(w));
    }
  };

  consider(w0);
  if (w_star && est.evaluated < budget) consider(*w_star);

  auto engine = make_engine(options.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(problem.dim());
  Vector w(d);
  while (est.evaluated < budget) {
    Vector dir(d);
    for (Eigen::Index j = 0; j < d; ++j) dir[j] = gauss(engine);
    const double norm = dir.norm();
    const double r = radius * std::pow(unit(engine), 1.0 / static_cast<double>(d));
    w = center + (norm > 0.0 ? r / norm : 0.0) * dir;
    consider(w);
  }
  return est;
}

void write_plan(const StepsizePlan& plan, std::ostream& out) {
  const auto& c = plan.constants;
  const auto opt = [&](const char* key, const std::optional<double>& v) {
    if (v) out << key << " = " << fmt(*v) << '\n';
  };
  out << "# shufgrad stepsize plan\n";
  out << "theorem = " << theorem_id(c.theorem) << '\n';
  out << "eta = " << fmt(plan.eta) << '\n';
  out << "per_step = " << fmt(plan.per_step()) << '\n';
  out << "epochs = " << plan.epochs << '\n';
  out << "n = " << c.n << '\n';
  out << "epsilon = " << fmt(c.epsilon) << '\n';
  opt("delta", c.delta);
  out << "delta1 = " << fmt(c.delta1) << '\n';
  out << "A = " << fmt(c.A) << '\n';
  out << "sigma = " << fmt(c.sigma) << '\n';
  opt("mu", c.mu);
  opt("sigma_star", c.sigma_star);
  opt("dist0_sq", c.dist0_sq);
  opt("H", c.H);
  opt("G", c.G);
  out << "Gprime = " << fmt(c.Gprime) << '\n';
  out << "L = " << fmt(c.L) << '\n';
  out << "ell = " << c.ell << '\n';
  out << "heuristic = " << (c.heuristic ? "true" : "false") << '\n';
  for (const auto& p : plan.preconditions)
    out << "check." << p.name << " = " << fmt(p.lhs) << ' ' << p.relation << ' ' << fmt(p.rhs)
        << " margin=" << fmt(p.margin) << ' ' << (p.holds ? "ok" : "FAIL") << '\n';
}

PlanFile read_plan(std::istream& in) {
  PlanFile plan;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos)
      throw FormatError("plan file line " + std::to_string(lineno) + ": expected 'key = value'");
    plan.entries[line.substr(0, eq)] = line.substr(eq + 3);
  }
  const auto get = [&](const char* key) -> const std::string& {
    const auto it = plan.entries.find(key);
    if (it == plan.entries.end()) throw FormatError(std::string("plan file lacks '") + key + "'");
    return it->second;
  };
  try {
    plan.theorem = std::stoi(get("theorem"));
    plan.eta = std::stod(get("eta"));
    plan.epochs = std::stoull(get("epochs"));
    plan.n = std::stoull(get("n"));
  } catch (const std::logic_error& e) {
    throw FormatError(std::string("plan file: malformed number (") + e.what() + ")");
  }
  return plan;
}

}  // namespace shufgrad
