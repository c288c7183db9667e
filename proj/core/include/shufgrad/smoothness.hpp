#ifndef SHUFGRAD_SMOOTHNESS_HPP
#define SHUFGRAD_SMOOTHNESS_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shufgrad/ell.hpp"
#include "shufgrad/problems.hpp"

namespace shufgrad {

/// The six convergence guarantees a plan can be built for.
enum class Theorem : int {
  NonconvexReshuffle = 1,
  NonconvexAnyOrder = 2,
  StronglyConvexReshuffle = 3,
  StronglyConvexAnyOrder = 4,
  ConvexReshuffle = 5,
  ConvexAnyOrder = 6,
};

Theorem theorem_from_id(int id);
inline int theorem_id(Theorem t) noexcept { return static_cast<int>(t); }

/// G = sup{u >= 0 : u^2 <= 2 ell(2u) H}.
///
/// Scans u = H * 2^k for k = -60..200 and bisects (60 iterations) the last
/// sign change of u^2 - 2 ell(2u) H. Assumes a single positive crossing,
/// which holds for the constant, affine and power families. Returns 0 when
/// H == 0. Throws DomainError when no crossing is found within the scan
/// (ell is not sub-quadratic numerically).
double solve_G(const EllFunction& ell, double H);

/// Problem-level quantities a theorem recipe consumes. Optional fields are
/// only required by the theorems that use them.
struct ProblemStats {
  double delta1 = 0.0;  // F(w0) - F*
  std::size_t n = 0;
  double A = 0.0;
  double sigma = 0.0;
  std::optional<double> mu;
  std::optional<double> sigma_star;
  std::optional<double> dist0_sq;         // |w0 - w*|^2
  std::optional<double> gprime_sublevel;  // max |grad f(w;i)| over {F <= F(w0)}
  bool estimated = false;                 // A/sigma come from an empirical fit
};

struct ConstantsBundle {
  Theorem theorem = Theorem::NonconvexReshuffle;
  double epsilon = 0.0;
  std::optional<double> delta;
  double delta1 = 0.0;
  std::size_t n = 0;
  double A = 0.0;
  double sigma = 0.0;
  std::optional<double> mu;
  std::optional<double> sigma_star;
  std::optional<double> dist0_sq;
  std::optional<double> H;  // absent for theorems 4 and 6
  std::optional<double> G;
  double Gprime = 0.0;
  double L = 0.0;
  std::string ell;
  bool heuristic = false;  // some input is an empirical estimate
};

/// H per theorem, G = solve_G(ell, H), G' = sqrt(2(1+nA)) G + sqrt(2n) sigma
/// (theorems 1, 2, 3, 5) or the sublevel bound (4, 6), and L = ell(2 G').
/// Throws ConfigError naming the first missing or invalid field.
ConstantsBundle constants_for_theorem(Theorem theorem, const ProblemStats& stats,
                                      const EllFunction& ell, std::optional<double> delta,
                                      double epsilon);

/// One inequality of a theorem statement evaluated at (eta, T).
struct Precondition {
  std::string name;
  std::string relation;  // "<=", ">=" or "=="
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  /// Relative slack, positive when satisfied: (rhs - lhs)/|rhs| for "<=".
  double margin = 0.0;
};

struct StepsizePlan {
  ConstantsBundle constants;
  double eta = 0.0;  // epoch stepsize; the per-component step is eta / n
  std::uint64_t epochs = 0;
  std::vector<Precondition> preconditions;

  bool satisfied() const noexcept;
  double per_step() const noexcept { return eta / static_cast<double>(constants.n); }
};

/// Evaluates every inequality of the bundle's theorem at (eta, epochs).
std::vector<Precondition> evaluate_preconditions(const ConstantsBundle& constants, double eta,
                                                 std::uint64_t epochs);

/// Chooses a constant eta and an epoch budget satisfying every inequality of
/// the bundle's theorem.
///
/// Without a target, eta follows the theorem's suggested recipe (capped by
/// its upper bounds) and T is the smallest admissible value. With a target
/// T, eta is reduced as needed. Theorems 3 and 4 tie eta to log T; T is found
/// by fixed-point iteration from T = 2 (at most 100 rounds). Throws
/// InfeasibleError naming the binding constraint.
StepsizePlan stepsize_plan(const ConstantsBundle& constants,
                           std::optional<std::uint64_t> target_epochs = std::nullopt);

struct SublevelEstimate {
  double value = 0.0;          // a lower estimate of G'
  std::size_t accepted = 0;    // sampled points inside the sublevel set
  std::size_t evaluated = 0;   // points drawn
  bool heuristic = true;
};

struct SublevelOptions {
  std::uint64_t seed = 0;
  /// Sampling radius around w0 when neither w* nor strong convexity is known.
  std::optional<double> radius;
};

/// max over sampled w in S = {F(w) <= F(w0)} and i of |grad f(w; i)|.
/// Samples uniformly from a ball that contains S (around w* with radius
/// sqrt(2 (F(w0) - F*)/mu) when known). Estimates are nested in the budget:
/// a larger budget with the same seed never decreases the value.
SublevelEstimate estimate_Gprime_sublevel(const FiniteSumProblem& problem, std::size_t budget,
                                          const SublevelOptions& options = {});

/// key = value report with every constant and precondition.
void write_plan(const StepsizePlan& plan, std::ostream& out);

/// Parsed plan file: the flat key/value map plus the fields arms need.
struct PlanFile {
  int theorem = 0;
  double eta = 0.0;
  std::uint64_t epochs = 0;
  std::size_t n = 0;
  std::map<std::string, std::string> entries;
};

PlanFile read_plan(std::istream& in);

}  // namespace shufgrad

#endif  // SHUFGRAD_SMOOTHNESS_HPP
