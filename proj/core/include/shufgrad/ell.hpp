#ifndef SHUFGRAD_ELL_HPP
#define SHUFGRAD_ELL_HPP

#include <functional>
#include <string>
#include <string_view>

namespace shufgrad {

/// A non-decreasing bound ell(u) on the Hessian norm as a function of the
/// gradient norm u. Constant ell is ordinary Lipschitz smoothness, affine ell
/// is (L0, L1)-smoothness.
///
/// The degree p (growth exponent) is declared per family rather than estimated.
/// Every family here is sub-quadratic (p < 2), which keeps the gradient bound
/// sup{u : u^2 <= 2 ell(2u) H} finite.
class EllFunction {
 public:
  enum class Family { Constant, Affine, Power, Custom };

  static EllFunction constant(double c);
  /// ell(u) = l0 + l1 * u
  static EllFunction affine(double l0, double l1);
  /// ell(u) = c * u^q + c0. With c0 == 0 the value at u = 0 is zero, which is
  /// how the convex quartic benchmark's ell is stated; positivity then holds
  /// only for u > 0.
  static EllFunction power(double c, double q, double c0 = 0.0);
  static EllFunction custom(std::function<double(double)> f, double degree, std::string name);

  /// Parses "const:c", "affine:l0,l1" or "power:c,q[,c0]"; q may be a
  /// fraction such as "2/3".
  static EllFunction parse(std::string_view spec);

  double operator()(double u) const;

  Family family() const noexcept { return family_; }
  double degree() const noexcept { return degree_; }
  /// Round-trippable through parse() for the closed-form families.
  std::string describe() const;

 private:
  EllFunction() = default;

  Family family_ = Family::Constant;
  double a_ = 1.0;  // c, l0 or c
  double b_ = 0.0;  // -, l1 or q
  double c_ = 0.0;  // -, -, c0
  double degree_ = 0.0;
  std::function<double(double)> custom_;
  std::string name_;
};

/// Numerical sanity checks for the ell-function invariants.
struct EllProperties {
  bool non_decreasing = false;   // on a log-spaced grid 1e-6 .. 1e9
  bool positive_at_zero = false;
  bool sub_quadratic = false;    // ell(u)/u^2 strictly decreasing at u = 1e3..1e9
};

EllProperties check_ell_properties(const EllFunction& ell);

}  // namespace shufgrad

#endif  // SHUFGRAD_ELL_HPP
