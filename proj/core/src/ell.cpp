#include "shufgrad/ell.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <vector>

#include "shufgrad/error.hpp"

namespace shufgrad {

namespace {

double parse_number(std::string_view text) {
  const auto slash = text.find('/');
  if (slash != std::string_view::npos) {
    const double num = parse_number(text.substr(0, slash));
    const double den = parse_number(text.substr(slash + 1));
    if (den == 0.0) throw UsageError("ell spec: zero denominator in '" + std::string(text) + "'");
    return num / den;
  }
  double value = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw UsageError("ell spec: cannot parse number '" + std::string(text) + "'");
  return value;
}

std::vector<double> parse_list(std::string_view text) {
  std::vector<double> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    out.push_back(parse_number(text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

EllFunction EllFunction::constant(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw UsageError("constant ell requires c > 0");
  EllFunction f;
  f.family_ = Family::Constant;
  f.a_ = c;
  f.degree_ = 0.0;
  return f;
}

EllFunction EllFunction::affine(double l0, double l1) {
  if (!(l0 > 0.0) || !(l1 >= 0.0) || !std::isfinite(l0) || !std::isfinite(l1))
    throw UsageError("affine ell requires l0 > 0 and l1 >= 0");
  EllFunction f;
  f.family_ = Family::Affine;
  f.a_ = l0;
  f.b_ = l1;
  f.degree_ = l1 > 0.0 ? 1.0 : 0.0;
  return f;
}

EllFunction EllFunction::power(double c, double q, double c0) {
  if (!(c > 0.0) || !(q >= 0.0) || !(q < 2.0) || !(c0 >= 0.0) || !std::isfinite(c) ||
      !std::isfinite(c0))
    throw UsageError("power ell requires c > 0, 0 <= q < 2, c0 >= 0");
  EllFunction f;
  f.family_ = Family::Power;
  f.a_ = c;
  f.b_ = q;
  f.c_ = c0;
  f.degree_ = q;
  return f;
}

EllFunction EllFunction::custom(std::function<double(double)> fn, double degree, std::string name) {
  if (!fn) throw UsageError("custom ell requires a callable");
  if (!(degree >= 0.0) || !(degree < 2.0)) throw UsageError("custom ell degree must lie in [0, 2)");
  EllFunction f;
  f.family_ = Family::Custom;
  f.custom_ = std::move(fn);
  f.degree_ = degree;
  f.name_ = std::move(name);
  return f;
}

EllFunction EllFunction::parse(std::string_view spec) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) throw UsageError("ell spec must look like 'family:params'");
  const std::string_view family = spec.substr(0, colon);
  const auto params = parse_list(spec.substr(colon + 1));
  if (family == "const" || family == "constant") {
    if (params.size() != 1) throw UsageError("const ell takes one parameter");
    return constant(params[0]);
  }
  if (family == "affine") {
    if (params.size() != 2) throw UsageError("affine ell takes two parameters");
    return affine(params[0], params[1]);
  }
  if (family == "power") {
    if (params.size() != 2 && params.size() != 3)
      throw UsageError("power ell takes two or three parameters");
    return power(params[0], params[1], params.size() == 3 ? params[2] : 0.0);
  }
  throw UsageError("unknown ell family '" + std::string(family) + "'");
}

double EllFunction::operator()(double u) const {
  if (!(u >= 0.0)) throw DomainError("ell evaluated at negative or NaN argument");
  switch (family_) {
    case Family::Constant:
      return a_;
    case Family::Affine:
      return a_ + b_ * u;
    case Family::Power:
      return a_ * std::pow(u, b_) + c_;
    case Family::Custom:
      return custom_(u);
  }
  return a_;
}

std::string EllFunction::describe() const {
  switch (family_) {
    case Family::Constant:
      return "const:" + format_double(a_);
    case Family::Affine:
      return "affine:" + format_double(a_) + "," + format_double(b_);
    case Family::Power:
      return "power:" + format_double(a_) + "," + format_double(b_) + "," + format_double(c_);
    case Family::Custom:
      return "custom:" + name_;
  }
  return {};
}

EllProperties check_ell_properties(const EllFunction& ell) {
  EllProperties props;
  props.positive_at_zero = ell(0.0) > 0.0;

  props.non_decreasing = true;
  double prev = ell(0.0);
  for (int k = -60; k <= 90; ++k) {
    const double value = ell(std::pow(10.0, k / 10.0));
    if (value < prev) props.non_decreasing = false;
    prev = value;
  }

  props.sub_quadratic = true;
  double prev_ratio = INFINITY;
  for (int k = 3; k <= 9; ++k) {
    const double u = std::pow(10.0, k);
    const double ratio = ell(u) / (u * u);
    if (!(ratio < prev_ratio)) props.sub_quadratic = false;
    prev_ratio = ratio;
  }
  return props;
}

}  // namespace shufgrad
