#ifndef SHUFGRAD_ERROR_HPP
#define SHUFGRAD_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace shufgrad {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller violated an API precondition (bad index, empty input, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A numeric argument lies outside the function's domain (NaN, inf, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Missing or inconsistent configuration; `field()` names the culprit.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Malformed input file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// No stepsize/epoch pair satisfies the requested theorem; `constraint()`
/// names the binding inequality.
class InfeasibleError : public Error {
 public:
  InfeasibleError(std::string constraint, const std::string& what)
      : Error(what), constraint_(std::move(constraint)) {}
  const std::string& constraint() const noexcept { return constraint_; }

 private:
  std::string constraint_;
};

/// Root finding could not bracket or locate a solution.
class BracketError : public Error {
 public:
  BracketError(double lo, double hi, const std::string& what)
      : Error(what), lo_(lo), hi_(hi) {}
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }

 private:
  double lo_;
  double hi_;
};

/// An optimizer produced a non-finite iterate.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t epoch, std::size_t step, double last_finite_objective,
                  const std::string& what)
      : Error(what),
        epoch_(epoch),
        step_(step),
        last_finite_objective_(last_finite_objective) {}
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t step() const noexcept { return step_; }
  double last_finite_objective() const noexcept { return last_finite_objective_; }

 private:
  std::size_t epoch_;
  std::size_t step_;
  double last_finite_objective_;
};

}  // namespace shufgrad

#endif  // SHUFGRAD_ERROR_HPP
