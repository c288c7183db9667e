#ifndef SHUFGRAD_STATISTICS_HPP
#define SHUFGRAD_STATISTICS_HPP

#include <span>

namespace shufgrad {

double mean(std::span<const double> values);

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_stddev(std::span<const double> values);

/// Linear interpolation between order statistics at position q * (n - 1).
/// q must lie in [0, 1]; values need not be sorted.
double percentile(std::span<const double> values, double q);

}  // namespace shufgrad

#endif  // SHUFGRAD_STATISTICS_HPP
