#include "shufgrad/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "shufgrad/error.hpp"

namespace shufgrad {

double mean(std::span<const double> values) {
  if (values.empty()) throw UsageError("mean of an empty sample");
  // Shifting by the first value keeps the mean of identical values exact.
  const double shift = values.front();
  double sum = 0.0;
  for (double v : values) sum += v - shift;
  return shift + sum / static_cast<double>(values.size());
}

double sample_stddev(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double percentile(std::span<const double> values, double q) {
  if (values.empty()) throw UsageError("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw UsageError("percentile: q must lie in [0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace shufgrad
