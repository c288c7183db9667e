#ifndef SHUFGRAD_SHUFFLING_HPP
#define SHUFGRAD_SHUFFLING_HPP

#include <boost/rational.hpp>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "shufgrad/problems.hpp"

namespace shufgrad {

enum class SchemeKind {
  Fixed,            // identity order every epoch (incremental gradient)
  ShuffleOnce,      // one random order, reused every epoch
  RandomReshuffle,  // fresh independent order each epoch
  Explicit,         // caller-supplied order, reused every epoch
};

std::string_view to_string(SchemeKind kind) noexcept;
SchemeKind parse_scheme_kind(std::string_view text);

/// Permutation source for the shuffling optimizer. Permutations are a pure
/// function of (kind, seed, epoch): Fisher-Yates driven by a counter-based
/// stream keyed on hash64(seed, epoch), so epochs can be queried in any order.
class Scheme {
 public:
  static Scheme fixed(std::size_t n);
  static Scheme shuffle_once(std::size_t n, std::uint64_t seed);
  static Scheme random_reshuffle(std::size_t n, std::uint64_t seed);
  static Scheme explicit_order(std::vector<std::size_t> order);
  static Scheme make(SchemeKind kind, std::size_t n, std::uint64_t seed);

  SchemeKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return n_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// 0-based permutation of [0, n) used in epoch t (t >= 1).
  std::vector<std::size_t> permutation_for_epoch(std::size_t t) const;
  void permutation_for_epoch(std::size_t t, std::vector<std::size_t>& out) const;

 private:
  Scheme(SchemeKind kind, std::size_t n, std::uint64_t seed) : kind_(kind), n_(n), seed_(seed) {}

  SchemeKind kind_;
  std::size_t n_;
  std::uint64_t seed_;
  std::vector<std::size_t> order_;
};

/// Worst-observed ordering: components sorted by |grad f(w; i)| at w,
/// largest first (ties keep index order).
std::vector<std::size_t> gradient_norm_order(const FiniteSumProblem& problem, const Vector& w);

/// Writes epochs 1..epochs, one per line, as space-separated 1-based indices.
void dump_permutations(const Scheme& scheme, std::size_t epochs, std::ostream& out);

/// Variance ratio of a k-sample average drawn without replacement from n
/// items: E|mean_k - mean|^2 = (n-k)/(k(n-1)) * population variance.
boost::rational<std::int64_t> without_replacement_variance_factor(std::int64_t n, std::int64_t k);

}  // namespace shufgrad

#endif  // SHUFGRAD_SHUFFLING_HPP
