#ifndef SHUFGRAD_RANDOM_HPP
#define SHUFGRAD_RANDOM_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace shufgrad {

/// SplitMix64 finalizer; a bijection on 64-bit words.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Order-sensitive hash of a short list of words. Stable across versions:
/// experiment seeds and permutation streams are derived from it.
std::uint64_t hash64(std::initializer_list<std::uint64_t> words) noexcept;

/// Counter-based generator: the k-th draw of stream `key` is mix64(key + k*phi).
/// Any draw can be recomputed from (key, k) alone, so streams never share state.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept;

  /// Uniform integer in [0, bound) by rejection; bound must be positive.
  std::uint64_t below(std::uint64_t bound) noexcept;

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

/// Engine for Gaussian data generation. Deterministic for a given seed and
/// standard library build.
std::mt19937_64 make_engine(std::uint64_t seed);

}  // namespace shufgrad

#endif  // SHUFGRAD_RANDOM_HPP
