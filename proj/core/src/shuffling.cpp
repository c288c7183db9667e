#include "shufgrad/shuffling.hpp"

#include <algorithm>
#include <cassert>
#include <numeric>
#include <ostream>

#include "shufgrad/error.hpp"
#include "shufgrad/random.hpp"

namespace shufgrad {

namespace {

constexpr std::uint64_t kShuffleOnceTag = 0x534F;  // "SO"
constexpr std::uint64_t kReshuffleTag = 0x5252;    // "RR"

void fisher_yates(std::uint64_t key, std::vector<std::size_t>& out) {
  CounterRng rng(key);
  for (std::size_t i = out.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(out[i - 1], out[j]);
  }
}

[[maybe_unused]] bool is_bijection(const std::vector<std::size_t>& perm) {
  std::vector<char> seen(perm.size(), 0);
  for (std::size_t v : perm) {
    if (v >= perm.size() || seen[v]) return false;
    seen[v] = 1;
  }
  return true;
}

}  // namespace

std::string_view to_string(SchemeKind kind) noexcept {
  switch (kind) {
    case SchemeKind::Fixed:
      return "fixed";
    case SchemeKind::ShuffleOnce:
      return "shuffle_once";
    case SchemeKind::RandomReshuffle:
      return "random_reshuffle";
    case SchemeKind::Explicit:
      return "explicit";
  }
  return "unknown";
}

SchemeKind parse_scheme_kind(std::string_view text) {
  if (text == "fixed") return SchemeKind::Fixed;
  if (text == "shuffle_once" || text == "so") return SchemeKind::ShuffleOnce;
  if (text == "random_reshuffle" || text == "rr") return SchemeKind::RandomReshuffle;
  if (text == "explicit") return SchemeKind::Explicit;
  throw UsageError("unknown shuffling scheme '" + std::string(text) + "'");
}

Scheme Scheme::fixed(std::size_t n) {
  if (n == 0) throw UsageError("scheme: n must be positive");
  return Scheme(SchemeKind::Fixed, n, 0);
}

Scheme Scheme::shuffle_once(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw UsageError("scheme: n must be positive");
  Scheme s(SchemeKind::ShuffleOnce, n, seed);
  s.order_.resize(n);
  std::iota(s.order_.begin(), s.order_.end(), std::size_t{0});
  fisher_yates(hash64({seed, kShuffleOnceTag}), s.order_);
  return s;
}

Scheme Scheme::random_reshuffle(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw UsageError("scheme: n must be positive");
  return Scheme(SchemeKind::RandomReshuffle, n, seed);
}

Scheme Scheme::explicit_order(std::vector<std::size_t> order) {
  if (order.empty()) throw UsageError("scheme: n must be positive");
  if (!is_bijection(order)) throw UsageError("scheme: explicit order is not a permutation");
  Scheme s(SchemeKind::Explicit, order.size(), 0);
  s.order_ = std::move(order);
  return s;
}

Scheme Scheme::make(SchemeKind kind, std::size_t n, std::uint64_t seed) {
  switch (kind) {
    case SchemeKind::Fixed:
      return fixed(n);
    case SchemeKind::ShuffleOnce:
      return shuffle_once(n, seed);
    case SchemeKind::RandomReshuffle:
      return random_reshuffle(n, seed);
    case SchemeKind::Explicit:
      break;
  }
  throw UsageError("scheme: explicit orders must be built with Scheme::explicit_order");
}

std::vector<std::size_t> Scheme::permutation_for_epoch(std::size_t t) const {
  std::vector<std::size_t> out;
  permutation_for_epoch(t, out);
  return out;
}

void Scheme::permutation_for_epoch(std::size_t t, std::vector<std::size_t>& out) const {
  if (n_ == 0) throw UsageError("scheme: n must be positive");
  if (t == 0) throw UsageError("scheme: epochs are numbered from 1");
  switch (kind_) {
    case SchemeKind::Fixed:
      out.resize(n_);
      std::iota(out.begin(), out.end(), std::size_t{0});
      break;
    case SchemeKind::ShuffleOnce:
    case SchemeKind::Explicit:
      out = order_;
      break;
    case SchemeKind::RandomReshuffle:
      out.resize(n_);
      std::iota(out.begin(), out.end(), std::size_t{0});
      fisher_yates(hash64({seed_, kReshuffleTag, static_cast<std::uint64_t>(t)}), out);
      break;
  }
  assert(is_bijection(out));
}

std::vector<std::size_t> gradient_norm_order(const FiniteSumProblem& problem, const Vector& w) {
  const std::size_t n = problem.size();
  std::vector<double> norms(n);
  Vector g(w.size());
  for (std::size_t i = 0; i < n; ++i) {
    problem.component_gradient(w, i, g);
    norms[i] = g.norm();
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });
  return order;
}

void dump_permutations(const Scheme& scheme, std::size_t epochs, std::ostream& out) {
  std::vector<std::size_t> perm;
  for (std::size_t t = 1; t <= epochs; ++t) {
    scheme.permutation_for_epoch(t, perm);
    for (std::size_t j = 0; j < perm.size(); ++j) {
      if (j) out << ' ';
      out << perm[j] + 1;
    }
    out << '\n';
  }
}

boost::rational<std::int64_t> without_replacement_variance_factor(std::int64_t n, std::int64_t k) {
  if (n < 2) throw UsageError("variance factor: need n >= 2");
  if (k < 1 || k > n) throw UsageError("variance factor: need 1 <= k <= n");
  return {n - k, k * (n - 1)};
}

}  // namespace shufgrad
