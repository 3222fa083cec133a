// Counter-based random streams.
//
// Draw k (k = 0, 1, ...) of the stream keyed by `key` is
//   splitmix64_mix(key + (k + 1) * 0x9E3779B97F4A7C15)
// so any draw is a pure function of (key, k). Stream keys for a simulation
// cell are derived with stream_key(seed, rep, role) by chaining the same mix:
//   key = mix(mix(mix(seed) ^ rep) ^ role)
// which lets cells run in any order or in parallel and reproduce exactly.
#pragma once

#include "coke/core.hpp"

#include <algorithm>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

namespace coke {

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

enum class StreamRole : std::uint64_t {
  kSource = 1,
  kTarget = 2,
  kEval = 3,
  kSplit = 4,
  kMethod = 5,
};

constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t rep, StreamRole role) {
  return splitmix64_mix(splitmix64_mix(splitmix64_mix(seed) ^ rep) ^ static_cast<std::uint64_t>(role));
}

/// Derives an independent child key, e.g. for a nested split inside a method.
constexpr std::uint64_t child_key(std::uint64_t key, std::uint64_t salt) {
  return splitmix64_mix(key ^ splitmix64_mix(salt + 0x632BE59BD9B4E019ULL));
}

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() {
    ++counter_;
    return splitmix64_mix(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, bound) via the high half of a 128-bit product.
  std::uint64_t below(std::uint64_t bound) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal by Box-Muller; consumes two draws per call.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Fisher-Yates permutation of 0..n-1.
inline std::vector<Index> permutation(Index n, CounterRng& rng) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  return idx;
}

/// Random partition of 0..n-1 into sizes ceil(n/2) and floor(n/2). Each part
/// is returned in increasing order.
inline std::pair<std::vector<Index>, std::vector<Index>> split_halves(Index n, std::uint64_t key) {
  CounterRng rng(key);
  auto perm = permutation(n, rng);
  const auto first = static_cast<std::ptrdiff_t>((n + 1) / 2);
  std::vector<Index> a(perm.begin(), perm.begin() + first);
  std::vector<Index> b(perm.begin() + first, perm.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {std::move(a), std::move(b)};
}

}  // namespace coke
