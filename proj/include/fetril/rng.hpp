#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace fetril {

/// SplitMix64 finalizer; used to derive independent streams from (seed, key).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (key + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t key) { return Rng(mix_seed(seed, key)); }

/// Uniform sample of `count` distinct indices from [0, n), in draw order.
/// Partial Fisher-Yates; requires count <= n.
inline std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n, std::size_t count) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(perm[i], perm[pick(rng)]);
  }
  perm.resize(count);
  return perm;
}

}  // namespace fetril
