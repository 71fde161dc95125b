#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace maxcover {

// mt19937_64 is fully specified by the standard, so streams are identical on
// every platform. The distributions in <random> are not, hence the helpers.
using Rng = std::mt19937_64;

// Uniform draw from [0, bound) by rejection; bound must be > 0.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit = bound * ((~std::uint64_t{0}) / bound);
  std::uint64_t v;
  do {
    v = rng();
  } while (limit != 0 && v >= limit);
  return v % bound;
}

// splitmix64 finalizer; used to give each pipeline stage its own stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + (stream + 1) * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// True with probability p (p clamped to [0, 1]), resolved on a 2^-64 grid.
inline bool bernoulli(Rng& rng, double p) {
  if (p >= 1.0) return true;
  if (p <= 0.0) return false;
  const auto threshold = static_cast<std::uint64_t>(std::ldexp(p, 64));
  return rng() < threshold;
}

}  // namespace maxcover
