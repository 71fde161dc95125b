#pragma once

#include <cstdint>
#include <cmath>
#include <vector>

#include "maxcover/mpc.hpp"
#include "maxcover/rational.hpp"
#include "maxcover/set_system.hpp"

namespace maxcover::testing {

// [[1,2],[2,3],[3,4]] over n = 4.
inline SetSystem path4(std::int64_t k = 2) {
  return SetSystem(4, k, {{1, 2}, {2, 3}, {3, 4}});
}

// Random instance with every element covered at least once.
inline SetSystem covered_instance(std::int64_t n, std::int64_t m, std::int64_t k, double density,
                                  std::uint64_t seed) {
  GeneratorParams params;
  params.n = n;
  params.m = m;
  params.k = k;
  params.density = density;
  params.seed = seed;
  return normalize_covered(generate_random(params)).system;
}

// Default budget regardless of MPC_MEM_C / MPC_MEM_E in the environment.
inline mpc::Cluster cluster_for(const SetSystem& sys) {
  return mpc::Cluster(static_cast<int>(sys.m()), sys.n(), mpc::MemoryModel{});
}

inline Rational exact_double(double v) {
  int exp = 0;
  const double mant = std::frexp(v, &exp);
  Rational r(static_cast<std::int64_t>(std::ldexp(mant, 53)));
  if (exp >= 53) return r * Rational(BigInt(1) << (exp - 53));
  return r / Rational(BigInt(1) << (53 - exp));
}

inline Rational fixed_to_rational(unsigned __int128 v, int fraction_bits) {
  BigInt b = BigInt(static_cast<std::uint64_t>(v >> 64));
  b <<= 64;
  b += static_cast<std::uint64_t>(v);
  return Rational(b) / Rational(BigInt(1) << fraction_bits);
}

}  // namespace maxcover::testing
