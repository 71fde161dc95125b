#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "maxcover/mpc.hpp"
#include "maxcover/mwu.hpp"
#include "maxcover/set_system.hpp"

// Sequential reference algorithms used to certify the distributed pipeline.
namespace maxcover {

struct OptResult {
  std::int64_t opt = 0;
  Selection witness;
};

// Largest number of k-subsets exact_opt will enumerate.
inline constexpr std::int64_t kMaxEnumeratedSubsets = 10'000'000;

// C(m, k), saturating at kMaxEnumeratedSubsets + 1.
std::int64_t bounded_binomial(std::int64_t m, std::int64_t k);

// Exhaustive search over all k-subsets; the witness is the lexicographically
// smallest maximizer. Throws ValidationError when C(m, k) exceeds the guard.
OptResult exact_opt(const SetSystem& sys, std::int64_t k);

// k picks of maximum marginal gain, lowest index on ties. Exactly min(k, m)
// distinct sets, even when the remaining gains are zero.
Selection greedy_sequential(const SetSystem& sys, std::int64_t k);

// The same greedy on the cluster: each step reduces (gain, index) pairs up
// the convergecast tree and broadcasts the winner's element list.
Selection greedy_fallback(const SetSystem& sys, std::int64_t k, mpc::Cluster& cluster);

struct BruteForceOracle {
  Fixed min_lhs = 0;
  std::vector<std::uint8_t> x;
  std::vector<std::uint8_t> z;
};

// floor(w_i / f_i * 2^fraction_bits), computed through exact rationals.
std::vector<Fixed> truncated_prices(std::span<const double> weights, const FrequencyVector& f,
                                    int fraction_bits);

// Minimizes sum p_hat.x + q_hat.z over all binary x with |x| = L and z with
// |z| = m - k by enumeration, where q_hat_j sums p_hat over S_j. Requires
// n <= 12 and m <= 8.
BruteForceOracle oracle_bruteforce(std::span<const double> weights, const FrequencyVector& f,
                                   const SetSystem& sys, std::int64_t L, int fraction_bits);

}  // namespace maxcover
