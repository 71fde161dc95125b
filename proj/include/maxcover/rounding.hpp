#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "maxcover/mpc.hpp"
#include "maxcover/mwu.hpp"
#include "maxcover/random.hpp"
#include "maxcover/rational.hpp"
#include "maxcover/set_system.hpp"

namespace maxcover {

struct RoundingConfig {
  Rational epsilon = Rational(1, 4);
  std::int64_t rep_c = 8;
  std::uint64_t seed = 0;

  // ceil(rep_c / epsilon * ln(m + 1)), at least 1.
  std::int64_t repetitions(std::int64_t m) const;
  // ceil(1/epsilon) candidates per broadcast, lowered when one batch's
  // coverage vectors would not fit a machine's inbox.
  std::int64_t batch_size(const mpc::Cluster& cluster, std::int64_t n) const;
};

// Draws set indices with Pr[j] = y_j / sum(y), using exact integer weights
// over the common denominator of y.
class CategoricalSampler {
 public:
  explicit CategoricalSampler(std::span<const Rational> weights);

  // 1-based set index.
  SetIndex draw(Rng& rng) const;

 private:
  bool small_ = true;
  std::vector<std::uint64_t> cumulative_;
  std::vector<BigInt> big_cumulative_;
  BigInt big_total_;
  std::uint64_t total_ = 0;
};

// k' independent draws from y / k', deduplicated. Requires sum(y) == k' and
// every y_j in [0, 1]; throws ContractViolation otherwise.
Selection randomized_round(std::span<const Rational> y, std::int64_t k_prime, std::uint64_t seed);

// Same draws with a prebuilt sampler.
Selection round_once(const CategoricalSampler& sampler, std::int64_t k_prime, std::uint64_t seed);

// Adjusts lp so that sum(y) == k' exactly while keeping every y_j in [0, 1]
// and x_i <= sum_{S_j contains i} y_j. A surplus is removed by scaling x and y
// by k'/sum(y); a deficit is filled by raising each y_j toward 1 in
// proportion to 1 - y_j.
LpSolution fit_to_budget(const LpSolution& lp, std::int64_t k_prime);

struct RoundingOutcome {
  Selection selection;
  std::int64_t coverage = 0;
  std::int64_t winner = 0;  // 0-based candidate index
  std::int64_t repetitions = 0;
  std::int64_t batch_size = 0;
};

// Generates cfg.repetitions(m) candidates at the central machine (candidate r
// seeded with cfg.seed ^ r), evaluates them batch by batch with a broadcast
// and a coverage convergecast, and broadcasts the best one (earliest on
// ties). Requires sum(y) == k'.
RoundingOutcome best_of_repetitions(const SetSystem& sys, const LpSolution& lp,
                                    std::int64_t k_prime, const RoundingConfig& cfg,
                                    mpc::Cluster& cluster);

}  // namespace maxcover
