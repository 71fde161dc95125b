#include "maxcover/rounding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/multiprecision/integer.hpp>

#include "maxcover/errors.hpp"

namespace maxcover {

std::int64_t RoundingConfig::repetitions(std::int64_t m) const {
  if (epsilon <= 0) throw ValidationError("rounding epsilon must be positive");
  if (rep_c < 1) throw ValidationError("rep_c must be at least 1");
  const double r = std::ceil(static_cast<double>(rep_c) *
                             std::log(static_cast<double>(m) + 1.0) / to_double(epsilon));
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(r));
}

std::int64_t RoundingConfig::batch_size(const mpc::Cluster& cluster, std::int64_t n) const {
  if (epsilon <= 0) throw ValidationError("rounding epsilon must be positive");
  const auto wanted = static_cast<std::int64_t>(ceil(Rational(1) / epsilon));
  const int depth = mpc::ceil_log2(static_cast<std::uint64_t>(cluster.machine_count()));
  const std::int64_t per_candidate = std::max<std::int64_t>(n, 1) * (1 + depth);
  const std::int64_t fits = cluster.memory_budget_bits() / per_candidate;
  return std::max<std::int64_t>(1, std::min(wanted, fits));
}

CategoricalSampler::CategoricalSampler(std::span<const Rational> weights) {
  if (weights.empty()) throw ValidationError("sampler needs at least one weight");
  BigInt common = 1;
  for (const auto& w : weights) {
    if (w < 0) throw ValidationError("sampler weights must be non-negative");
    common = boost::multiprecision::lcm(common, boost::multiprecision::denominator(w));
  }
  std::vector<BigInt> scaled;
  scaled.reserve(weights.size());
  BigInt total = 0;
  for (const auto& w : weights) {
    scaled.push_back(boost::multiprecision::numerator(w) *
                     (common / boost::multiprecision::denominator(w)));
    total += scaled.back();
  }
  if (total == 0) throw ValidationError("sampler weights sum to zero");
  small_ = total <= BigInt(std::numeric_limits<std::uint64_t>::max());
  if (small_) {
    total_ = static_cast<std::uint64_t>(total);
    std::uint64_t running = 0;
    for (const auto& s : scaled) {
      running += static_cast<std::uint64_t>(s);
      cumulative_.push_back(running);
    }
  } else {
    big_total_ = total;
    BigInt running = 0;
    for (const auto& s : scaled) {
      running += s;
      big_cumulative_.push_back(running);
    }
  }
}

SetIndex CategoricalSampler::draw(Rng& rng) const {
  if (small_) {
    const std::uint64_t u = uniform_below(rng, total_);
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return static_cast<SetIndex>(it - cumulative_.begin()) + 1;
  }
  // Rejection over the smallest power of two covering the total.
  const auto bits = static_cast<unsigned>(boost::multiprecision::msb(big_total_)) + 1;
  BigInt u;
  do {
    u = 0;
    unsigned have = 0;
    while (have < bits) {
      u = (u << 64) | BigInt(rng());
      have += 64;
    }
    u >>= (have - bits);
  } while (u >= big_total_);
  const auto it = std::upper_bound(big_cumulative_.begin(), big_cumulative_.end(), u);
  return static_cast<SetIndex>(it - big_cumulative_.begin()) + 1;
}

Selection round_once(const CategoricalSampler& sampler, std::int64_t k_prime, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SetIndex> picks;
  picks.reserve(static_cast<std::size_t>(k_prime));
  for (std::int64_t t = 0; t < k_prime; ++t) picks.push_back(sampler.draw(rng));
  return Selection::from(std::move(picks));
}

namespace {

void require_budget(std::span<const Rational> y, std::int64_t k_prime) {
  if (k_prime < 1) throw ContractViolation("k' must be at least 1");
  Rational sum = 0;
  for (const auto& v : y) {
    if (v < 0 || v > 1) throw ContractViolation("y entries must lie in [0, 1]");
    sum += v;
  }
  if (sum != k_prime) {
    throw ContractViolation("sum of y is " + to_string(sum) + ", expected k' = " +
                            std::to_string(k_prime));
  }
}

}  // namespace

Selection randomized_round(std::span<const Rational> y, std::int64_t k_prime, std::uint64_t seed) {
  require_budget(y, k_prime);
  return round_once(CategoricalSampler(y), k_prime, seed);
}

LpSolution fit_to_budget(const LpSolution& lp, std::int64_t k_prime) {
  const auto m = static_cast<std::int64_t>(lp.y.size());
  if (k_prime < 1 || k_prime > m) throw ValidationError("k' must lie in [1, m]");
  Rational sum = 0;
  for (const auto& v : lp.y) sum += v;
  LpSolution out = lp;
  if (sum > k_prime) {
    const Rational factor = Rational(k_prime) / sum;
    out.objective = 0;
    for (auto& v : out.x) {
      v *= factor;
      out.objective += v;
    }
    for (auto& v : out.y) v *= factor;
  } else if (sum < k_prime) {
    // sum(1 - y) = m - sum >= k' - sum, so every raised y_j stays <= 1.
    const Rational share = (Rational(k_prime) - sum) / (Rational(m) - sum);
    for (auto& v : out.y) v += (Rational(1) - v) * share;
  }
  out.budget_used = k_prime;
  return out;
}

RoundingOutcome best_of_repetitions(const SetSystem& sys, const LpSolution& lp,
                                    std::int64_t k_prime, const RoundingConfig& cfg,
                                    mpc::Cluster& cluster) {
  const std::int64_t n = sys.n();
  const std::int64_t m = sys.m();
  if (static_cast<std::int64_t>(lp.y.size()) != m) throw ValidationError("y length differs from m");
  if (n < 1) throw ValidationError("rounding needs a non-empty universe");
  if (cluster.machine_count() < m) throw ValidationError("cluster has fewer machines than sets");
  require_budget(lp.y, k_prime);

  auto section = cluster.section("rounding");
  const CategoricalSampler sampler(lp.y);
  RoundingOutcome out;
  out.repetitions = cfg.repetitions(m);
  out.batch_size = std::min(out.repetitions, cfg.batch_size(cluster, n));
  if (out.batch_size * std::max<std::int64_t>(n, 1) > std::numeric_limits<std::int32_t>::max()) {
    throw ValidationError("rounding batch too large to index");
  }
  const int set_bits = mpc::bits_for(static_cast<std::uint64_t>(m));
  const int size_bits = mpc::bits_for(static_cast<std::uint64_t>(k_prime));

  std::vector<Selection> candidates;
  std::vector<std::vector<std::int32_t>> member_of(static_cast<std::size_t>(m));
  std::vector<mpc::Cluster::SparseVector> vectors(static_cast<std::size_t>(cluster.machine_count()));
  std::vector<std::int64_t> covered;
  out.coverage = -1;

  for (std::int64_t start = 0; start < out.repetitions; start += out.batch_size) {
    const std::int64_t stop = std::min(out.repetitions, start + out.batch_size);
    candidates.clear();
    for (auto& list : member_of) list.clear();
    std::int64_t payload = 0;
    for (std::int64_t r = start; r < stop; ++r) {
      candidates.push_back(round_once(sampler, k_prime, cfg.seed ^ static_cast<std::uint64_t>(r)));
      const auto c = static_cast<std::int32_t>(candidates.size() - 1);
      for (SetIndex j : candidates.back().indices) member_of[j - 1].push_back(c);
      payload += size_bits + static_cast<std::int64_t>(candidates.back().size()) * set_bits;
    }
    cluster.broadcast(payload, "rounding_candidates");

    // Machine j marks S_j in the segment of every candidate containing j.
    for (std::size_t mj = 0; mj < vectors.size(); ++mj) {
      auto& v = vectors[mj];
      v.clear();
      if (static_cast<std::int64_t>(mj) >= m) continue;
      for (std::int32_t c : member_of[mj]) {
        const std::int32_t base = c * static_cast<std::int32_t>(n);
        for (ElementId e : sys.sets()[mj]) v.emplace_back(base + e - 1, 1);
      }
    }
    const auto batch = static_cast<std::int64_t>(candidates.size());
    cluster.convergecast_sum_sparse(vectors, batch * n, 1, "rounding_coverage");
    covered.assign(static_cast<std::size_t>(batch), 0);
    for (const auto& [index, value] : vectors[cluster.central()]) {
      if (value > 0) ++covered[index / n];
    }
    for (std::int64_t c = 0; c < batch; ++c) {
      if (covered[c] > out.coverage) {
        out.coverage = covered[c];
        out.winner = start + c;
        out.selection = candidates[c];
      }
    }
  }
  cluster.broadcast(size_bits + static_cast<std::int64_t>(out.selection.size()) * set_bits,
                    "rounding_winner");
  return out;
}

}  // namespace maxcover
