#include "maxcover/baselines.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "maxcover/errors.hpp"
#include "maxcover/rational.hpp"

namespace maxcover {

std::int64_t bounded_binomial(std::int64_t m, std::int64_t k) {
  if (k < 0 || k > m) return 0;
  k = std::min(k, m - k);
  const std::int64_t cap = kMaxEnumeratedSubsets + 1;
  __int128 c = 1;
  for (std::int64_t i = 1; i <= k; ++i) {
    c = c * (m - k + i) / i;
    if (c > cap) return cap;
  }
  return static_cast<std::int64_t>(c);
}

namespace {

using Bits = std::vector<std::uint64_t>;

Bits to_bits(std::span<const ElementId> set, std::size_t words) {
  Bits b(words, 0);
  for (ElementId e : set) b[(e - 1) / 64] |= std::uint64_t{1} << ((e - 1) % 64);
  return b;
}

struct Enumerator {
  const std::vector<Bits>& sets;
  std::size_t words;
  std::int64_t k;
  std::vector<Bits> stack;  // stack[d] = union of the first d picks
  std::vector<SetIndex> picks;
  std::int64_t best = -1;
  std::vector<SetIndex> best_picks;

  void go(std::size_t depth, std::size_t from) {
    if (static_cast<std::int64_t>(depth) == k) {
      std::int64_t count = 0;
      for (std::uint64_t w : stack[depth]) count += std::popcount(w);
      // Lexicographic order of visits keeps the first maximizer.
      if (count > best) {
        best = count;
        best_picks = picks;
      }
      return;
    }
    const std::size_t remaining = static_cast<std::size_t>(k) - depth;
    for (std::size_t j = from; j + remaining <= sets.size(); ++j) {
      for (std::size_t w = 0; w < words; ++w) stack[depth + 1][w] = stack[depth][w] | sets[j][w];
      picks.push_back(static_cast<SetIndex>(j + 1));
      go(depth + 1, j + 1);
      picks.pop_back();
    }
  }
};

}  // namespace

OptResult exact_opt(const SetSystem& sys, std::int64_t k) {
  if (k < 0 || k > sys.m()) throw ValidationError("k must lie in [0, m]");
  if (bounded_binomial(sys.m(), k) > kMaxEnumeratedSubsets) {
    throw ValidationError("exact_opt refuses C(" + std::to_string(sys.m()) + ", " +
                          std::to_string(k) + ") subsets; the guard is 10^7");
  }
  const std::size_t words = static_cast<std::size_t>((sys.n() + 63) / 64);
  std::vector<Bits> sets;
  sets.reserve(sys.sets().size());
  for (const auto& s : sys.sets()) sets.push_back(to_bits(s, words));
  Enumerator en{sets, words, k, std::vector<Bits>(static_cast<std::size_t>(k) + 1, Bits(words, 0)),
                {}, -1, {}};
  en.go(0, 0);
  return OptResult{en.best, Selection{en.best_picks}};
}

Selection greedy_sequential(const SetSystem& sys, std::int64_t k) {
  const std::int64_t m = sys.m();
  std::vector<char> covered(static_cast<std::size_t>(sys.n()), 0);
  std::vector<char> taken(static_cast<std::size_t>(m), 0);
  std::vector<SetIndex> picks;
  for (std::int64_t step = 0; step < std::min(k, m); ++step) {
    std::int64_t best_gain = -1;
    std::int64_t best = -1;
    for (std::int64_t j = 0; j < m; ++j) {
      if (taken[j]) continue;
      std::int64_t gain = 0;
      for (ElementId e : sys.sets()[j]) gain += covered[e - 1] ? 0 : 1;
      if (gain > best_gain) {
        best_gain = gain;
        best = j;
      }
    }
    taken[best] = 1;
    for (ElementId e : sys.sets()[best]) covered[e - 1] = 1;
    picks.push_back(static_cast<SetIndex>(best + 1));
  }
  return Selection::from(std::move(picks));
}

Selection greedy_fallback(const SetSystem& sys, std::int64_t k, mpc::Cluster& cluster) {
  const std::int64_t m = sys.m();
  if (cluster.machine_count() < m) throw ValidationError("cluster has fewer machines than sets");
  auto section = cluster.section("greedy_fallback");
  // Every machine keeps the covered set, refreshed by the winner broadcasts.
  std::vector<char> covered(static_cast<std::size_t>(sys.n()), 0);
  std::vector<char> taken(static_cast<std::size_t>(m), 0);
  std::vector<SetIndex> picks;
  const int gain_bits = mpc::bits_for(static_cast<std::uint64_t>(sys.n()));
  const int index_bits = mpc::bits_for(static_cast<std::uint64_t>(m));
  const int element_bits = gain_bits;
  struct Bid {
    std::int64_t gain;
    std::int64_t index;
  };
  std::vector<Bid> bids(static_cast<std::size_t>(cluster.machine_count()));
  for (std::int64_t step = 0; step < std::min(k, m); ++step) {
    for (std::int64_t j = 0; j < cluster.machine_count(); ++j) {
      bids[j] = Bid{-1, j};
      if (j >= m || taken[j]) continue;
      std::int64_t gain = 0;
      for (ElementId e : sys.sets()[j]) gain += covered[e - 1] ? 0 : 1;
      bids[j].gain = gain;
    }
    const Bid win = cluster.tree_reduce(
        bids, gain_bits + index_bits,
        [](const Bid& a, const Bid& b) {
          if (a.gain != b.gain) return a.gain > b.gain ? a : b;
          return a.index < b.index ? a : b;
        },
        "greedy_argmax");
    const auto& s = sys.sets()[win.index];
    cluster.broadcast(static_cast<std::int64_t>(s.size()) * element_bits + index_bits,
                      "greedy_winner");
    taken[win.index] = 1;
    for (ElementId e : s) covered[e - 1] = 1;
    picks.push_back(static_cast<SetIndex>(win.index + 1));
  }
  return Selection::from(std::move(picks));
}

std::vector<Fixed> truncated_prices(std::span<const double> weights, const FrequencyVector& f,
                                    int fraction_bits) {
  if (weights.size() != f.size()) throw ValidationError("weights and frequencies differ in length");
  std::vector<Fixed> out;
  out.reserve(weights.size());
  const BigInt scale = BigInt(1) << fraction_bits;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    // The price is the binary64 quotient w/f; only the scaling is exact.
    const double p = weights[i] / static_cast<double>(f[i]);
    int exp = 0;
    const double mant = std::frexp(p, &exp);
    const auto digits = static_cast<std::int64_t>(std::ldexp(mant, 53));
    Rational value(digits);
    if (exp - 53 >= 0) {
      value *= Rational(BigInt(1) << (exp - 53));
    } else {
      value /= Rational(BigInt(1) << (53 - exp));
    }
    const BigInt v = floor(value * scale);
    const auto hi = static_cast<std::uint64_t>(v >> 64);
    const auto lo = static_cast<std::uint64_t>(v & BigInt(~std::uint64_t{0}));
    out.push_back((static_cast<Fixed>(hi) << 64) | lo);
  }
  return out;
}

BruteForceOracle oracle_bruteforce(std::span<const double> weights, const FrequencyVector& f,
                                   const SetSystem& sys, std::int64_t L, int fraction_bits) {
  const std::int64_t n = sys.n();
  const std::int64_t m = sys.m();
  if (n > 12 || m > 8) throw ValidationError("oracle_bruteforce needs n <= 12 and m <= 8");
  if (L < 0 || L > n) throw ValidationError("L must lie in [0, n]");
  const auto p_hat = truncated_prices(weights, f, fraction_bits);
  std::vector<Fixed> q_hat(static_cast<std::size_t>(m), 0);
  for (std::int64_t j = 0; j < m; ++j) {
    for (ElementId e : sys.sets()[j]) q_hat[j] += p_hat[e - 1];
  }
  const std::int64_t zc = m - sys.k();
  BruteForceOracle best;
  bool found = false;
  for (std::uint32_t xm = 0; xm < (1u << n); ++xm) {
    if (std::popcount(xm) != L) continue;
    Fixed px = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      if (xm >> i & 1u) px += p_hat[i];
    }
    for (std::uint32_t zm = 0; zm < (1u << m); ++zm) {
      if (std::popcount(zm) != zc) continue;
      Fixed total = px;
      for (std::int64_t j = 0; j < m; ++j) {
        if (zm >> j & 1u) total += q_hat[j];
      }
      if (!found || total < best.min_lhs) {
        found = true;
        best.min_lhs = total;
        best.x.assign(static_cast<std::size_t>(n), 0);
        best.z.assign(static_cast<std::size_t>(m), 0);
        for (std::int64_t i = 0; i < n; ++i) best.x[i] = xm >> i & 1u;
        for (std::int64_t j = 0; j < m; ++j) best.z[j] = zm >> j & 1u;
      }
    }
  }
  return best;
}

}  // namespace maxcover
