#include <gtest/gtest.h>

#include <cmath>

#include "maxcover/baselines.hpp"
#include "maxcover/errors.hpp"
#include "maxcover/random.hpp"
#include "support.hpp"

namespace maxcover {
namespace {

TEST(ExactOpt, PathInstance) {
  const OptResult r = exact_opt(testing::path4(), 2);
  EXPECT_EQ(r.opt, 4);
  EXPECT_EQ(r.witness, (Selection{{1, 3}}));
}

TEST(ExactOpt, AllSetsCoverNormalizedUniverse) {
  const SetSystem sys = testing::covered_instance(20, 6, 6, 0.2, 3);
  EXPECT_EQ(exact_opt(sys, sys.m()).opt, sys.n());
}

TEST(ExactOpt, DisjointSetsAdd) {
  const SetSystem sys(12, 2, {{1, 2, 3, 4, 5}, {6, 7, 8, 9}, {10, 11, 12}});
  EXPECT_EQ(exact_opt(sys, 2).opt, 9);
}

TEST(ExactOpt, WitnessReevaluatesAndOptIsMonotone) {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const SetSystem sys = testing::covered_instance(30, 9, 1, 0.15, rng());
    std::int64_t prev = 0;
    for (std::int64_t k = 1; k <= sys.m(); ++k) {
      const OptResult r = exact_opt(sys, k);
      EXPECT_EQ(coverage(sys, r.witness), r.opt);
      EXPECT_EQ(static_cast<std::int64_t>(r.witness.size()), k);
      EXPECT_GE(r.opt, prev);
      prev = r.opt;
    }
  }
}

TEST(ExactOpt, GuardRefusesHugeSearches) {
  std::vector<std::vector<ElementId>> sets(40, std::vector<ElementId>{1});
  const SetSystem sys(40, 20, sets);
  EXPECT_THROW(exact_opt(sys, 20), ValidationError);
  EXPECT_EQ(bounded_binomial(40, 20), kMaxEnumeratedSubsets + 1);
  EXPECT_EQ(bounded_binomial(20, 5), 15504);
}

TEST(Greedy, PathPicksLowestIndexOnTies) {
  const SetSystem sys = testing::path4();
  const Selection g = greedy_sequential(sys, 2);
  EXPECT_EQ(g, (Selection{{1, 3}}));
  EXPECT_EQ(coverage(sys, g), 4);
  auto cluster = testing::cluster_for(sys);
  EXPECT_EQ(greedy_fallback(sys, 2, cluster), g);
  EXPECT_EQ(cluster.log().records().size(), 1u);
  EXPECT_EQ(cluster.log().records()[0].primitive, "greedy_fallback");
}

TEST(Greedy, SingleSetIsTheLargest) {
  const SetSystem sys(6, 1, {{1}, {2, 3, 4}, {5, 6}});
  EXPECT_EQ(greedy_sequential(sys, 1), (Selection{{2}}));
}

TEST(Greedy, NestedSets) {
  const SetSystem sys(4, 2, {{1, 2, 3, 4}, {1, 2, 3}, {1}});
  const Selection g = greedy_sequential(sys, 2);
  EXPECT_EQ(g.size(), 2u);
  EXPECT_EQ(g.indices.front(), 1);
  EXPECT_EQ(coverage(sys, g), 4);
}

TEST(Greedy, ClassicalGuaranteeAndDistributedAgreement) {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const SetSystem sys = testing::covered_instance(30, 10, 3, 0.2, rng());
    const Selection g = greedy_sequential(sys, sys.k());
    EXPECT_GE(static_cast<double>(coverage(sys, g)),
              (1 - std::exp(-1.0)) * static_cast<double>(exact_opt(sys, sys.k()).opt));
    auto cluster = testing::cluster_for(sys);
    EXPECT_EQ(greedy_fallback(sys, sys.k(), cluster), g);
    EXPECT_LE(cluster.peak_inbox_bits(), cluster.memory_budget_bits());
  }
}

TEST(OracleBruteForce, UniformWeightsOnPath) {
  const SetSystem sys = testing::path4();
  const std::vector<double> w(4, 1.0);
  const int B = 20;
  const BruteForceOracle r = oracle_bruteforce(w, frequency(sys), sys, 3, B);
  EXPECT_EQ(testing::fixed_to_rational(r.min_lhs, B), 3);
}

TEST(OracleBruteForce, EmptyPicks) {
  const SetSystem sys = testing::path4(3);
  const std::vector<double> w(4, 0.75);
  EXPECT_EQ(oracle_bruteforce(w, frequency(sys), sys, 0, 20).min_lhs, 0);
}

TEST(OracleBruteForce, SingleElementIsForced) {
  const SetSystem sys(1, 1, {{1}, {1}});
  const std::vector<double> w{0.5};
  const FrequencyVector f = frequency(sys);
  const BruteForceOracle r = oracle_bruteforce(w, f, sys, 1, 10);
  const auto p = truncated_prices(w, f, 10);
  EXPECT_EQ(r.min_lhs, p[0] + p[0]);
}

TEST(OracleBruteForce, SizeGuard) {
  const SetSystem sys = testing::covered_instance(20, 4, 2, 0.5, 1);
  const std::vector<double> w(static_cast<std::size_t>(sys.n()), 1.0);
  EXPECT_THROW(oracle_bruteforce(w, frequency(sys), sys, 1, 10), ValidationError);
}

TEST(TruncatedPrices, ExactFloor) {
  const std::vector<double> w{1.0, 0.3, 1e-30};
  const FrequencyVector f{3, 1, 2};
  const auto p = truncated_prices(w, f, 64);
  // The binary64 quotient 1/3, scaled and floored.
  const Rational scale(BigInt(1) << 64);
  EXPECT_EQ(testing::fixed_to_rational(p[0], 64) * scale,
            Rational(floor(testing::exact_double(1.0 / 3.0) * scale)));
  EXPECT_EQ(testing::fixed_to_rational(p[1], 64) * scale,
            Rational(floor(testing::exact_double(0.3) * scale)));
  EXPECT_EQ(p[2], 0);
}

}  // namespace
}  // namespace maxcover
