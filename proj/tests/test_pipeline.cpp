#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "maxcover/baselines.hpp"
#include "maxcover/errors.hpp"
#include "maxcover/pipeline.hpp"
#include "maxcover/random.hpp"
#include "support.hpp"

namespace maxcover {
namespace {

const double kOneMinusInvE = 1 - std::exp(-1.0);

PipelineConfig base_config(Rational eps = Rational(1, 4)) {
  PipelineConfig cfg;
  cfg.epsilon = eps;
  cfg.memory = mpc::MemoryModel{};
  return cfg;
}

SetSystem disjoint(const std::vector<int>& sizes, std::int64_t k) {
  std::vector<std::vector<ElementId>> sets;
  ElementId next = 1;
  for (int s : sizes) {
    std::vector<ElementId> set;
    for (int t = 0; t < s; ++t) set.push_back(next++);
    sets.push_back(std::move(set));
  }
  return SetSystem(next - 1, k, std::move(sets));
}

TEST(EpsilonSplit, Allocation) {
  const EpsilonSplit s = EpsilonSplit::from(Rational(1, 10));
  EXPECT_EQ(s.stage, Rational(1, 80));
  EXPECT_EQ(s.mwu_exponent, 7);
  EXPECT_EQ(s.mwu, Rational(1, 128));
  EXPECT_EQ(s.scale, Rational(7, 640));
  EXPECT_EQ(s.subsample, Rational(1, 20));
  EXPECT_THROW(EpsilonSplit::from(Rational(3, 10)), ValidationError);
  EXPECT_THROW(EpsilonSplit::from(Rational(0)), ValidationError);
}

TEST(SolveMaxCoverage, PathInstanceEverySeed) {
  const SetSystem sys = testing::path4();
  for (bool force : {false, true}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      PipelineConfig cfg = base_config();
      cfg.seed = seed;
      cfg.allow_greedy_fallback = !force;
      const RunResult r = run_pipeline(sys, cfg);
      EXPECT_EQ(r.report.selection.size(), 2u);
      EXPECT_GE(r.report.coverage, 2);
      EXPECT_EQ(r.report.coverage, coverage(sys, r.report.selection));
      EXPECT_EQ(r.diagnostics.path, force ? RunPath::kLp : RunPath::kGreedy);
      if (force) {
        EXPECT_EQ(r.report.L_star, 4);
      }
    }
  }
}

TEST(SolveMaxCoverage, BudgetEqualsM) {
  const SetSystem sys = testing::path4(3);
  const RunReport r = solve_max_coverage(sys, base_config());
  EXPECT_EQ(r.selection, (Selection{{1, 2, 3}}));
  EXPECT_EQ(r.coverage, 4);
  EXPECT_EQ(r.rounds, 0);
}

TEST(SolveMaxCoverage, EmptyUniverse) {
  const SetSystem sys(3, 1, {{}, {}});
  const RunResult r = run_pipeline(sys, base_config());
  EXPECT_TRUE(r.report.selection.empty());
  EXPECT_EQ(r.report.coverage, 0);
  EXPECT_EQ(r.diagnostics.path, RunPath::kEmptyUniverse);
}

TEST(SolveMaxCoverage, UncoveredElementsAreIgnored) {
  const SetSystem sys(9, 1, {{2, 4}, {4, 6, 8}, {1}});
  PipelineConfig cfg = base_config();
  cfg.allow_greedy_fallback = false;
  const RunReport r = solve_max_coverage(sys, cfg);
  EXPECT_EQ(r.selection, (Selection{{2}}));
  EXPECT_EQ(r.coverage, 3);
}

TEST(SolveMaxCoverage, DisjointEqualSets) {
  const SetSystem sys = disjoint(std::vector<int>(8, 4), 3);
  PipelineConfig cfg = base_config();
  cfg.allow_greedy_fallback = false;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    cfg.seed = seed;
    const RunResult r = run_pipeline(sys, cfg);
    EXPECT_EQ(r.report.selection.size(), 3u);
    EXPECT_GE(r.report.coverage, (kOneMinusInvE - 0.25) * 12);
    EXPECT_LE(r.report.peak_bits, r.diagnostics.memory_budget_bits);
    EXPECT_LE(static_cast<double>(r.report.rounds), audit_round_bound(cfg.epsilon, sys.m()));
  }
}

TEST(SolveMaxCoverage, GreedyConditionUsesNormalizedN) {
  // 30 covered elements with eps = 1/4: 30/4 <= 10 takes greedy, 50 does not.
  PipelineConfig cfg = base_config();
  const auto greedy_sys = testing::covered_instance(30, 5, 2, 0.5, 1);
  EXPECT_EQ(prepare_run(greedy_sys, cfg).path, RunPath::kGreedy);
  const auto lp_sys = disjoint(std::vector<int>(5, 10), 2);
  EXPECT_EQ(prepare_run(lp_sys, cfg).path, RunPath::kLp);
}

TEST(SolveMaxCoverage, ReusedPreparationMatchesFullRun) {
  const SetSystem sys = testing::covered_instance(14, 5, 2, 0.3, 5);
  PipelineConfig cfg = base_config();
  cfg.allow_greedy_fallback = false;
  const PreparedRun prep = prepare_run(sys, cfg);
  ASSERT_NE(prep.lp, nullptr);
  for (std::uint64_t seed : {0ull, 7ull, 123456789ull}) {
    cfg.seed = seed;
    const RunResult full = run_pipeline(sys, cfg);
    const RunResult reused = finish_run(prep, seed);
    EXPECT_EQ(full.report.to_json_string(), reused.report.to_json_string());
    EXPECT_EQ(full.diagnostics.log.to_json_lines(), reused.diagnostics.log.to_json_lines());
  }
}

TEST(SolveMaxCoverage, TrimAccountsForOversizedRounding) {
  const SetSystem sys = testing::covered_instance(24, 10, 2, 0.2, 17);
  PipelineConfig cfg = base_config();
  cfg.allow_greedy_fallback = false;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const RunResult r = finish_run(prepare_run(sys, cfg), seed);
    const RunDiagnostics& d = r.diagnostics;
    ASSERT_NE(d.lp, nullptr);
    EXPECT_LE(d.pre_trim.size(), static_cast<std::size_t>(d.lp->k_prime));
    if (d.pre_trim.size() > static_cast<std::size_t>(sys.k())) {
      EXPECT_EQ(d.phi.total(), d.pre_trim_coverage);
      EXPECT_GE(coverage(d.lp->working, d.trim.selection), d.pre_trim_coverage - d.trim.removed_mass);
    }
    EXPECT_EQ(r.report.selection.size(), static_cast<std::size_t>(sys.k()));
  }
}

TEST(SolveMaxCoverage, ReportJsonFields) {
  PipelineConfig cfg = base_config();
  cfg.seed = 42;
  const RunReport r = solve_max_coverage(testing::path4(), cfg);
  const auto j = nlohmann::json::parse(r.to_json_string());
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  std::sort(keys.begin(), keys.end());
  EXPECT_EQ(keys, (std::vector<std::string>{"L_star", "config", "coverage", "peak_bits", "rounds",
                                            "seed", "selection", "subsampled_n"}));
  EXPECT_EQ(j.at("seed"), 42);
  EXPECT_EQ(j.at("config").at("epsilon"), "1/4");
  EXPECT_TRUE(j.at("subsampled_n").is_null());
  const RunReport again = solve_max_coverage(testing::path4(), cfg);
  EXPECT_EQ(r.to_json_string(), again.to_json_string());
}

TEST(SolveMaxCoverage, ValidatesConfiguration) {
  PipelineConfig cfg = base_config(Rational(3, 10));
  EXPECT_THROW(solve_max_coverage(testing::path4(), cfg), ValidationError);
  cfg = base_config();
  cfg.eta = Rational(1, 2);
  EXPECT_THROW(solve_max_coverage(testing::path4(), cfg), ValidationError);
  cfg = base_config();
  cfg.rep_c = 0;
  EXPECT_THROW(solve_max_coverage(testing::path4(), cfg), ValidationError);
}

TEST(SolveMaxCoverage, TinyBudgetRaisesWithLog) {
  const SetSystem sys = testing::covered_instance(40, 8, 2, 0.3, 2);
  PipelineConfig cfg = base_config();
  cfg.allow_greedy_fallback = false;
  cfg.memory = mpc::MemoryModel{1, 0};
  EXPECT_THROW(solve_max_coverage(sys, cfg), mpc::BudgetViolation);
}

TEST(SubsampleUniverse, IdentityWhenRateSaturates) {
  const SetSystem sys = testing::covered_instance(30, 6, 2, 0.3, 4);
  const SubsampleResult s = subsample_universe(sys, Rational(1, 8), 1);
  EXPECT_TRUE(s.identity);
  EXPECT_EQ(s.system, sys);
}

TEST(SubsampleUniverse, KeptCountIsBinomial) {
  GeneratorParams g{10000, 100, 50, 0.9, std::nullopt, 3};
  const SetSystem sys = generate_random(g);
  const SubsampleResult s = subsample_universe(sys, Rational(1, 5), 77);
  ASSERT_LT(s.probability, 1.0);
  const double mean = 10000 * s.probability;
  const double sd = std::sqrt(10000 * s.probability * (1 - s.probability));
  EXPECT_NEAR(static_cast<double>(s.kept.size()), mean, 5 * sd);
  EXPECT_EQ(s.system.n(), static_cast<std::int64_t>(s.kept.size()));
  // Kept ids are increasing and memberships survive the renumbering.
  for (std::size_t i = 1; i < s.kept.size(); ++i) EXPECT_LT(s.kept[i - 1], s.kept[i]);
  for (SetIndex j = 1; j <= sys.m(); ++j) {
    for (ElementId e : s.system.set(j)) {
      const auto orig = sys.set(j);
      EXPECT_TRUE(std::binary_search(orig.begin(), orig.end(), s.kept[e - 1]));
    }
  }
}

TEST(SubsampleUniverse, OptLowerBoundHolds) {
  Rng rng(6);
  for (int trial = 0; trial < 400; ++trial) {
    const auto n = static_cast<std::int64_t>(1 + uniform_below(rng, 6));
    const auto m = static_cast<std::int64_t>(1 + uniform_below(rng, std::min<std::int64_t>(n, 5)));
    const auto k = static_cast<std::int64_t>(1 + uniform_below(rng, m));
    const SetSystem sys = testing::covered_instance(n, m, k, 0.4, rng());
    if (sys.n() == 0) continue;
    const std::int64_t opt = exact_opt(sys, k).opt;
    EXPECT_GE(opt, sys.max_set_size());
    EXPECT_GE(opt * sys.m(), sys.n() * k);
  }
}

TEST(SolveMaxCoverage, SubsampledRunMapsBack) {
  const SetSystem sys = testing::covered_instance(400, 4, 2, 0.5, 10);
  PipelineConfig cfg = base_config();
  cfg.allow_greedy_fallback = false;
  cfg.subsample_constant = Rational(1, 100);
  const PreparedRun prep = prepare_run(sys, cfg);
  EXPECT_EQ(prep.lp, nullptr);
  EXPECT_LT(prep.subsample_probability, 1.0);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const RunResult r = finish_run(prep, seed);
    ASSERT_TRUE(r.report.subsampled_n.has_value());
    EXPECT_LT(*r.report.subsampled_n, sys.n());
    EXPECT_EQ(r.report.selection.size(), 2u);
    EXPECT_EQ(r.report.coverage, coverage(sys, r.report.selection));
    EXPECT_EQ(r.diagnostics.log.records().front().primitive, "subsample_mask");
  }
}

TEST(BoundedFrequency, DisjointSetsKeepLargest) {
  const SetSystem sys = disjoint({3, 1, 4, 1, 5, 2, 6, 2, 3, 1, 2, 4}, 2);
  PipelineConfig cfg = base_config();
  cfg.eta = Rational(1, 4);
  const PreparedRun prep = prepare_run(sys, cfg);
  // ceil(2 / (1/4)) = 8 of the 12 sets survive.
  EXPECT_EQ(prep.reduced.m(), 8);
  EXPECT_EQ(prep.set_map, (std::vector<SetIndex>{1, 3, 5, 6, 7, 8, 9, 12}));
  EXPECT_EQ(prep.eps.user, Rational(1, 16));
  const RunResult r = finish_run(prep, 3);
  EXPECT_EQ(r.report.selection.size(), 2u);
  EXPECT_GE(r.report.coverage, (kOneMinusInvE - 0.25) * 11);
  EXPECT_EQ(r.report.config.at("eta"), "1/4");
}

TEST(BoundedFrequency, NoReductionMatchesPlainSolve) {
  const SetSystem sys = testing::covered_instance(20, 6, 2, 0.25, 9);
  const FrequencyVector f = frequency(sys);
  const std::int64_t fmax = *std::max_element(f.begin(), f.end());
  const Rational eta(1, 4);
  ASSERT_GE(Rational(2 * fmax) / eta, 6);
  PipelineConfig cfg = base_config(eta * eta / fmax);
  cfg.seed = 5;
  const RunReport plain = solve_max_coverage(sys, cfg);
  const RunReport bounded = bounded_frequency_solve(sys, eta, base_config());
  EXPECT_EQ(bounded.selection, plain.selection);
  EXPECT_EQ(bounded.coverage, plain.coverage);
  EXPECT_EQ(bounded.rounds, plain.rounds);
}

TEST(BoundedFrequency, SmallInstanceAgainstOptimum) {
  const SetSystem sys(8, 2, {{1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {1, 6, 7, 8}});
  const std::int64_t opt = exact_opt(sys, 2).opt;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    PipelineConfig cfg = base_config();
    cfg.seed = seed;
    const RunReport r = bounded_frequency_solve(sys, Rational(1, 4), cfg);
    EXPECT_GE(static_cast<double>(r.coverage), (kOneMinusInvE - 0.25) * static_cast<double>(opt));
  }
}

TEST(RoundBound, Formulas) {
  EXPECT_DOUBLE_EQ(audit_round_bound(Rational(1, 4), 8), 131072.0 * 64 * 3 * (2 + 3));
  EXPECT_DOUBLE_EQ(audit_round_bound(Rational(1, 4), 1), 131072.0 * 64 * 1 * (2 + 1));
  EXPECT_DOUBLE_EQ(working_round_bound(Rational(1, 2), 16, 4), 65536.0 * 8 * 4 * 2);
}

}  // namespace
}  // namespace maxcover
