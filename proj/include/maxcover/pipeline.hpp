#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maxcover/mpc.hpp"
#include "maxcover/mwu.hpp"
#include "maxcover/prefix_trim.hpp"
#include "maxcover/rational.hpp"
#include "maxcover/rounding.hpp"
#include "maxcover/set_system.hpp"

namespace maxcover {

// Round-bound constants. Derivation in README.md ("Round bound").
// Audit form: C4 * eps^-3 * lg m * (lg(1/eps) + lg m).
inline constexpr double kRoundConstant = 131072.0;
// Unconditional form asserted by the pipeline: C4' * eps^-3 * lg n' * lg m.
inline constexpr double kRoundConstantWorking = 65536.0;

// lg values are floored at 1.
double audit_round_bound(const Rational& epsilon, std::int64_t m);
double working_round_bound(const Rational& epsilon, std::int64_t n, std::int64_t m);

struct PipelineConfig {
  Rational epsilon = Rational(1, 4);
  std::uint64_t seed = 0;
  bool subsample = true;
  Rational subsample_constant = 4;
  // Bounded-frequency mode when set.
  std::optional<Rational> eta;
  mpc::MemoryModel memory = mpc::MemoryModel::from_env();
  // Overrides the MWU iteration count T (voids the slack guarantee).
  std::optional<std::int64_t> mwu_iterations;
  std::int64_t rep_c = 8;
  // Take the sequential-greedy simulation when 1/eps >= n/10.
  bool allow_greedy_fallback = true;
  // Instrumentation hooks for the LP stage; not part of the echo.
  MwuOptions mwu_hooks;

  nlohmann::ordered_json echo() const;
};

// How the user's epsilon is spent.
struct EpsilonSplit {
  Rational user;
  Rational stage;      // eps / 8 per stage
  int mwu_exponent;    // MWU step 2^-mwu_exponent <= stage
  Rational mwu;
  Rational scale;      // 7/5 * mwu, covering the MWU slack
  Rational subsample;  // eps / 2

  static EpsilonSplit from(const Rational& epsilon);
};

struct SubsampleResult {
  SetSystem system;
  // kept[i-1] is the input id of new element i.
  std::vector<ElementId> kept;
  double probability = 1.0;
  bool identity = true;
};

// Keeps each element independently with probability
// p = min(1, c_s (m ln 2 + ln n) / (eps^2 Opt_lb)), where
// Opt_lb = max(max_j |S_j|, ceil(n k / m)). p >= 1 returns the input.
SubsampleResult subsample_universe(const SetSystem& sys, const Rational& epsilon,
                                   std::uint64_t seed, const Rational& c_s = 4);

enum class RunPath { kAllSets, kEmptyUniverse, kGreedy, kLp };
const char* to_string(RunPath path);

// Everything the LP stage produced, on the working instance.
struct LpStage {
  SetSystem working;
  FrequencyVector f;
  Pi1Solution pi1;
  Rational eps_scale;
  LpSolution lp;
  std::int64_t k_prime = 0;
  LpSolution fitted;  // sum y == k_prime
};

struct RunReport {
  Selection selection;
  std::int64_t coverage = 0;
  std::int64_t rounds = 0;
  std::int64_t peak_bits = 0;
  std::int64_t L_star = 0;
  std::optional<std::int64_t> subsampled_n;
  std::uint64_t seed = 0;
  nlohmann::ordered_json config;

  nlohmann::ordered_json to_json() const;
  std::string to_json_string() const;
};

struct RunDiagnostics {
  mpc::RoundLog log;
  std::int64_t memory_budget_bits = 0;
  RunPath path = RunPath::kLp;
  std::int64_t working_n = 0;
  std::shared_ptr<const LpStage> lp;
  RoundingOutcome rounding;
  // On the working instance, before trimming and padding.
  Selection pre_trim;
  std::int64_t pre_trim_coverage = 0;
  MarginalVector phi;
  TrimResult trim;
  double round_bound = 0.0;
};

struct RunResult {
  RunReport report;
  RunDiagnostics diagnostics;
};

// Seed-independent part of a run. When subsampling is the identity the LP is
// solved here once and finish_run only rounds and trims.
struct PreparedRun {
  SetSystem input;
  PipelineConfig config;
  EpsilonSplit eps;
  // Instance the solver works on, and its set ids in `input`.
  SetSystem reduced;
  std::vector<SetIndex> set_map;
  RunPath path = RunPath::kLp;
  mpc::Cluster cluster;
  std::optional<NormalizedInstance> normalized;
  double subsample_probability = 1.0;
  std::shared_ptr<const LpStage> lp;
  Selection greedy;
};

PreparedRun prepare_run(const SetSystem& sys, const PipelineConfig& cfg);
RunResult finish_run(const PreparedRun& prepared, std::uint64_t seed);

// prepare_run then finish_run with cfg.seed; dispatches to the
// bounded-frequency variant when cfg.eta is set.
RunResult run_pipeline(const SetSystem& sys, const PipelineConfig& cfg);
RunReport solve_max_coverage(const SetSystem& sys, const PipelineConfig& cfg);

// Keeps the ceil(k f / eta) largest sets (larger first, lower index on
// ties), then solves with eps = eta^2 / f.
RunReport bounded_frequency_solve(const SetSystem& sys, const Rational& eta,
                                  const PipelineConfig& cfg);

}  // namespace maxcover
