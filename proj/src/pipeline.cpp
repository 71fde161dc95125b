#include "maxcover/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "maxcover/baselines.hpp"
#include "maxcover/errors.hpp"
#include "maxcover/random.hpp"

namespace maxcover {

namespace {

double lg_at_least_1(double x) { return std::max(1.0, std::log2(x)); }

// Stream tags for derive_seed.
constexpr std::uint64_t kSubsampleStream = 1;
constexpr std::uint64_t kRoundingStream = 2;

}  // namespace

double audit_round_bound(const Rational& epsilon, std::int64_t m) {
  const double e = to_double(epsilon);
  const double lm = lg_at_least_1(static_cast<double>(m));
  return kRoundConstant / (e * e * e) * lm * (lg_at_least_1(1.0 / e) + lm);
}

double working_round_bound(const Rational& epsilon, std::int64_t n, std::int64_t m) {
  const double e = to_double(epsilon);
  return kRoundConstantWorking / (e * e * e) * lg_at_least_1(static_cast<double>(n)) *
         lg_at_least_1(static_cast<double>(m));
}

nlohmann::ordered_json PipelineConfig::echo() const {
  nlohmann::ordered_json j;
  j["epsilon"] = to_string(epsilon);
  j["eta"] = eta ? nlohmann::ordered_json(to_string(*eta)) : nlohmann::ordered_json(nullptr);
  j["subsample"] = subsample;
  j["subsample_constant"] = to_string(subsample_constant);
  j["mem_c"] = memory.mem_c;
  j["mem_e"] = memory.mem_e;
  j["rep_c"] = rep_c;
  j["mwu_iterations"] =
      mwu_iterations ? nlohmann::ordered_json(*mwu_iterations) : nlohmann::ordered_json(nullptr);
  j["allow_greedy_fallback"] = allow_greedy_fallback;
  return j;
}

EpsilonSplit EpsilonSplit::from(const Rational& epsilon) {
  if (epsilon <= 0 || epsilon > Rational(1, 4)) {
    throw ValidationError("epsilon must lie in (0, 1/4], got " + to_string(epsilon));
  }
  EpsilonSplit s;
  s.user = epsilon;
  s.stage = epsilon / 8;
  s.mwu_exponent = round_down_pow2_exponent(s.stage);
  s.mwu = Rational(1, BigInt(1) << s.mwu_exponent);
  s.scale = Rational(7, 5) * s.mwu;
  s.subsample = epsilon / 2;
  return s;
}

namespace {

double subsample_probability(const SetSystem& sys, const Rational& epsilon, const Rational& c_s) {
  const std::int64_t n = sys.n();
  if (n == 0) return 1.0;
  const std::int64_t m = sys.m();
  const std::int64_t k = sys.k();
  const std::int64_t opt_lb = std::max(sys.max_set_size(), (n * k + m - 1) / m);
  const double e = to_double(epsilon);
  const double p = to_double(c_s) * (static_cast<double>(m) * std::log(2.0) +
                                     std::log(static_cast<double>(n))) /
                   (e * e * static_cast<double>(std::max<std::int64_t>(opt_lb, 1)));
  return std::min(1.0, p);
}

}  // namespace

SubsampleResult subsample_universe(const SetSystem& sys, const Rational& epsilon,
                                   std::uint64_t seed, const Rational& c_s) {
  if (epsilon <= 0) throw ValidationError("subsampling epsilon must be positive");
  if (c_s <= 0) throw ValidationError("subsample constant must be positive");
  const double p = subsample_probability(sys, epsilon, c_s);
  if (p >= 1.0) {
    std::vector<ElementId> all(static_cast<std::size_t>(sys.n()));
    std::iota(all.begin(), all.end(), 1);
    return SubsampleResult{sys, std::move(all), 1.0, true};
  }
  Rng rng(seed);
  std::vector<ElementId> kept;
  std::vector<ElementId> remap(static_cast<std::size_t>(sys.n()), 0);
  for (std::int64_t i = 1; i <= sys.n(); ++i) {
    if (bernoulli(rng, p)) {
      kept.push_back(static_cast<ElementId>(i));
      remap[i - 1] = static_cast<ElementId>(kept.size());
    }
  }
  std::vector<std::vector<ElementId>> sets;
  sets.reserve(sys.sets().size());
  for (const auto& s : sys.sets()) {
    std::vector<ElementId> restricted;
    for (ElementId e : s) {
      if (remap[e - 1] != 0) restricted.push_back(remap[e - 1]);
    }
    sets.push_back(std::move(restricted));
  }
  SetSystem out(static_cast<std::int64_t>(kept.size()), sys.k(), std::move(sets));
  return SubsampleResult{std::move(out), std::move(kept), p, false};
}

const char* to_string(RunPath path) {
  switch (path) {
    case RunPath::kAllSets:
      return "all_sets";
    case RunPath::kEmptyUniverse:
      return "empty_universe";
    case RunPath::kGreedy:
      return "greedy";
    case RunPath::kLp:
      return "lp";
  }
  return "unknown";
}

nlohmann::ordered_json RunReport::to_json() const {
  nlohmann::ordered_json j;
  j["selection"] = selection.indices;
  j["coverage"] = coverage;
  j["rounds"] = rounds;
  j["peak_bits"] = peak_bits;
  j["L_star"] = L_star;
  j["subsampled_n"] =
      subsampled_n ? nlohmann::ordered_json(*subsampled_n) : nlohmann::ordered_json(nullptr);
  j["seed"] = seed;
  j["config"] = config;
  return j;
}

std::string RunReport::to_json_string() const { return to_json().dump(2) + "\n"; }

namespace {

void validate_config(const PipelineConfig& cfg) {
  if (cfg.rep_c < 1) throw ValidationError("rep_c must be at least 1");
  if (cfg.subsample_constant <= 0) throw ValidationError("subsample constant must be positive");
  if (cfg.mwu_iterations && *cfg.mwu_iterations < 1) {
    throw ValidationError("MWU iteration override must be positive");
  }
  if (cfg.memory.mem_c < 1 || cfg.memory.mem_e < 0) {
    throw ValidationError("memory constants must satisfy mem_c >= 1 and mem_e >= 0");
  }
  if (cfg.eta && (*cfg.eta <= 0 || *cfg.eta > Rational(1, 4))) {
    throw ValidationError("eta must lie in (0, 1/4], got " + to_string(*cfg.eta));
  }
}

std::shared_ptr<const LpStage> solve_lp_stage(SetSystem working, const PipelineConfig& cfg,
                                              const EpsilonSplit& eps, mpc::Cluster& cluster) {
  auto stage = std::make_shared<LpStage>(LpStage{std::move(working), {}, {}, {}, {}, 0, {}});
  const SetSystem& sys = stage->working;
  stage->f = frequency(sys);
  MwuOptions options = cfg.mwu_hooks;
  if (cfg.mwu_iterations) options.iterations_override = cfg.mwu_iterations;
  stage->pi1 = solve_pi1(sys, stage->f, eps.mwu, cluster, options);
  if (stage->pi1.L_star == 0) throw ContractViolation("no objective guess was feasible");

  // The scaling step needs the realized slack; the default T keeps it below
  // 7/5 of the step size except on very small universes.
  const Rational slack = max_constraint_value(sys, stage->f, stage->pi1.pair) - 1;
  stage->eps_scale = std::max(eps.scale, slack);
  if (stage->eps_scale > Rational(1, 4)) {
    throw ContractViolation("MWU slack " + to_string(slack) + " too large to rescale");
  }
  stage->lp = scale_to_pi0(sys, stage->f, stage->pi1.pair, stage->eps_scale);
  const BigInt k_prime = floor(Rational(sys.k()) + 2 * stage->eps_scale * sys.m());
  stage->k_prime = std::min<std::int64_t>(sys.m(), static_cast<std::int64_t>(k_prime));
  stage->fitted = fit_to_budget(stage->lp, stage->k_prime);
  return stage;
}

template <class Fn>
auto with_log_on_violation(mpc::Cluster& cluster, Fn&& fn) {
  try {
    return fn();
  } catch (mpc::BudgetViolation& e) {
    e.attach_log(cluster.log());
    throw;
  }
}

}  // namespace

PreparedRun prepare_run(const SetSystem& sys, const PipelineConfig& cfg) {
  validate_config(cfg);
  EpsilonSplit::from(cfg.epsilon);
  PreparedRun prep{sys,
                   cfg,
                   {},
                   sys,
                   {},
                   RunPath::kLp,
                   mpc::Cluster(static_cast<int>(sys.m()), sys.n(), cfg.memory),
                   std::nullopt,
                   1.0,
                   nullptr,
                   {}};
  mpc::Cluster& cluster = prep.cluster;

  with_log_on_violation(cluster, [&] {
    Rational effective = cfg.epsilon;
    if (cfg.eta) {
      const FrequencyVector f = frequency(sys);
      const std::int64_t f_max = std::max<std::int64_t>(
          1, f.empty() ? 1 : *std::max_element(f.begin(), f.end()));
      effective = (*cfg.eta) * (*cfg.eta) / f_max;
      const auto keep =
          static_cast<std::int64_t>(ceil(Rational(sys.k() * f_max) / *cfg.eta));
      if (keep < sys.m()) {
        // Sizes go to the central machine, the kept list comes back.
        cluster.gather_uniform(mpc::bits_for(static_cast<std::uint64_t>(sys.n())), "set_sizes");
        std::vector<SetIndex> order(static_cast<std::size_t>(sys.m()));
        std::iota(order.begin(), order.end(), 1);
        std::stable_sort(order.begin(), order.end(), [&](SetIndex a, SetIndex b) {
          return sys.set(a).size() > sys.set(b).size();
        });
        order.resize(static_cast<std::size_t>(keep));
        std::sort(order.begin(), order.end());
        cluster.broadcast(keep * mpc::bits_for(static_cast<std::uint64_t>(sys.m())),
                          "kept_sets");
        std::vector<std::vector<ElementId>> sets;
        for (SetIndex j : order) sets.emplace_back(sys.set(j).begin(), sys.set(j).end());
        prep.reduced = SetSystem(sys.n(), sys.k(), std::move(sets));
        prep.set_map = std::move(order);
        cluster.retarget(static_cast<int>(keep));
      }
    }
    prep.eps = EpsilonSplit::from(effective);

    const SetSystem& reduced = prep.reduced;
    if (reduced.k() >= reduced.m()) {
      prep.path = RunPath::kAllSets;
      return 0;
    }
    prep.normalized = normalize_covered(reduced);
    const SetSystem& norm = prep.normalized->system;
    if (norm.n() == 0) {
      prep.path = RunPath::kEmptyUniverse;
      return 0;
    }
    if (cfg.allow_greedy_fallback && Rational(norm.n()) * prep.eps.user <= 10) {
      prep.path = RunPath::kGreedy;
      prep.greedy = greedy_fallback(norm, norm.k(), cluster);
      return 0;
    }
    prep.path = RunPath::kLp;
    if (cfg.subsample) {
      prep.subsample_probability =
          subsample_probability(norm, prep.eps.subsample, cfg.subsample_constant);
    }
    if (prep.subsample_probability >= 1.0) {
      prep.lp = solve_lp_stage(norm, cfg, prep.eps, cluster);
    }
    return 0;
  });
  return prep;
}

RunResult finish_run(const PreparedRun& prep, std::uint64_t seed) {
  const PipelineConfig& cfg = prep.config;
  const SetSystem& reduced = prep.reduced;
  const std::int64_t k = reduced.k();
  mpc::Cluster cluster = prep.cluster;
  RunResult result;
  RunDiagnostics& diag = result.diagnostics;
  diag.path = prep.path;
  diag.memory_budget_bits = cluster.memory_budget_bits();

  std::vector<SetIndex> chosen;  // ids of `reduced`
  bool pad = true;
  with_log_on_violation(cluster, [&] {
    switch (prep.path) {
      case RunPath::kAllSets:
        chosen.resize(static_cast<std::size_t>(reduced.m()));
        std::iota(chosen.begin(), chosen.end(), 1);
        diag.working_n = reduced.n();
        break;
      case RunPath::kEmptyUniverse:
        pad = false;
        break;
      case RunPath::kGreedy:
        chosen = prep.greedy.indices;
        diag.working_n = prep.normalized->system.n();
        break;
      case RunPath::kLp: {
        std::shared_ptr<const LpStage> lp = prep.lp;
        if (!lp) {
          const SetSystem& norm = prep.normalized->system;
          SubsampleResult sub = subsample_universe(norm, prep.eps.subsample,
                                                   derive_seed(seed, kSubsampleStream),
                                                   cfg.subsample_constant);
          cluster.broadcast(norm.n(), "subsample_mask");
          if (sub.system.n() == 0) break;
          lp = solve_lp_stage(std::move(sub.system), cfg, prep.eps, cluster);
        }
        diag.lp = lp;
        diag.working_n = lp->working.n();
        RoundingConfig rcfg;
        rcfg.epsilon = prep.eps.stage;
        rcfg.rep_c = cfg.rep_c;
        rcfg.seed = derive_seed(seed, kRoundingStream);
        diag.rounding = best_of_repetitions(lp->working, lp->fitted, lp->k_prime, rcfg, cluster);
        diag.pre_trim = diag.rounding.selection;
        diag.pre_trim_coverage = diag.rounding.coverage;
        if (static_cast<std::int64_t>(diag.pre_trim.size()) > k) {
          diag.phi = prefix_coverage(cluster, lp->working, diag.pre_trim);
          diag.trim = trim_to_k(lp->working, diag.pre_trim, k, diag.phi);
        } else {
          diag.trim.selection = diag.pre_trim;
        }
        chosen = diag.trim.selection.indices;
        break;
      }
    }
    return 0;
  });

  // Fill up to k with the lowest unused sets; extra sets never hurt coverage.
  if (pad) {
    std::vector<char> used(static_cast<std::size_t>(reduced.m()) + 1, 0);
    for (SetIndex j : chosen) used[j] = 1;
    for (SetIndex j = 1; static_cast<std::int64_t>(chosen.size()) < k && j <= reduced.m(); ++j) {
      if (!used[j]) chosen.push_back(j);
    }
  }
  if (!prep.set_map.empty()) {
    for (auto& j : chosen) j = prep.set_map[j - 1];
  }
  RunReport& report = result.report;
  report.selection = Selection::from(std::move(chosen));
  if (static_cast<std::int64_t>(report.selection.size()) > prep.input.k()) {
    throw ContractViolation("selection exceeds the budget k");
  }
  report.coverage = coverage(prep.input, report.selection);
  report.rounds = cluster.round();
  report.peak_bits = cluster.peak_inbox_bits();
  report.L_star = diag.lp ? diag.lp->pi1.L_star : 0;
  if (cfg.subsample && prep.path == RunPath::kLp) report.subsampled_n = diag.working_n;
  report.seed = seed;
  report.config = cfg.echo();

  diag.round_bound = working_round_bound(prep.eps.user, std::max<std::int64_t>(diag.working_n, 2),
                                         cluster.machine_count());
  if (static_cast<double>(report.rounds) > diag.round_bound) {
    throw ContractViolation("run used " + std::to_string(report.rounds) +
                            " rounds, above the asserted bound");
  }
  if (report.peak_bits > diag.memory_budget_bits) {
    throw ContractViolation("peak inbox exceeds the memory budget");
  }
  diag.log = cluster.log();
  return result;
}

RunResult run_pipeline(const SetSystem& sys, const PipelineConfig& cfg) {
  return finish_run(prepare_run(sys, cfg), cfg.seed);
}

RunReport solve_max_coverage(const SetSystem& sys, const PipelineConfig& cfg) {
  return run_pipeline(sys, cfg).report;
}

RunReport bounded_frequency_solve(const SetSystem& sys, const Rational& eta,
                                  const PipelineConfig& cfg) {
  PipelineConfig with_eta = cfg;
  with_eta.eta = eta;
  return run_pipeline(sys, with_eta).report;
}

}  // namespace maxcover
