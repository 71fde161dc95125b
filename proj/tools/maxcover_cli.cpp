// maxcover: generate instances, run the distributed solver, compare it with
// sequential baselines, and audit round logs.
//
// Exit codes: 0 success, 2 invalid input or flags, 3 memory budget exceeded,
// 4 round bound exceeded, 1 internal error.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "maxcover/baselines.hpp"
#include "maxcover/errors.hpp"
#include "maxcover/mpc.hpp"
#include "maxcover/pipeline.hpp"
#include "maxcover/rational.hpp"
#include "maxcover/set_system.hpp"

namespace {

using namespace maxcover;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitBudget = 3;
constexpr int kExitBound = 4;

struct Flags {
  std::string input;
  std::string output;
  std::string instance;
  std::uint64_t seed = 0;
  std::string epsilon = "0.25";
  std::optional<std::int64_t> k;
  bool subsample = true;
  std::optional<std::string> eta;
  std::optional<std::int64_t> mem_c;
  std::optional<std::int64_t> mem_e;
  bool json = false;
  bool force_lp = false;
  bool no_opt = false;
  std::optional<std::int64_t> m_for_audit;
  // generate
  std::int64_t gen_n = 0;
  std::int64_t gen_m = 0;
  std::int64_t gen_k = 1;
  std::optional<double> density;
  std::optional<std::int64_t> set_size;
};

class Failure : public std::runtime_error {
 public:
  Failure(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

Rational parse_rational_flag(const std::string& name, const std::string& text) {
  try {
    return parse_decimal(text);
  } catch (const std::exception& e) {
    throw ValidationError("--" + name + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw ValidationError("failed writing " + path);
}

SetSystem load_input(const Flags& flags) {
  if (flags.input.empty()) throw ValidationError("--input is required");
  SetSystem sys = load_instance_file(flags.input);
  if (flags.k) sys = sys.with_k(*flags.k);
  return sys;
}

PipelineConfig make_config(const Flags& flags) {
  PipelineConfig cfg;
  cfg.epsilon = parse_rational_flag("epsilon", flags.epsilon);
  if (cfg.epsilon <= 0 || cfg.epsilon > Rational(1, 4)) {
    throw ValidationError("--epsilon must lie in (0, 0.25]");
  }
  cfg.seed = flags.seed;
  cfg.subsample = flags.subsample;
  if (flags.eta) cfg.eta = parse_rational_flag("eta", *flags.eta);
  if (flags.mem_c) cfg.memory.mem_c = *flags.mem_c;
  if (flags.mem_e) cfg.memory.mem_e = *flags.mem_e;
  if (cfg.memory.mem_c < 1 || cfg.memory.mem_e < 0) {
    throw ValidationError("--mem-c must be >= 1 and --mem-e >= 0");
  }
  cfg.allow_greedy_fallback = !flags.force_lp;
  return cfg;
}

// Runs the pipeline; a budget violation flushes its log before exiting 3.
RunResult run_or_flush(const SetSystem& sys, const PipelineConfig& cfg, const Flags& flags) {
  try {
    return run_pipeline(sys, cfg);
  } catch (const mpc::BudgetViolation& e) {
    const std::string lines = e.log().to_json_lines();
    if (flags.json && !flags.output.empty()) {
      write_text(flags.output, lines);
    } else {
      std::cerr << lines;
    }
    throw Failure(kExitBudget, e.what());
  }
}

int cmd_generate(const Flags& flags) {
  GeneratorParams params;
  params.n = flags.gen_n;
  params.m = flags.gen_m;
  params.k = flags.gen_k;
  params.density = flags.density;
  params.set_size = flags.set_size;
  params.seed = flags.seed;
  const std::string text = format_instance(generate_random(params));
  if (flags.output.empty()) {
    std::cout << text;
  } else {
    write_text(flags.output, text);
  }
  return kExitOk;
}

int cmd_run(const Flags& flags) {
  if (flags.json && flags.output.empty()) {
    throw ValidationError("--json writes the round log to --output, which is missing");
  }
  const SetSystem sys = load_input(flags);
  const PipelineConfig cfg = make_config(flags);
  const RunResult result = run_or_flush(sys, cfg, flags);
  std::cout << result.report.to_json_string();
  if (flags.json) write_text(flags.output, result.diagnostics.log.to_json_lines());
  return kExitOk;
}

struct Row {
  std::string algo;
  std::int64_t coverage = 0;
  std::int64_t rounds = 0;
  std::int64_t peak_bits = 0;
};

std::string format_ratio(std::int64_t num, std::int64_t den) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", den == 0 ? 1.0 : static_cast<double>(num) / den);
  return buf;
}

int cmd_compare(const Flags& flags) {
  const SetSystem sys = load_input(flags);
  const PipelineConfig cfg = make_config(flags);
  if (!flags.no_opt && bounded_binomial(sys.m(), sys.k()) > kMaxEnumeratedSubsets) {
    throw ValidationError("instance too large for exact search; pass --no-opt");
  }
  std::vector<Row> rows;
  const RunResult run = run_or_flush(sys, cfg, flags);
  rows.push_back({"pipeline", run.report.coverage, run.report.rounds, run.report.peak_bits});

  mpc::Cluster cluster(static_cast<int>(sys.m()), sys.n(), cfg.memory);
  const Selection greedy = greedy_fallback(sys, sys.k(), cluster);
  rows.push_back({"greedy", coverage(sys, greedy), cluster.round(), cluster.peak_inbox_bits()});

  // Ratios are against the optimum, or against greedy when it is skipped.
  std::int64_t reference = rows[1].coverage;
  if (!flags.no_opt) {
    const OptResult opt = exact_opt(sys, sys.k());
    rows.push_back({"opt", opt.opt, 0, 0});
    reference = opt.opt;
  }

  if (flags.json) {
    nlohmann::ordered_json table = nlohmann::ordered_json::array();
    for (const Row& r : rows) {
      nlohmann::ordered_json j;
      j["algo"] = r.algo;
      j["coverage"] = r.coverage;
      j["ratio"] = format_ratio(r.coverage, reference);
      j["rounds"] = r.rounds;
      j["peak_bits"] = r.peak_bits;
      j["seed"] = cfg.seed;
      table.push_back(std::move(j));
    }
    std::cout << table.dump(2) << "\n";
  } else {
    std::cout << "algo,coverage,ratio,rounds,peak_bits,seed\n";
    for (const Row& r : rows) {
      std::cout << r.algo << ',' << r.coverage << ',' << format_ratio(r.coverage, reference) << ','
                << r.rounds << ',' << r.peak_bits << ',' << cfg.seed << '\n';
    }
  }
  return kExitOk;
}

int cmd_audit(const Flags& flags) {
  if (flags.input.empty()) throw ValidationError("--input (a round log) is required");
  const Rational eps = parse_rational_flag("epsilon", flags.epsilon);
  if (eps <= 0 || eps >= 1) throw ValidationError("--epsilon must lie in (0, 1)");
  std::int64_t m = 0;
  if (flags.m_for_audit) {
    m = *flags.m_for_audit;
  } else if (!flags.instance.empty()) {
    m = load_instance_file(flags.instance).m();
  } else {
    throw ValidationError("audit needs --m or --instance");
  }
  if (m < 1) throw ValidationError("--m must be positive");

  std::ifstream in(flags.input, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + flags.input);
  mpc::RoundLog log;
  try {
    log = mpc::RoundLog::parse_json_lines(in);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(std::string("malformed round log: ") + e.what());
  }
  const double bound = audit_round_bound(eps, m);
  const std::int64_t total = log.total_rounds();
  const bool pass = static_cast<double>(total) <= bound;
  char buf[128];
  std::snprintf(buf, sizeof buf, "rounds=%lld bound=%.1f %s\n", static_cast<long long>(total), bound,
                pass ? "pass" : "FAIL");
  std::cout << buf;
  return pass ? kExitOk : kExitBound;
}

void add_shared(CLI::App* cmd, Flags& f) {
  cmd->add_option("--input", f.input, "Instance file (round log for audit)");
  cmd->add_option("--output", f.output, "Output path");
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_option("--epsilon", f.epsilon, "Accuracy as a decimal, e.g. 0.25");
  cmd->add_option("--k", f.k, "Override the instance budget k");
  cmd->add_option("--subsample", f.subsample, "Enable universe subsampling (true/false)");
  cmd->add_option("--eta", f.eta, "Bounded-frequency mode with this eta");
  cmd->add_option("--mem-c", f.mem_c, "Memory budget constant");
  cmd->add_option("--mem-e", f.mem_e, "Memory budget log exponent");
  cmd->add_flag("--json", f.json, "JSON output (run: write the round log to --output)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed maximum coverage"};
  app.require_subcommand(1);
  Flags f;

  auto* gen = app.add_subcommand("generate", "Write a random instance");
  add_shared(gen, f);
  gen->add_option("--n", f.gen_n, "Universe size")->required();
  gen->add_option("--m", f.gen_m, "Number of sets")->required();
  gen->add_option("--density", f.density, "Membership probability");
  gen->add_option("--set-size", f.set_size, "Elements per set");
  gen->callback([&] { f.gen_k = f.k.value_or(1); });

  auto* run = app.add_subcommand("run", "Solve and print the run report");
  add_shared(run, f);
  run->add_flag("--force-lp", f.force_lp, "Never take the greedy shortcut");

  auto* cmp = app.add_subcommand("compare", "Pipeline against greedy and the optimum");
  add_shared(cmp, f);
  cmp->add_flag("--force-lp", f.force_lp, "Never take the greedy shortcut");
  cmp->add_flag("--no-opt", f.no_opt, "Skip exhaustive search");

  auto* audit = app.add_subcommand("audit", "Check a round log against the round bound");
  add_shared(audit, f);
  audit->add_option("--m", f.m_for_audit, "Number of sets of the audited run");
  audit->add_option("--instance", f.instance, "Instance of the audited run (supplies m)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (gen->parsed()) return cmd_generate(f);
    if (run->parsed()) return cmd_run(f);
    if (cmp->parsed()) return cmd_compare(f);
    return cmd_audit(f);
  } catch (const Failure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code();
  } catch (const mpc::BudgetViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBudget;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
