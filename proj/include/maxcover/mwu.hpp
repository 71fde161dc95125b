#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maxcover/mpc.hpp"
#include "maxcover/rational.hpp"
#include "maxcover/set_system.hpp"

// Approximate solver for the packing form of the max-coverage LP:
//
//   maximize sum_i x_i
//   s.t.     x_i / f_i + (1/f_i) * sum_{S_j contains i} z_j <= 1   for all i
//            sum_j z_j = m - k,   x in [0,1]^n,  z in [0,1]^m
//
// where z_j = 1 - y_j. For a fixed objective L the feasibility question is
// answered by multiplicative weights over the region
// P = {(x, z) : sum x = L, sum z = m - k}, with an oracle that minimizes the
// weighted constraint sum over P by picking the L cheapest elements and the
// m - k cheapest sets.
namespace maxcover {

// Fixed-point numbers with `fraction_bits` binary digits after the point.
using Fixed = unsigned __int128;

// Step size and iteration count for one multiplicative-weights run.
struct MwuSchedule {
  // epsilon = 2^-eps_exponent; eps_exponent >= 2 so that epsilon <= 1/4.
  int eps_exponent = 2;
  // T = ceil(ln(2n) / (epsilon * ln 2)^2).
  std::int64_t iterations = 1;

  Rational epsilon() const;
  double epsilon_double() const;

  // Rounds `epsilon` down to a power of 1/2. Throws ValidationError unless
  // 0 < epsilon <= 1/4.
  static MwuSchedule for_universe(std::int64_t n, const Rational& epsilon);
};

std::int64_t mwu_iteration_count(std::int64_t n, int eps_exponent);

// Precision of the truncated prices. fraction_bits is 10 * ceil(log2 n)
// unless that would overflow 128 bits, in which case it is lowered to the
// largest width that still fits; either way it is at least the width needed
// for the truncation error to stay below 1/n^5.
struct FixedPointFormat {
  int fraction_bits = 0;
  // Prices p_i = w_i / f_i stay below 2^price_bits for the whole run; the
  // cap is max(4n^2, 2n(n + 1/(alpha n^5))) from the potential argument.
  int price_bits = 0;
  // Width of a q_j value on the wire.
  int q_wire_bits = 0;

  // Throws ValidationError when no width fits 128 bits.
  static FixedPointFormat for_instance(const SetSystem& sys, int eps_exponent);
};

// Exact integer accumulators A_i = sum_{d <= t} E_i^(d); the weight of
// element i is w_i = 2^(-epsilon * A_i / f_i).
struct WeightAccumulator {
  std::vector<std::int64_t> a;
  std::int64_t t = 0;

  static WeightAccumulator zeros(std::int64_t n) {
    return WeightAccumulator{std::vector<std::int64_t>(static_cast<std::size_t>(n), 0), 0};
  }
};

// 2^(-A / (f * 2^eps_exponent)) in binary64, evaluated as 2^q * 2^(r/D) with
// the exact integer split -A = q*D + r, D = f * 2^eps_exponent, 0 <= r < D.
double mwu_weight(std::int64_t accumulator, std::int64_t frequency, int eps_exponent);

struct TruncatedPQ {
  int fraction_bits = 0;
  std::vector<Fixed> p_hat;  // floor(p_i * 2^B)
  std::vector<Fixed> q_hat;  // sum_{i in S_j} p_hat_i
};

struct OracleResult {
  bool feasible = false;
  std::vector<std::uint8_t> x;  // n entries, exactly L ones
  std::vector<std::uint8_t> z;  // m entries, exactly m - k ones
  // Minimized sum p_hat.x + q_hat.z, scaled by 2^B.
  Fixed lhs_hat = 0;
  // floor(sum_i w_i * 2^B) computed term by term; the exact sum exceeds it by
  // less than n units.
  Fixed sum_w_floor = 0;
};

// Everything one oracle call looked at, for audits.
struct OracleTrace {
  std::int64_t n = 0;
  std::int64_t L = 0;
  std::span<const double> w;
  std::span<const double> p;  // w_i / f_i in binary64
  const TruncatedPQ* pq = nullptr;
  const OracleResult* result = nullptr;
};

// Reusable oracle state for one instance and step size: exponent tables,
// fixed-point format and scratch buffers.
class Oracle {
 public:
  Oracle(const SetSystem& sys, const FrequencyVector& f, int eps_exponent);

  // Optionally charges the gather of q_hat values and the broadcast of
  // (feasible, x, z) to `cluster`.
  const OracleResult& step(const WeightAccumulator& acc, std::int64_t L,
                           mpc::Cluster* cluster = nullptr,
                           const std::function<void(const OracleTrace&)>* hook = nullptr);

  const FixedPointFormat& format() const { return format_; }
  const TruncatedPQ& last_prices() const { return pq_; }
  std::span<const double> last_weights() const { return w_; }
  std::span<const double> last_p() const { return p_; }

 private:
  double weight(std::size_t i, std::int64_t a, std::int64_t f);

  const SetSystem* sys_;
  const FrequencyVector* f_;
  int eps_exponent_;
  FixedPointFormat format_;
  std::int64_t m_minus_k_;
  // tables_[f] holds 2^(r / (f * 2^e)) for r in [0, f * 2^e) when small.
  std::vector<std::vector<double>> tables_;

  std::vector<double> w_;
  std::vector<double> p_;
  std::vector<double> w_frac_;
  TruncatedPQ pq_;
  // Exponent split of the previous call, updated incrementally.
  std::vector<std::int64_t> last_a_;
  std::vector<std::int64_t> split_q_;
  std::vector<std::int64_t> split_r_;
  // p_hat << index_bits_ | i, so one integer order gives the (p_hat, i) order.
  int index_bits_ = 0;
  std::vector<Fixed> keys_x_;
  std::vector<std::int32_t> order_z_;
  OracleResult result_;
};

// Single oracle call with a throwaway Oracle.
OracleResult oracle_step(const WeightAccumulator& acc, const FrequencyVector& f,
                         const SetSystem& sys, std::int64_t L, int eps_exponent);

// Average of T binary iterates, kept as exact counts over a common
// denominator: x_i = x_count[i] / denominator.
struct FractionalPair {
  std::vector<std::int64_t> x_count;
  std::vector<std::int64_t> z_count;
  std::int64_t denominator = 1;

  Rational x(std::size_t i) const { return Rational(x_count[i], denominator); }
  Rational z(std::size_t j) const { return Rational(z_count[j], denominator); }
  Rational sum_x() const;
  Rational sum_z() const;

  friend bool operator==(const FractionalPair&, const FractionalPair&) = default;
};

// max_i (x_i + sum_{S_j contains i} z_j) / f_i, exactly.
Rational max_constraint_value(const SetSystem& sys, const FrequencyVector& f,
                              const FractionalPair& pair);

// Slack bound ln(n + 1/(alpha n^5)) / (T alpha) + alpha with
// alpha = epsilon ln 2; reduces to ln(2n)/(T alpha) + alpha for n >= 2.
double mwu_slack_bound(std::int64_t n, const MwuSchedule& schedule);

struct MwuIterationDump {
  std::int64_t t = 0;
  std::int64_t L = 0;
  bool feasible = false;
  double max_constraint_value = 0.0;  // of the running average
  double sum_w = 0.0;

  // One JSON object {"t", "L", "feasible", "max_constraint_value", "sum_w"}.
  std::string to_json() const;
};

struct MwuOptions {
  // Replaces T (tests only; the slack guarantee assumes the default).
  std::optional<std::int64_t> iterations_override;
  std::function<void(const OracleTrace&)> oracle_hook;
  std::function<void(const MwuIterationDump&)> iteration_hook;
};

struct MwuStats {
  std::int64_t iterations_run = 0;
  // max over iterations t and elements i of |A_i| / (2 n t).
  double max_accumulator_ratio = 0.0;
  // Entry width used for the accumulator broadcast in the last iteration.
  int accumulator_wire_bits = 0;
};

struct MwuOutcome {
  std::optional<FractionalPair> pair;  // empty when declared infeasible
  MwuStats stats;
};

// One multiplicative-weights run for objective L on `cluster`. The solve is
// folded into a single "mwu_solve" record of the cluster's log.
MwuOutcome mwu_solve(const SetSystem& sys, const FrequencyVector& f, std::int64_t L,
                     const MwuSchedule& schedule, mpc::Cluster& cluster,
                     const MwuOptions& options = {});

// floor((1+eps)^i) for i = 0, 1, ... below n, then n itself; ascending and
// deduplicated.
std::vector<std::int64_t> guess_grid(std::int64_t n, const Rational& epsilon);

// Guesses run concurrently per batch: ceil(log2(n + 1)).
std::int64_t guess_batch_size(std::int64_t n);

struct GuessOutcome {
  std::int64_t L = 0;
  bool feasible = false;
  MwuStats stats;
};

struct Pi1Solution {
  std::int64_t L_star = 0;
  FractionalPair pair;  // all-zero x and z with denominator 1 when L_star == 0
  MwuSchedule schedule;
  std::vector<GuessOutcome> guesses;
};

// Tries every grid value in batches and keeps the largest feasible one.
Pi1Solution solve_pi1(const SetSystem& sys, const FrequencyVector& f, const Rational& epsilon,
                      mpc::Cluster& cluster, const MwuOptions& options = {});

// Fractional solution of the original LP (x, y) with y = 1 - z.
struct LpSolution {
  std::vector<Rational> x;
  std::vector<Rational> y;
  Rational objective;    // sum x
  Rational budget_used;  // sum y
};

// x' = x/(1+eps), y = 1 - z/(1+eps). Verifies in exact arithmetic that the
// input satisfies every packing constraint up to 1+eps, and that the output
// has sum x' >= (1-4eps) sum x, sum y <= k + 2 eps m, and x'_i <= sum y_j
// over sets containing i. Throws ContractViolation otherwise.
LpSolution scale_to_pi0(const SetSystem& sys, const FrequencyVector& f,
                        const FractionalPair& pair, const Rational& epsilon);

}  // namespace maxcover
