#include "maxcover/mwu.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <nlohmann/json.hpp>

#include "maxcover/errors.hpp"

namespace maxcover {

namespace {

constexpr double kLn2 = 0.69314718055994530942;
// Tables above this many entries are not worth the memory.
constexpr std::int64_t kMaxTableSize = std::int64_t{1} << 15;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// 2^q as a double; exact whenever the result is representable.
double pow2(std::int64_t q) {
  if (q >= -1022 && q <= 1023) {
    return std::bit_cast<double>(static_cast<std::uint64_t>(q + 1023) << 52);
  }
  return std::ldexp(1.0, static_cast<int>(std::clamp<std::int64_t>(q, -2000, 2000)));
}

// Splits v >= 0 into floor(v) and the exact remainder v - floor(v).
// Returns false when floor(v) does not fit in 127 bits.
bool split_fixed(double v, Fixed& whole, double& frac) {
  if (v < 9223372036854775808.0) {
    // Truncation is floor for v >= 0, and v - floor(v) is exact in binary64.
    const auto ip = static_cast<std::uint64_t>(v);
    whole = static_cast<Fixed>(ip);
    frac = v - static_cast<double>(ip);
    return true;
  }
  // v >= 2^63 has no fractional bits.
  const auto bits = std::bit_cast<std::uint64_t>(v);
  const int exp = static_cast<int>((bits >> 52) & 0x7ff) - 1075;
  const std::uint64_t mant = (bits & ((std::uint64_t{1} << 52) - 1)) | (std::uint64_t{1} << 52);
  if (exp + 53 > 127) return false;
  whole = static_cast<Fixed>(mant) << exp;
  frac = 0.0;
  return true;
}

// Rational value of a finite double, exactly.
Rational exact(double v) {
  int exp = 0;
  const double mant = std::frexp(v, &exp);
  const auto scaled = static_cast<std::int64_t>(std::ldexp(mant, 53));
  Rational r(scaled);
  exp -= 53;
  if (exp >= 0) {
    r *= Rational(BigInt(1) << exp);
  } else {
    r /= Rational(BigInt(1) << -exp);
  }
  return r;
}

Rational to_rational(Fixed v) {
  BigInt hi = static_cast<std::uint64_t>(v >> 64);
  BigInt lo = static_cast<std::uint64_t>(v);
  return Rational((hi << 64) + lo);
}

void require_frequencies(const SetSystem& sys, const FrequencyVector& f) {
  if (static_cast<std::int64_t>(f.size()) != sys.n()) {
    throw ValidationError("frequency vector length differs from n");
  }
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] < 1) {
      throw ValidationError("element " + std::to_string(i + 1) +
                            " is in no set; normalize the instance first");
    }
  }
}

}  // namespace

Rational MwuSchedule::epsilon() const { return Rational(1, BigInt(1) << eps_exponent); }

double MwuSchedule::epsilon_double() const { return std::ldexp(1.0, -eps_exponent); }

std::int64_t mwu_iteration_count(std::int64_t n, int eps_exponent) {
  const double alpha = std::ldexp(1.0, -eps_exponent) * kLn2;
  const double t = std::ceil(std::log(2.0 * static_cast<double>(std::max<std::int64_t>(n, 1))) /
                             (alpha * alpha));
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(t));
}

MwuSchedule MwuSchedule::for_universe(std::int64_t n, const Rational& epsilon) {
  if (epsilon <= 0 || epsilon > Rational(1, 4)) {
    throw ValidationError("MWU step size must lie in (0, 1/4], got " + to_string(epsilon));
  }
  MwuSchedule s;
  s.eps_exponent = round_down_pow2_exponent(epsilon);
  if (s.eps_exponent > 40) throw ValidationError("MWU step size too small");
  s.iterations = mwu_iteration_count(n, s.eps_exponent);
  return s;
}

double mwu_slack_bound(std::int64_t n, const MwuSchedule& schedule) {
  const double nn = static_cast<double>(std::max<std::int64_t>(n, 1));
  const double alpha = schedule.epsilon_double() * kLn2;
  const double tail = 1.0 / (alpha * std::pow(nn, 5.0));
  return std::log(nn + std::max(nn, tail)) / (static_cast<double>(schedule.iterations) * alpha) +
         alpha;
}

FixedPointFormat FixedPointFormat::for_instance(const SetSystem& sys, int eps_exponent) {
  const std::int64_t n = std::max<std::int64_t>(sys.n(), 1);
  const std::int64_t nnz = sys.total_size();
  const double nn = static_cast<double>(n);
  const double alpha = std::ldexp(1.0, -eps_exponent) * kLn2;
  const double cap = std::max(4.0 * nn * nn, 2.0 * nn * (nn + 1.0 / (alpha * std::pow(nn, 5.0))));

  FixedPointFormat fmt;
  fmt.price_bits = static_cast<int>(std::ceil(std::log2(cap))) + 1;
  const int lg = mpc::ceil_log2(static_cast<std::uint64_t>(n));
  const int headroom = mpc::ceil_log2(static_cast<std::uint64_t>(n + nnz + 1));
  const int widest = 127 - fmt.price_bits - headroom;
  // 2^B >= n^5 (n + nnz) keeps the summed truncation error below 1/n^5.
  const int needed = 5 * lg + mpc::ceil_log2(static_cast<std::uint64_t>(n + nnz));
  fmt.fraction_bits = std::min(10 * std::max(1, lg), widest);
  if (fmt.fraction_bits < needed) {
    throw ValidationError("instance too large for 128-bit fixed-point prices (n=" +
                          std::to_string(n) + ")");
  }
  fmt.q_wire_bits = fmt.fraction_bits + fmt.price_bits +
                    mpc::ceil_log2(static_cast<std::uint64_t>(sys.max_set_size() + 1));
  return fmt;
}

double mwu_weight(std::int64_t accumulator, std::int64_t frequency, int eps_exponent) {
  const std::int64_t d = frequency << eps_exponent;
  const std::int64_t q = floor_div(-accumulator, d);
  const std::int64_t r = -accumulator - q * d;
  return std::exp2(static_cast<double>(r) / static_cast<double>(d)) * pow2(q);
}

Oracle::Oracle(const SetSystem& sys, const FrequencyVector& f, int eps_exponent)
    : sys_(&sys),
      f_(&f),
      eps_exponent_(eps_exponent),
      format_(FixedPointFormat::for_instance(sys, eps_exponent)),
      m_minus_k_(sys.m() - sys.k()) {
  require_frequencies(sys, f);
  const std::int64_t fmax = f.empty() ? 0 : *std::max_element(f.begin(), f.end());
  tables_.resize(static_cast<std::size_t>(fmax + 1));
  for (std::int64_t fi : f) {
    auto& table = tables_[fi];
    const std::int64_t d = fi << eps_exponent;
    if (!table.empty() || d > kMaxTableSize) continue;
    table.resize(static_cast<std::size_t>(d));
    for (std::int64_t r = 0; r < d; ++r) {
      table[r] = std::exp2(static_cast<double>(r) / static_cast<double>(d));
    }
  }
  const auto n = static_cast<std::size_t>(sys.n());
  const auto m = static_cast<std::size_t>(sys.m());
  w_.resize(n);
  p_.resize(n);
  w_frac_.resize(n);
  pq_.fraction_bits = format_.fraction_bits;
  pq_.p_hat.resize(n);
  pq_.q_hat.resize(m);
  last_a_.assign(n, 0);
  split_q_.assign(n, 0);
  split_r_.assign(n, 0);
  index_bits_ = mpc::bits_for(n == 0 ? 0 : n - 1);
  keys_x_.resize(n);
  order_z_.resize(m);
  result_.x.resize(n);
  result_.z.resize(m);
}

double Oracle::weight(std::size_t i, std::int64_t a, std::int64_t f) {
  const std::int64_t d = f << eps_exponent_;
  // -a = q*d + r with 0 <= r < d; a moves by little between calls.
  std::int64_t q = split_q_[i];
  std::int64_t r = split_r_[i] - (a - last_a_[i]);
  if (r < 0 || r >= d) {
    const std::int64_t carry = floor_div(r, d);
    q += carry;
    r -= carry * d;
  }
  last_a_[i] = a;
  split_q_[i] = q;
  split_r_[i] = r;
  const auto& table = tables_[f];
  const double frac = table.empty()
                          ? std::exp2(static_cast<double>(r) / static_cast<double>(d))
                          : table[r];
  return frac * pow2(q);
}

const OracleResult& Oracle::step(const WeightAccumulator& acc, std::int64_t L,
                                 mpc::Cluster* cluster,
                                 const std::function<void(const OracleTrace&)>* hook) {
  const SetSystem& sys = *sys_;
  const FrequencyVector& f = *f_;
  const std::int64_t n = sys.n();
  const std::int64_t m = sys.m();
  if (static_cast<std::int64_t>(acc.a.size()) != n) {
    throw ValidationError("accumulator length differs from n");
  }
  if (L < 0 || L > n) throw ValidationError("objective guess L must lie in [0, n]");

  const int B = format_.fraction_bits;
  const double scale = std::ldexp(1.0, B);
  const double price_cap = std::ldexp(1.0, format_.price_bits);
  Fixed w_floor = 0;
  double frac_sum = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double w = weight(static_cast<std::size_t>(i), acc.a[i], f[i]);
    const double p = w / static_cast<double>(f[i]);
    if (!(p < price_cap)) {
      throw ContractViolation("price of element " + std::to_string(i + 1) +
                              " left the fixed-point range");
    }
    w_[i] = w;
    p_[i] = p;
    double drop;
    split_fixed(p * scale, pq_.p_hat[i], drop);
    Fixed wf = 0;
    split_fixed(w * scale, wf, w_frac_[i]);
    w_floor += wf;
    frac_sum += w_frac_[i];
  }
  for (std::int64_t j = 0; j < m; ++j) {
    Fixed q = 0;
    for (ElementId e : sys.sets()[j]) q += pq_.p_hat[e - 1];
    pq_.q_hat[j] = q;
  }

  // L cheapest elements and m-k cheapest sets, ties to the lower index.
  const auto& ph = pq_.p_hat;
  const auto& qh = pq_.q_hat;
  for (std::int64_t i = 0; i < n; ++i) {
    keys_x_[i] = (ph[i] << index_bits_) | static_cast<Fixed>(i);
  }
  std::iota(order_z_.begin(), order_z_.end(), 0);
  auto by_q = [&qh](std::int32_t a, std::int32_t b) {
    return qh[a] != qh[b] ? qh[a] < qh[b] : a < b;
  };
  if (L > 0 && L < n) std::nth_element(keys_x_.begin(), keys_x_.begin() + L, keys_x_.end());
  if (m_minus_k_ > 0 && m_minus_k_ < m) {
    std::nth_element(order_z_.begin(), order_z_.begin() + m_minus_k_, order_z_.end(), by_q);
  }
  std::fill(result_.x.begin(), result_.x.end(), 0);
  std::fill(result_.z.begin(), result_.z.end(), 0);
  Fixed lhs = 0;
  const Fixed index_mask = (Fixed{1} << index_bits_) - 1;
  for (std::int64_t t = 0; t < L; ++t) {
    const auto i = static_cast<std::size_t>(keys_x_[t] & index_mask);
    result_.x[i] = 1;
    lhs += ph[i];
  }
  for (std::int64_t t = 0; t < m_minus_k_; ++t) {
    result_.z[order_z_[t]] = 1;
    lhs += qh[order_z_[t]];
  }
  result_.lhs_hat = lhs;
  result_.sum_w_floor = w_floor;

  // Feasible iff lhs <= sum_i w_i 2^B = w_floor + R with R in [0, n).
  if (lhs <= w_floor) {
    result_.feasible = true;
  } else if (lhs - w_floor >= static_cast<Fixed>(n)) {
    result_.feasible = false;
  } else {
    const double d = static_cast<double>(static_cast<std::uint64_t>(lhs - w_floor));
    const double margin = 1e-6;
    if (d > frac_sum + margin) {
      result_.feasible = false;
    } else if (d < frac_sum - margin) {
      result_.feasible = true;
    } else {
      Rational r = 0;
      for (double v : w_frac_) r += exact(v);
      result_.feasible = to_rational(lhs - w_floor) <= r;
    }
  }

  if (cluster != nullptr) {
    cluster->gather_uniform(format_.q_wire_bits, "oracle_gather");
    cluster->broadcast(n + m + 1, "oracle_broadcast");
  }
  if (hook != nullptr && *hook) {
    OracleTrace trace{n, L, w_, p_, &pq_, &result_};
    (*hook)(trace);
  }
  return result_;
}

OracleResult oracle_step(const WeightAccumulator& acc, const FrequencyVector& f,
                         const SetSystem& sys, std::int64_t L, int eps_exponent) {
  Oracle oracle(sys, f, eps_exponent);
  return oracle.step(acc, L);
}

Rational FractionalPair::sum_x() const {
  std::int64_t s = std::accumulate(x_count.begin(), x_count.end(), std::int64_t{0});
  return Rational(s, denominator);
}

Rational FractionalPair::sum_z() const {
  std::int64_t s = std::accumulate(z_count.begin(), z_count.end(), std::int64_t{0});
  return Rational(s, denominator);
}

namespace {

// c_i = x_count_i + sum_{S_j contains i} z_count_j.
std::vector<std::int64_t> constraint_numerators(const SetSystem& sys, const FractionalPair& pair) {
  std::vector<std::int64_t> c(pair.x_count);
  for (std::int64_t j = 0; j < sys.m(); ++j) {
    const std::int64_t zc = pair.z_count[j];
    if (zc == 0) continue;
    for (ElementId e : sys.sets()[j]) c[e - 1] += zc;
  }
  return c;
}

}  // namespace

std::string MwuIterationDump::to_json() const {
  nlohmann::ordered_json j;
  j["t"] = t;
  j["L"] = L;
  j["feasible"] = feasible;
  j["max_constraint_value"] = max_constraint_value;
  j["sum_w"] = sum_w;
  return j.dump();
}

Rational max_constraint_value(const SetSystem& sys, const FrequencyVector& f,
                              const FractionalPair& pair) {
  require_frequencies(sys, f);
  const auto c = constraint_numerators(sys, pair);
  // Compare c_i / f_i by cross multiplication.
  std::size_t best = 0;
  for (std::size_t i = 1; i < c.size(); ++i) {
    if (static_cast<__int128>(c[i]) * f[best] > static_cast<__int128>(c[best]) * f[i]) best = i;
  }
  if (c.empty()) return Rational(0);
  return Rational(c[best], f[best] * pair.denominator);
}

MwuOutcome mwu_solve(const SetSystem& sys, const FrequencyVector& f, std::int64_t L,
                     const MwuSchedule& schedule, mpc::Cluster& cluster,
                     const MwuOptions& options) {
  const std::int64_t n = sys.n();
  const std::int64_t m = sys.m();
  if (cluster.machine_count() < m) throw ValidationError("cluster has fewer machines than sets");
  const std::int64_t T = options.iterations_override.value_or(schedule.iterations);
  if (T < 1) throw ValidationError("iteration count must be positive");

  auto section = cluster.section("mwu_solve");
  Oracle oracle(sys, f, schedule.eps_exponent);
  WeightAccumulator acc = WeightAccumulator::zeros(n);
  FractionalPair pair{std::vector<std::int64_t>(static_cast<std::size_t>(n), 0),
                      std::vector<std::int64_t>(static_cast<std::size_t>(m), 0), T};
  std::vector<mpc::Cluster::SparseVector> cover(static_cast<std::size_t>(cluster.machine_count()));
  std::vector<std::int64_t> w_count(static_cast<std::size_t>(n), 0);
  const std::int64_t a_bound_unit = 2 * std::max(n, m);
  const int count_bits = mpc::bits_for(static_cast<std::uint64_t>(T));
  const std::function<void(const OracleTrace&)>* hook =
      options.oracle_hook ? &options.oracle_hook : nullptr;

  MwuOutcome outcome;
  MwuStats& stats = outcome.stats;
  for (std::int64_t t = 1; t <= T; ++t) {
    const OracleResult& res = oracle.step(acc, L, &cluster, hook);
    stats.iterations_run = t;
    if (!res.feasible) return outcome;
    for (std::int64_t i = 0; i < n; ++i) pair.x_count[i] += res.x[i];
    for (std::int64_t j = 0; j < m; ++j) pair.z_count[j] += res.z[j];

    // W_i = number of chosen sets containing i, summed up the tree.
    for (std::int64_t j = 0; j < static_cast<std::int64_t>(cover.size()); ++j) {
      auto& v = cover[j];
      v.clear();
      if (j < m && res.z[j]) {
        for (ElementId e : sys.sets()[j]) v.emplace_back(e - 1, 1);
      }
    }
    cluster.convergecast_sum_sparse(cover, n, 1, "mwu_cover_count");
    std::fill(w_count.begin(), w_count.end(), 0);
    for (const auto& [index, value] : cover[cluster.central()]) w_count[index] = value;

    const std::int64_t bound = a_bound_unit * t;
    std::int64_t worst = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      acc.a[i] += f[i] - res.x[i] - w_count[i];
      worst = std::max(worst, acc.a[i] < 0 ? -acc.a[i] : acc.a[i]);
    }
    acc.t = t;
    if (worst > bound) throw ContractViolation("MWU accumulator outgrew its bound");
    stats.max_accumulator_ratio = std::max(
        stats.max_accumulator_ratio,
        static_cast<double>(worst) / static_cast<double>(2 * std::max<std::int64_t>(n, 1) * t));

    stats.accumulator_wire_bits = 1 + mpc::bits_for(static_cast<std::uint64_t>(bound));
    cluster.broadcast(n * stats.accumulator_wire_bits, "mwu_weights");
    cluster.check_local_state(cluster.central(),
                              n * stats.accumulator_wire_bits + (n + m) * count_bits,
                              "mwu central state");

    if (options.iteration_hook) {
      MwuIterationDump dump;
      dump.t = t;
      dump.L = L;
      dump.feasible = true;
      FractionalPair running{pair.x_count, pair.z_count, t};
      dump.max_constraint_value = to_double(max_constraint_value(sys, f, running));
      for (double w : oracle.last_weights()) dump.sum_w += w;
      options.iteration_hook(dump);
    }
  }

  if (!options.iterations_override) {
    const Rational worst = max_constraint_value(sys, f, pair);
    const double bound = mwu_slack_bound(n, schedule);
    if (worst > Rational(1) + exact(bound * (1.0 + 1e-9))) {
      throw ContractViolation("MWU average violates its packing slack bound");
    }
  }
  outcome.pair = std::move(pair);
  return outcome;
}

std::vector<std::int64_t> guess_grid(std::int64_t n, const Rational& epsilon) {
  if (n < 1) throw ValidationError("guess grid needs n >= 1");
  if (epsilon <= 0) throw ValidationError("guess grid needs epsilon > 0");
  std::vector<std::int64_t> grid;
  const Rational ratio = Rational(1) + epsilon;
  Rational power = 1;
  while (true) {
    const BigInt v = floor(power);
    if (v >= n) break;
    const auto value = static_cast<std::int64_t>(v);
    if (grid.empty() || grid.back() != value) grid.push_back(value);
    power *= ratio;
  }
  grid.push_back(n);
  return grid;
}

std::int64_t guess_batch_size(std::int64_t n) {
  return std::max(1, mpc::ceil_log2(static_cast<std::uint64_t>(n) + 1));
}

Pi1Solution solve_pi1(const SetSystem& sys, const FrequencyVector& f, const Rational& epsilon,
                      mpc::Cluster& cluster, const MwuOptions& options) {
  require_frequencies(sys, f);
  const std::int64_t n = sys.n();
  const std::int64_t m = sys.m();
  Pi1Solution out;
  out.schedule = MwuSchedule::for_universe(n, epsilon);
  out.pair = FractionalPair{std::vector<std::int64_t>(static_cast<std::size_t>(n), 0),
                            std::vector<std::int64_t>(static_cast<std::size_t>(m), 0), 1};

  // Every machine learns f: indicator vectors summed to the central, then
  // broadcast back.
  {
    std::vector<std::vector<std::int64_t>> ind(
        static_cast<std::size_t>(cluster.machine_count()),
        std::vector<std::int64_t>(static_cast<std::size_t>(n), 0));
    for (std::int64_t j = 0; j < m; ++j) {
      for (ElementId e : sys.sets()[j]) ind[j][e - 1] = 1;
    }
    cluster.convergecast_sum_inplace(ind, 1, "frequency");
    cluster.broadcast(n * mpc::bits_for(static_cast<std::uint64_t>(m)), "frequency_broadcast");
  }

  const auto grid = guess_grid(n, out.schedule.epsilon());
  const auto batch = static_cast<std::size_t>(guess_batch_size(n));
  for (std::size_t start = 0; start < grid.size(); start += batch) {
    const std::size_t stop = std::min(grid.size(), start + batch);
    std::vector<mpc::Cluster> members;
    members.reserve(stop - start);
    for (std::size_t g = start; g < stop; ++g) {
      members.push_back(cluster.fork());
      MwuOutcome res = mwu_solve(sys, f, grid[g], out.schedule, members.back(), options);
      out.guesses.push_back(GuessOutcome{grid[g], res.pair.has_value(), res.stats});
      if (res.pair && grid[g] > out.L_star) {
        out.L_star = grid[g];
        out.pair = std::move(*res.pair);
      }
    }
    cluster.join_batch(members, "mwu_batch");
  }
  return out;
}

LpSolution scale_to_pi0(const SetSystem& sys, const FrequencyVector& f,
                        const FractionalPair& pair, const Rational& epsilon) {
  require_frequencies(sys, f);
  const std::int64_t n = sys.n();
  const std::int64_t m = sys.m();
  if (static_cast<std::int64_t>(pair.x_count.size()) != n ||
      static_cast<std::int64_t>(pair.z_count.size()) != m || pair.denominator < 1) {
    throw ValidationError("fractional pair does not match the instance");
  }
  if (epsilon < 0 || epsilon > Rational(1, 4)) {
    throw ValidationError("scaling epsilon must lie in [0, 1/4]");
  }
  const std::int64_t T = pair.denominator;
  const Rational one_eps = Rational(1) + epsilon;

  const auto c = constraint_numerators(sys, pair);
  for (std::int64_t i = 0; i < n; ++i) {
    if (Rational(c[i]) > one_eps * f[i] * T) {
      throw ContractViolation("element " + std::to_string(i + 1) +
                              " violates its packing constraint by more than 1+eps");
    }
  }

  LpSolution lp;
  lp.x.reserve(static_cast<std::size_t>(n));
  lp.y.reserve(static_cast<std::size_t>(m));
  const Rational unit = Rational(1) / (one_eps * T);
  for (std::int64_t i = 0; i < n; ++i) {
    lp.x.push_back(unit * pair.x_count[i]);
    lp.objective += lp.x.back();
  }
  for (std::int64_t j = 0; j < m; ++j) {
    lp.y.push_back(Rational(1) - unit * pair.z_count[j]);
    lp.budget_used += lp.y.back();
  }

  const Rational sum_x = pair.sum_x();
  if (lp.objective < (Rational(1) - 4 * epsilon) * sum_x) {
    throw ContractViolation("scaled objective lost more than a 4 eps fraction");
  }
  if (lp.budget_used > Rational(sys.k()) + 2 * epsilon * m) {
    throw ContractViolation("scaled budget exceeds k + 2 eps m");
  }
  std::vector<Rational> covered(static_cast<std::size_t>(n));
  for (std::int64_t j = 0; j < m; ++j) {
    if (lp.y[j] < 0 || lp.y[j] > 1) throw ContractViolation("scaled y left [0, 1]");
    for (ElementId e : sys.sets()[j]) covered[e - 1] += lp.y[j];
  }
  for (std::int64_t i = 0; i < n; ++i) {
    if (lp.x[i] < 0 || lp.x[i] > 1) throw ContractViolation("scaled x left [0, 1]");
    if (lp.x[i] > covered[i]) {
      throw ContractViolation("scaled x_" + std::to_string(i + 1) + " exceeds its cover");
    }
  }
  return lp;
}

}  // namespace maxcover
