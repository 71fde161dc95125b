#pragma once

#include <algorithm>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// A synchronous message-passing simulator for the MPC model: a fixed set of
// machines, global rounds, and a per-machine cap on the bits received in any
// one round. Communication primitives move real data between simulated
// machines and charge rounds and bits to a shared ledger.
namespace maxcover::mpc {

// ceil(log2(x)) for x >= 1; 0 for x = 1.
int ceil_log2(std::uint64_t x);

// Bits needed to write any integer in [0, max_value]; at least 1.
int bits_for(std::uint64_t max_value);

// Per-machine budget: mem_c * n * ceil(log2(n + 2))^mem_e bits.
struct MemoryModel {
  std::int64_t mem_c = 64;
  std::int64_t mem_e = 2;

  // Defaults overridden by MPC_MEM_C / MPC_MEM_E when set.
  static MemoryModel from_env();

  std::int64_t budget_bits(std::int64_t n) const;

  friend bool operator==(const MemoryModel&, const MemoryModel&) = default;
};

struct RoundRecord {
  std::string primitive;
  std::int64_t rounds = 0;
  std::int64_t peak_bits = 0;

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

// Serialized as JSON lines {"primitive": str, "rounds": int, "peak_bits": int}.
class RoundLog {
 public:
  void append(RoundRecord record);

  const std::vector<RoundRecord>& records() const { return records_; }
  std::int64_t total_rounds() const;
  std::int64_t peak_bits() const;

  std::string to_json_lines() const;
  void write_json_lines(std::ostream& out) const;
  // Throws std::invalid_argument on malformed lines.
  static RoundLog parse_json_lines(std::istream& in);

  friend bool operator==(const RoundLog&, const RoundLog&) = default;

 private:
  std::vector<RoundRecord> records_;
};

class BudgetViolation : public std::runtime_error {
 public:
  BudgetViolation(int machine, std::int64_t round, std::int64_t bits, std::int64_t budget,
                  std::string_view context);

  // -1 when the violation is a batch total rather than a single machine.
  int machine() const { return machine_; }
  std::int64_t round() const { return round_; }
  std::int64_t bits() const { return bits_; }
  std::int64_t budget() const { return budget_; }

  // The ledger up to the failing round, attached by whoever owns the
  // top-level cluster so the caller can still flush it.
  const RoundLog& log() const { return log_; }
  void attach_log(RoundLog log) { log_ = std::move(log); }

 private:
  int machine_;
  std::int64_t round_;
  std::int64_t bits_;
  std::int64_t budget_;
  RoundLog log_;
};

// A point-to-point message. bit_size is the exact serialized length; payloads
// built with pack_fixed_width satisfy bit_size == values * width.
struct Message {
  int from = 0;
  int to = 0;
  std::vector<std::uint8_t> payload;
  std::int64_t bit_size = 0;
};

// Little-endian bit packing of `values`, each written in `width` bits.
Message pack_fixed_width(int from, int to, std::span<const std::uint64_t> values, int width);
std::vector<std::uint64_t> unpack_fixed_width(const Message& message, int width);

// Accounting-only description of a send, used by primitives whose payloads
// are moved in typed form.
struct Transfer {
  int from = 0;
  int to = 0;
  std::int64_t bits = 0;
};

class Cluster {
 public:
  Cluster(int machine_count, std::int64_t universe_n, MemoryModel model = MemoryModel::from_env());

  int machine_count() const { return machine_count_; }
  // The central machine is machine 0; machine j-1 holds set S_j.
  int central() const { return 0; }
  std::int64_t universe_n() const { return universe_n_; }
  std::int64_t round() const { return round_; }
  std::int64_t peak_inbox_bits() const { return peak_inbox_bits_; }
  std::int64_t memory_budget_bits() const { return budget_; }
  const MemoryModel& memory_model() const { return model_; }
  const RoundLog& log() const { return log_; }

  // One synchronous round delivering `deliveries`; charged per recipient.
  void step_round(std::span<const Message> deliveries);

  // Fixed complete binary tree on machine indices: in round r machine
  // i + 2^r sends its partial vector to machine i for every i that is a
  // multiple of 2^(r+1). Takes ceil(log2 machine_count) rounds; each message
  // is charged len * (entry_bits + ceil(log2 machine_count)) bits. Requires
  // one equal-length vector per machine with entries in [0, 2^entry_bits).
  // The sum ends up in vectors[central()]; other entries are clobbered.
  void convergecast_sum_inplace(std::vector<std::vector<std::int64_t>>& vectors, int entry_bits,
                                std::string_view primitive = "convergecast_sum");
  std::vector<std::int64_t> convergecast_sum(std::vector<std::vector<std::int64_t>> vectors,
                                             int entry_bits);

  // convergecast_sum_inplace for vectors held sparsely: each machine lists its
  // nonzero (index, value) entries by increasing index. Charged exactly like
  // the dense form of length `len`. The sum ends up in vectors[central()].
  using SparseVector = std::vector<std::pair<std::int32_t, std::int64_t>>;
  void convergecast_sum_sparse(std::vector<SparseVector>& vectors, std::int64_t len,
                               int entry_bits, std::string_view primitive = "convergecast_sum");

  // Same tree as convergecast_sum over arbitrary values and an associative
  // combine(left, right); each message is charged message_bits.
  template <class T, class Combine>
  T tree_reduce(std::vector<T> values, std::int64_t message_bits, Combine combine,
                std::string_view primitive);

  // Central sends one payload to every other machine: 1 round.
  void broadcast(std::int64_t payload_bits, std::string_view primitive = "broadcast");

  // Every non-central machine j sends bits_from[j] to the central: 1 round.
  void gather(std::span<const std::int64_t> bits_from, std::string_view primitive = "gather");
  // Uniform variant: every non-central machine sends `bits`.
  void gather_uniform(std::int64_t bits, std::string_view primitive = "gather");

  // Pairwise sends in a single round. Each receiver may appear at most
  // kMaxNeighborFanIn times.
  static constexpr int kMaxNeighborFanIn = 2;
  void neighbor_exchange(std::span<const Transfer> transfers,
                         std::string_view primitive = "neighbor_exchange");

  // Asserts that `bits` of machine-local state fit the budget.
  void check_local_state(int machine, std::int64_t bits, std::string_view what) const;

  // Folds every record produced while alive into a single log record named
  // `name`. Nested sections fold into the outermost one.
  class Section {
   public:
    Section(Cluster& cluster, std::string name);
    ~Section();
    Section(const Section&) = delete;
    Section& operator=(const Section&) = delete;

   private:
    Cluster* cluster_;
  };
  Section section(std::string name) { return Section(*this, std::move(name)); }

  // A fresh cluster with the same shape and budget, starting at round 0.
  Cluster fork() const;
  // Concurrent composition of forked members: rounds advance by the maximum
  // over members, per-machine load is the sum of the members' peaks.
  void join_batch(std::span<const Cluster> members, std::string_view primitive);

  // Continue the ledger on a different number of machines (used after
  // discarding sets).
  void retarget(int machine_count);

 private:
  void record(std::string_view primitive, std::int64_t rounds, std::int64_t peak_bits);
  // Charges one round; `recipients` lists (machine, bits) and may repeat.
  std::int64_t charge_round(std::span<const std::pair<int, std::int64_t>> recipients,
                            std::string_view context);
  std::int64_t charge_uniform_round(int recipients, std::int64_t bits, std::string_view context);
  void check_machine(int machine) const;

  int machine_count_;
  std::int64_t universe_n_;
  MemoryModel model_;
  std::int64_t budget_;
  std::int64_t round_ = 0;
  std::int64_t peak_inbox_bits_ = 0;
  RoundLog log_;

  int section_depth_ = 0;
  std::string section_name_;
  std::int64_t section_rounds_ = 0;
  std::int64_t section_peak_ = 0;

  std::vector<std::int64_t> inbox_scratch_;
  SparseVector merge_scratch_;
  std::vector<std::pair<int, std::int64_t>> recipients_scratch_;
};

template <class T, class Combine>
T Cluster::tree_reduce(std::vector<T> values, std::int64_t message_bits, Combine combine,
                       std::string_view primitive) {
  if (static_cast<int>(values.size()) != machine_count_) {
    throw std::invalid_argument("tree_reduce needs one value per machine");
  }
  const int rounds = ceil_log2(static_cast<std::uint64_t>(machine_count_));
  std::int64_t peak = 0;
  std::vector<std::pair<int, std::int64_t>> recipients;
  for (int stride = 1; stride < machine_count_; stride *= 2) {
    recipients.clear();
    for (int i = 0; i + stride < machine_count_; i += 2 * stride) {
      values[i] = combine(values[i], values[i + stride]);
      recipients.emplace_back(i, message_bits);
    }
    peak = std::max(peak, charge_round(recipients, primitive));
  }
  record(primitive, rounds, peak);
  return values[central()];
}

}  // namespace maxcover::mpc
