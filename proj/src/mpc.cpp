#include "maxcover/mpc.hpp"

#include <algorithm>
#include <bit>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace maxcover::mpc {

int ceil_log2(std::uint64_t x) {
  if (x <= 1) return 0;
  return static_cast<int>(std::bit_width(x - 1));
}

int bits_for(std::uint64_t max_value) {
  return std::max(1, static_cast<int>(std::bit_width(max_value)));
}

namespace {

std::int64_t env_or(const char* name, std::int64_t fallback) {
  const char* raw = std::getenv(name);
  if (raw == nullptr || *raw == '\0') return fallback;
  char* end = nullptr;
  const long long value = std::strtoll(raw, &end, 10);
  if (end == raw || *end != '\0' || value < 0) {
    throw std::invalid_argument(std::string(name) + " must be a non-negative integer");
  }
  return value;
}

std::int64_t saturating_mul(std::int64_t a, std::int64_t b) {
  std::int64_t out;
  if (__builtin_mul_overflow(a, b, &out)) return std::numeric_limits<std::int64_t>::max();
  return out;
}

}  // namespace

MemoryModel MemoryModel::from_env() {
  MemoryModel model;
  model.mem_c = env_or("MPC_MEM_C", model.mem_c);
  model.mem_e = env_or("MPC_MEM_E", model.mem_e);
  return model;
}

std::int64_t MemoryModel::budget_bits(std::int64_t n) const {
  const std::int64_t log_term = ceil_log2(static_cast<std::uint64_t>(n + 2));
  std::int64_t budget = saturating_mul(mem_c, n);
  for (std::int64_t e = 0; e < mem_e; ++e) budget = saturating_mul(budget, log_term);
  return budget;
}

void RoundLog::append(RoundRecord record) { records_.push_back(std::move(record)); }

std::int64_t RoundLog::total_rounds() const {
  std::int64_t total = 0;
  for (const auto& r : records_) total += r.rounds;
  return total;
}

std::int64_t RoundLog::peak_bits() const {
  std::int64_t peak = 0;
  for (const auto& r : records_) peak = std::max(peak, r.peak_bits);
  return peak;
}

void RoundLog::write_json_lines(std::ostream& out) const {
  for (const auto& r : records_) {
    nlohmann::ordered_json line;
    line["primitive"] = r.primitive;
    line["rounds"] = r.rounds;
    line["peak_bits"] = r.peak_bits;
    out << line.dump() << '\n';
  }
}

std::string RoundLog::to_json_lines() const {
  std::ostringstream out;
  write_json_lines(out);
  return out.str();
}

RoundLog RoundLog::parse_json_lines(std::istream& in) {
  RoundLog log;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      RoundRecord r;
      r.primitive = j.at("primitive").get<std::string>();
      r.rounds = j.at("rounds").get<std::int64_t>();
      r.peak_bits = j.at("peak_bits").get<std::int64_t>();
      if (r.rounds < 0 || r.peak_bits < 0) throw std::invalid_argument("negative count");
      log.append(std::move(r));
    } catch (const std::exception& e) {
      throw std::invalid_argument("round log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return log;
}

BudgetViolation::BudgetViolation(int machine, std::int64_t round, std::int64_t bits,
                                 std::int64_t budget, std::string_view context)
    : std::runtime_error("memory budget exceeded during " + std::string(context) + ": machine " +
                         (machine < 0 ? std::string("<batch>") : std::to_string(machine)) +
                         " received " + std::to_string(bits) + " bits in round " +
                         std::to_string(round) + " (budget " + std::to_string(budget) + ")"),
      machine_(machine),
      round_(round),
      bits_(bits),
      budget_(budget) {}

Message pack_fixed_width(int from, int to, std::span<const std::uint64_t> values, int width) {
  if (width < 1 || width > 64) throw std::invalid_argument("width must be in [1, 64]");
  Message message{from, to, {}, static_cast<std::int64_t>(values.size()) * width};
  message.payload.assign(static_cast<std::size_t>((message.bit_size + 7) / 8), 0);
  std::int64_t pos = 0;
  for (std::uint64_t v : values) {
    if (width < 64 && (v >> width) != 0) throw std::invalid_argument("value does not fit width");
    for (int b = 0; b < width; ++b, ++pos) {
      if ((v >> b) & 1u) message.payload[pos / 8] |= static_cast<std::uint8_t>(1u << (pos % 8));
    }
  }
  return message;
}

std::vector<std::uint64_t> unpack_fixed_width(const Message& message, int width) {
  if (width < 1 || width > 64 || message.bit_size % width != 0) {
    throw std::invalid_argument("bit_size is not a multiple of width");
  }
  std::vector<std::uint64_t> values(static_cast<std::size_t>(message.bit_size / width), 0);
  std::int64_t pos = 0;
  for (auto& v : values) {
    for (int b = 0; b < width; ++b, ++pos) {
      if ((message.payload[pos / 8] >> (pos % 8)) & 1u) v |= std::uint64_t{1} << b;
    }
  }
  return values;
}

Cluster::Cluster(int machine_count, std::int64_t universe_n, MemoryModel model)
    : machine_count_(machine_count),
      universe_n_(universe_n),
      model_(model),
      budget_(model.budget_bits(universe_n)) {
  if (machine_count < 1) throw std::invalid_argument("cluster needs at least one machine");
  if (universe_n < 0) throw std::invalid_argument("universe size must be non-negative");
  inbox_scratch_.assign(static_cast<std::size_t>(machine_count_), 0);
}

void Cluster::check_machine(int machine) const {
  if (machine < 0 || machine >= machine_count_) {
    throw std::out_of_range("machine index " + std::to_string(machine) + " out of range");
  }
}

void Cluster::record(std::string_view primitive, std::int64_t rounds, std::int64_t peak_bits) {
  if (section_depth_ > 0) {
    section_rounds_ += rounds;
    section_peak_ = std::max(section_peak_, peak_bits);
    return;
  }
  log_.append(RoundRecord{std::string(primitive), rounds, peak_bits});
}

std::int64_t Cluster::charge_round(std::span<const std::pair<int, std::int64_t>> recipients,
                                   std::string_view context) {
  ++round_;
  std::int64_t peak = 0;
  for (const auto& [machine, bits] : recipients) {
    check_machine(machine);
    inbox_scratch_[machine] += bits;
  }
  int worst = -1;
  for (const auto& [machine, bits] : recipients) {
    const std::int64_t total = inbox_scratch_[machine];
    if (total > peak) {
      peak = total;
      worst = machine;
    }
  }
  for (const auto& [machine, bits] : recipients) inbox_scratch_[machine] = 0;
  if (peak > budget_) throw BudgetViolation(worst, round_, peak, budget_, context);
  peak_inbox_bits_ = std::max(peak_inbox_bits_, peak);
  return peak;
}

std::int64_t Cluster::charge_uniform_round(int recipients, std::int64_t bits,
                                           std::string_view context) {
  ++round_;
  if (recipients == 0) return 0;
  if (bits > budget_) throw BudgetViolation(1, round_, bits, budget_, context);
  peak_inbox_bits_ = std::max(peak_inbox_bits_, bits);
  return bits;
}

void Cluster::step_round(std::span<const Message> deliveries) {
  std::vector<std::pair<int, std::int64_t>> recipients;
  recipients.reserve(deliveries.size());
  for (const auto& msg : deliveries) {
    check_machine(msg.from);
    if (msg.bit_size < 0 || msg.bit_size > static_cast<std::int64_t>(msg.payload.size()) * 8) {
      throw std::invalid_argument("message bit_size does not match its payload");
    }
    recipients.emplace_back(msg.to, msg.bit_size);
  }
  const std::int64_t peak = charge_round(recipients, "step_round");
  record("step_round", 1, peak);
}

void Cluster::convergecast_sum_inplace(std::vector<std::vector<std::int64_t>>& vectors,
                                       int entry_bits, std::string_view primitive) {
  if (static_cast<int>(vectors.size()) != machine_count_) {
    throw std::invalid_argument("convergecast needs one vector per machine");
  }
  if (entry_bits < 1 || entry_bits > 62) throw std::invalid_argument("entry_bits out of range");
  const std::size_t len = vectors[0].size();
  const std::int64_t limit = std::int64_t{1} << entry_bits;
  for (const auto& v : vectors) {
    if (v.size() != len) throw std::invalid_argument("convergecast vectors differ in length");
    // Branch-free so the scan vectorizes; unsigned compare catches negatives.
    std::uint64_t bad = 0;
    const std::int64_t* data = v.data();
    for (std::size_t t = 0; t < len; ++t) {
      bad |= static_cast<std::uint64_t>(static_cast<std::uint64_t>(data[t]) >=
                                        static_cast<std::uint64_t>(limit));
    }
    if (bad != 0) throw std::invalid_argument("convergecast entry exceeds entry_bits");
  }
  const int depth = ceil_log2(static_cast<std::uint64_t>(machine_count_));
  const std::int64_t message_bits = static_cast<std::int64_t>(len) * (entry_bits + depth);
  std::int64_t peak = 0;
  std::vector<std::pair<int, std::int64_t>> recipients;
  for (int stride = 1; stride < machine_count_; stride *= 2) {
    recipients.clear();
    for (int i = 0; i + stride < machine_count_; i += 2 * stride) {
      std::int64_t* __restrict dst = vectors[i].data();
      const std::int64_t* __restrict src = vectors[i + stride].data();
      for (std::size_t t = 0; t < len; ++t) dst[t] += src[t];
      recipients.emplace_back(i, message_bits);
    }
    peak = std::max(peak, charge_round(recipients, primitive));
  }
  record(primitive, depth, peak);
}

void Cluster::convergecast_sum_sparse(std::vector<SparseVector>& vectors, std::int64_t len,
                                     int entry_bits, std::string_view primitive) {
  if (static_cast<int>(vectors.size()) != machine_count_) {
    throw std::invalid_argument("convergecast needs one vector per machine");
  }
  if (entry_bits < 1 || entry_bits > 62) throw std::invalid_argument("entry_bits out of range");
  const std::int64_t limit = std::int64_t{1} << entry_bits;
  for (const auto& v : vectors) {
    std::int64_t prev = -1;
    for (const auto& [index, value] : v) {
      if (index <= prev || index >= len) {
        throw std::invalid_argument("sparse convergecast indices must increase within [0, len)");
      }
      if (value < 0 || value >= limit) {
        throw std::invalid_argument("convergecast entry exceeds entry_bits");
      }
      prev = index;
    }
  }
  const int depth = ceil_log2(static_cast<std::uint64_t>(machine_count_));
  const std::int64_t message_bits = len * (entry_bits + depth);
  std::int64_t peak = 0;
  auto& recipients = recipients_scratch_;
  for (int stride = 1; stride < machine_count_; stride *= 2) {
    recipients.clear();
    for (int i = 0; i + stride < machine_count_; i += 2 * stride) {
      auto& dst = vectors[i];
      const auto& src = vectors[i + stride];
      if (!src.empty()) {
        merge_scratch_.clear();
        auto a = dst.begin();
        auto b = src.begin();
        while (a != dst.end() && b != src.end()) {
          if (a->first < b->first) {
            merge_scratch_.push_back(*a++);
          } else if (b->first < a->first) {
            merge_scratch_.push_back(*b++);
          } else {
            merge_scratch_.emplace_back(a->first, a->second + b->second);
            ++a;
            ++b;
          }
        }
        merge_scratch_.insert(merge_scratch_.end(), a, dst.end());
        merge_scratch_.insert(merge_scratch_.end(), b, src.end());
        dst.swap(merge_scratch_);
      }
      recipients.emplace_back(i, message_bits);
    }
    peak = std::max(peak, charge_round(recipients, primitive));
  }
  record(primitive, depth, peak);
}

std::vector<std::int64_t> Cluster::convergecast_sum(std::vector<std::vector<std::int64_t>> vectors,
                                                    int entry_bits) {
  convergecast_sum_inplace(vectors, entry_bits);
  return std::move(vectors[central()]);
}

void Cluster::broadcast(std::int64_t payload_bits, std::string_view primitive) {
  const std::int64_t peak = charge_uniform_round(machine_count_ - 1, payload_bits, primitive);
  record(primitive, 1, peak);
}

void Cluster::gather(std::span<const std::int64_t> bits_from, std::string_view primitive) {
  if (static_cast<int>(bits_from.size()) != machine_count_) {
    throw std::invalid_argument("gather needs one entry per machine");
  }
  std::int64_t total = 0;
  for (int j = 0; j < machine_count_; ++j) {
    if (j != central()) total += bits_from[j];
  }
  const std::pair<int, std::int64_t> recipient{central(), total};
  const std::int64_t peak = charge_round(std::span(&recipient, 1), primitive);
  record(primitive, 1, peak);
}

void Cluster::gather_uniform(std::int64_t bits, std::string_view primitive) {
  const std::pair<int, std::int64_t> recipient{central(), bits * (machine_count_ - 1)};
  const std::int64_t peak = charge_round(std::span(&recipient, 1), primitive);
  record(primitive, 1, peak);
}

void Cluster::neighbor_exchange(std::span<const Transfer> transfers, std::string_view primitive) {
  std::vector<std::pair<int, std::int64_t>> recipients;
  recipients.reserve(transfers.size());
  for (const auto& t : transfers) {
    check_machine(t.from);
    recipients.emplace_back(t.to, t.bits);
  }
  for (const auto& [machine, bits] : recipients) {
    check_machine(machine);
    if (++inbox_scratch_[machine] > kMaxNeighborFanIn) {
      for (const auto& r : recipients) inbox_scratch_[r.first] = 0;
      throw std::invalid_argument("neighbor_exchange: machine " + std::to_string(machine) +
                                  " receives too many messages in one round");
    }
  }
  for (const auto& r : recipients) inbox_scratch_[r.first] = 0;
  const std::int64_t peak = charge_round(recipients, primitive);
  record(primitive, 1, peak);
}

void Cluster::check_local_state(int machine, std::int64_t bits, std::string_view what) const {
  check_machine(machine);
  if (bits > budget_) throw BudgetViolation(machine, round_, bits, budget_, what);
}

Cluster::Section::Section(Cluster& cluster, std::string name) : cluster_(&cluster) {
  if (cluster_->section_depth_++ == 0) {
    cluster_->section_name_ = std::move(name);
    cluster_->section_rounds_ = 0;
    cluster_->section_peak_ = 0;
  }
}

Cluster::Section::~Section() {
  if (--cluster_->section_depth_ == 0) {
    cluster_->log_.append(RoundRecord{std::move(cluster_->section_name_),
                                      cluster_->section_rounds_, cluster_->section_peak_});
  }
}

Cluster Cluster::fork() const { return Cluster(machine_count_, universe_n_, model_); }

void Cluster::join_batch(std::span<const Cluster> members, std::string_view primitive) {
  std::int64_t rounds = 0;
  std::int64_t peak = 0;
  for (const auto& member : members) {
    rounds = std::max(rounds, member.round());
    peak += member.peak_inbox_bits();
  }
  if (peak > budget_) throw BudgetViolation(-1, round_ + rounds, peak, budget_, primitive);
  round_ += rounds;
  peak_inbox_bits_ = std::max(peak_inbox_bits_, peak);
  record(primitive, rounds, peak);
}

void Cluster::retarget(int machine_count) {
  if (machine_count < 1) throw std::invalid_argument("cluster needs at least one machine");
  machine_count_ = machine_count;
  inbox_scratch_.assign(static_cast<std::size_t>(machine_count_), 0);
}

}  // namespace maxcover::mpc
