#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace maxcover {

// Elements are 1..n and sets are 1..m everywhere on the public surface.
using ElementId = std::int32_t;
using SetIndex = std::int32_t;

// A maximum-coverage instance: m sets over the universe [n] and a budget k.
// Immutable after construction. Each set is a strictly increasing id list.
class SetSystem {
 public:
  // Checks ids are in [1, n], lists strictly increasing and 1 <= k <= m.
  // The m <= n standing assumption is enforced by load_instance only, since
  // derived instances (normalized, subsampled) may legitimately shrink n.
  SetSystem(std::int64_t n, std::int64_t k, std::vector<std::vector<ElementId>> sets);

  std::int64_t n() const { return n_; }
  std::int64_t m() const { return static_cast<std::int64_t>(sets_.size()); }
  std::int64_t k() const { return k_; }

  // 1-based.
  std::span<const ElementId> set(SetIndex j) const { return sets_[j - 1]; }
  const std::vector<std::vector<ElementId>>& sets() const { return sets_; }

  // Sum of set sizes.
  std::int64_t total_size() const;
  std::int64_t max_set_size() const;

  SetSystem with_k(std::int64_t k) const { return SetSystem(n_, k, sets_); }

  friend bool operator==(const SetSystem&, const SetSystem&) = default;

 private:
  std::int64_t n_;
  std::int64_t k_;
  std::vector<std::vector<ElementId>> sets_;
};

// Sorted, distinct, 1-based set indices.
struct Selection {
  std::vector<SetIndex> indices;

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }

  // Sorts and deduplicates.
  static Selection from(std::vector<SetIndex> indices);

  friend bool operator==(const Selection&, const Selection&) = default;
};

// f[i-1] = number of sets containing element i.
using FrequencyVector = std::vector<std::int64_t>;

// Text format: "n m k" header, then one line of space-separated element ids
// per set (an empty line is an empty set). Duplicate ids inside a set are
// dropped and lists sorted. Throws ParseError naming the offending line.
SetSystem load_instance(std::istream& in);
SetSystem load_instance_file(const std::string& path);
SetSystem parse_instance(const std::string& text);

void write_instance(std::ostream& out, const SetSystem& sys);
std::string format_instance(const SetSystem& sys);

FrequencyVector frequency(const SetSystem& sys);

// Size of the union of the selected sets. Indices must be in [1, m].
std::int64_t coverage(const SetSystem& sys, std::span<const SetIndex> indices);
inline std::int64_t coverage(const SetSystem& sys, const Selection& sel) {
  return coverage(sys, sel.indices);
}

struct NormalizedInstance {
  SetSystem system;
  // original_element[i-1] is the id in the input instance of new element i.
  std::vector<ElementId> original_element;
  // True when nothing was removed.
  bool identity = false;
};

// Drops elements that no set covers and renumbers the rest 1..n' keeping
// their relative order. An instance covering nothing yields n' = 0.
NormalizedInstance normalize_covered(const SetSystem& sys);

struct GeneratorParams {
  std::int64_t n = 0;
  std::int64_t m = 0;
  std::int64_t k = 0;
  // Exactly one of these: each (set, element) pair present with probability
  // `density`, or every set a uniform random subset of `set_size` elements.
  std::optional<double> density;
  std::optional<std::int64_t> set_size;
  std::uint64_t seed = 0;
};

// Deterministic for a fixed seed. Throws ValidationError on parameters that
// cannot describe a valid instance.
SetSystem generate_random(const GeneratorParams& params);

}  // namespace maxcover
