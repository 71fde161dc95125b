#include "maxcover/prefix_trim.hpp"

#include <algorithm>
#include <iterator>
#include <numeric>
#include <string>

#include "maxcover/errors.hpp"

namespace maxcover {

std::int64_t MarginalVector::total() const {
  return std::accumulate(phi.begin(), phi.end(), std::int64_t{0});
}

namespace {

using Elements = std::vector<ElementId>;

struct Held {
  int machine;
  Elements set;
};

Elements set_union(const Elements& a, const Elements& b) {
  Elements out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

class PrefixRunner {
 public:
  PrefixRunner(mpc::Cluster& cluster, int element_bits)
      : cluster_(cluster), element_bits_(element_bits) {}

  // prefixes[p] = union of items[0..p], left on items[p].machine.
  std::vector<Elements> run(const std::vector<Held>& items) {
    const std::size_t r = items.size();
    if (r == 1) return {items[0].set};
    if (r % 2 == 1) {
      std::vector<Held> head(items.begin(), items.end() - 1);
      auto prefixes = run(head);
      send({{items[r - 2].machine, items[r - 1].machine, bits(prefixes.back())}});
      prefixes.push_back(set_union(prefixes.back(), items[r - 1].set));
      return prefixes;
    }

    // Odd positions (1-based) hand their set to the even neighbour.
    std::vector<mpc::Transfer> handoff;
    std::vector<Held> pairs;
    for (std::size_t j = 0; j + 1 < r; j += 2) {
      handoff.push_back({items[j].machine, items[j + 1].machine, bits(items[j].set)});
      pairs.push_back({items[j + 1].machine, set_union(items[j].set, items[j + 1].set)});
    }
    send(handoff);
    const auto inner = run(pairs);

    std::vector<Elements> prefixes(r);
    prefixes[0] = items[0].set;
    std::vector<mpc::Transfer> completion;
    for (std::size_t j = 0; j < pairs.size(); ++j) {
      prefixes[2 * j + 1] = inner[j];
      if (j > 0) {
        completion.push_back({items[2 * j - 1].machine, items[2 * j].machine, bits(inner[j - 1])});
        prefixes[2 * j] = set_union(inner[j - 1], items[2 * j].set);
      }
    }
    if (!completion.empty()) send(completion);
    return prefixes;
  }

 private:
  std::int64_t bits(const Elements& s) const {
    return static_cast<std::int64_t>(s.size()) * element_bits_;
  }
  void send(const std::vector<mpc::Transfer>& transfers) {
    cluster_.neighbor_exchange(transfers, "prefix_exchange");
  }

  mpc::Cluster& cluster_;
  int element_bits_;
};

}  // namespace

MarginalVector prefix_coverage(mpc::Cluster& cluster,
                               std::span<const std::vector<ElementId>> ordered_sets,
                               std::span<const int> machines) {
  const std::size_t r = ordered_sets.size();
  if (r == 0) throw ValidationError("prefix coverage needs at least one set");
  if (!machines.empty() && machines.size() != r) {
    throw ValidationError("one machine per ordered set is required");
  }
  std::vector<Held> items;
  items.reserve(r);
  std::vector<char> used(static_cast<std::size_t>(cluster.machine_count()), 0);
  for (std::size_t p = 0; p < r; ++p) {
    const auto& s = ordered_sets[p];
    for (std::size_t t = 1; t < s.size(); ++t) {
      if (s[t] <= s[t - 1]) throw ValidationError("prefix sets must be strictly increasing");
    }
    const int machine = machines.empty() ? static_cast<int>(p) : machines[p];
    if (machine < 0 || machine >= cluster.machine_count()) {
      throw ValidationError("prefix position " + std::to_string(p + 1) + " has no machine");
    }
    if (used[machine]++) throw ValidationError("prefix positions must sit on distinct machines");
    items.push_back({machine, s});
  }

  auto section = cluster.section("prefix_coverage");
  const int element_bits = mpc::bits_for(static_cast<std::uint64_t>(cluster.universe_n()));
  PrefixRunner runner(cluster, element_bits);
  const auto prefixes = runner.run(items);

  MarginalVector out;
  out.phi.resize(r);
  if (r > 1) {
    // Each position learns the size of its left neighbour's prefix.
    std::vector<mpc::Transfer> sizes;
    for (std::size_t p = 1; p < r; ++p) {
      sizes.push_back({items[p - 1].machine, items[p].machine, element_bits});
    }
    cluster.neighbor_exchange(sizes, "prefix_sizes");
  }
  std::vector<std::int64_t> gather_bits(static_cast<std::size_t>(cluster.machine_count()), 0);
  for (std::size_t p = 0; p < r; ++p) {
    const auto before = p == 0 ? std::size_t{0} : prefixes[p - 1].size();
    out.phi[p] = static_cast<std::int64_t>(prefixes[p].size() - before);
    gather_bits[items[p].machine] = element_bits;
  }
  cluster.gather(gather_bits, "prefix_gather");
  return out;
}

MarginalVector prefix_coverage(mpc::Cluster& cluster, const SetSystem& sys, const Selection& sel) {
  std::vector<std::vector<ElementId>> sets;
  std::vector<int> machines;
  for (SetIndex j : sel.indices) {
    if (j < 1 || j > sys.m()) throw ValidationError("selected set index out of range");
    sets.emplace_back(sys.set(j).begin(), sys.set(j).end());
    machines.push_back(j - 1);
  }
  return prefix_coverage(cluster, sets, machines);
}

MarginalVector sequential_marginals(std::span<const std::vector<ElementId>> ordered_sets) {
  ElementId top = 0;
  for (const auto& s : ordered_sets) {
    for (ElementId e : s) top = std::max(top, e);
  }
  std::vector<char> seen(static_cast<std::size_t>(top) + 1, 0);
  MarginalVector out;
  for (const auto& s : ordered_sets) {
    std::int64_t fresh = 0;
    for (ElementId e : s) {
      if (!seen[e]) {
        seen[e] = 1;
        ++fresh;
      }
    }
    out.phi.push_back(fresh);
  }
  return out;
}

TrimResult trim_to_k(const SetSystem& sys, const Selection& sel, std::int64_t k,
                     const MarginalVector& phi) {
  if (phi.phi.size() != sel.size()) throw ValidationError("phi length differs from the selection");
  TrimResult out;
  const auto r = static_cast<std::int64_t>(sel.size());
  if (r <= k) {
    out.selection = sel;
    return out;
  }
  std::vector<std::size_t> order(sel.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (phi.phi[a] != phi.phi[b]) return phi.phi[a] < phi.phi[b];
    return sel.indices[a] > sel.indices[b];
  });
  std::vector<char> drop(sel.size(), 0);
  for (std::int64_t t = 0; t < r - k; ++t) {
    drop[order[t]] = 1;
    out.removed.push_back(sel.indices[order[t]]);
    out.removed_mass += phi.phi[order[t]];
  }
  std::vector<SetIndex> kept;
  for (std::size_t p = 0; p < sel.size(); ++p) {
    if (!drop[p]) kept.push_back(sel.indices[p]);
  }
  out.selection = Selection{std::move(kept)};
  if (coverage(sys, out.selection) < phi.total() - out.removed_mass) {
    throw ContractViolation("trimmed selection lost more than its removed marginals");
  }
  return out;
}

}  // namespace maxcover
