#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "maxcover/mpc.hpp"
#include "maxcover/set_system.hpp"

namespace maxcover {

// phi[p] = |S_p \ (S_1 u ... u S_{p-1})| for an ordered collection.
struct MarginalVector {
  std::vector<std::int64_t> phi;

  std::int64_t total() const;
  friend bool operator==(const MarginalVector&, const MarginalVector&) = default;
};

// Parallel prefix unions. Position p (0-based) is held by machine
// machines[p], which must be distinct; by default position p sits on machine
// p. Each set must be strictly increasing. Pairs are merged odd into even,
// the unions recurse, and the even positions hand their prefixes back; an
// odd tail takes one extra round. Sizes then move one position right and the
// marginals are gathered at the central machine. The whole computation is
// folded into a single "prefix_coverage" log record.
MarginalVector prefix_coverage(mpc::Cluster& cluster,
                               std::span<const std::vector<ElementId>> ordered_sets,
                               std::span<const int> machines = {});

// Selected sets in ascending index order, each on the machine holding it.
MarginalVector prefix_coverage(mpc::Cluster& cluster, const SetSystem& sys, const Selection& sel);

// Sequential reference: the same marginals by a left-to-right scan.
MarginalVector sequential_marginals(std::span<const std::vector<ElementId>> ordered_sets);

struct TrimResult {
  Selection selection;
  std::vector<SetIndex> removed;
  std::int64_t removed_mass = 0;  // sum of phi over removed sets
};

// Drops the |sel| - k sets with the smallest phi, the larger index first on
// ties; phi must follow sel's ascending order. Re-evaluates coverage and
// throws ContractViolation if it fell below sum(phi) - removed mass. A
// selection of at most k sets is returned unchanged.
TrimResult trim_to_k(const SetSystem& sys, const Selection& sel, std::int64_t k,
                     const MarginalVector& phi);

}  // namespace maxcover
