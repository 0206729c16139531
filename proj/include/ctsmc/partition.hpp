#ifndef CTSMC_PARTITION_HPP
#define CTSMC_PARTITION_HPP

#include <optional>
#include <string>
#include <vector>

#include "ctsmc/alphabet.hpp"
#include "ctsmc/model.hpp"

namespace ctsmc {

// Contiguous blocks covering all sites; division sites are the block members
// whose context reaches outside their block, and carry no observed mutation
// for a valid island partition.
struct IslandPartition {
  std::vector<std::pair<int, int>> blocks;   // [lo, hi] inclusive, 0-based
  std::vector<std::vector<int>> division;    // D_j per block
  std::vector<std::vector<int>> boundary;    // dD_j per block
  std::vector<int> r_block;                  // observed mutations per block
  int r_star = 0;
  bool island = true;  // false for the single-block fallback with mutations at edges

  int B() const { return static_cast<int>(blocks.size()); }

  std::vector<int> block_sites(int j) const {
    std::vector<int> s;
    for (int i = blocks[static_cast<size_t>(j)].first; i <= blocks[static_cast<size_t>(j)].second; ++i)
      s.push_back(i);
    return s;
  }

  std::vector<int> all_division() const {
    std::vector<int> s;
    for (const auto& d : division) s.insert(s.end(), d.begin(), d.end());
    return s;
  }
  std::vector<int> all_boundary() const {
    std::vector<int> s;
    for (const auto& d : boundary) s.insert(s.end(), d.begin(), d.end());
    return s;
  }
};

struct PartitionResult {
  std::optional<IslandPartition> partition;
  std::string infeasible_reason;

  bool ok() const { return partition.has_value(); }
};

// Size of the largest connected component of mutated sites under context
// overlap (undirected closure of C_i intersecting C_j). 0 when x = y.
int r_star(const ContextModel& model, const Sequence& x, const Sequence& y);

// Island partition: one block per mutation component, division corridors
// unmutated. Cuts adjacent to the outermost islands hug those islands; the
// interior corridors are split at their midpoints. Reports infeasibility when
// two components are too close to leave an unmutated division corridor.
PartitionResult build_island_partition(const ContextModel& model, const Sequence& x,
                                       const Sequence& y);

// Trivial single-block partition (always valid; island only when r = 0).
IslandPartition single_block_partition(const ContextModel& model, const Sequence& x,
                                       const Sequence& y);

// Partition from caller-specified contiguous blocks; division and boundary
// sets are recomputed and `island` reflects whether division sites are
// unmutated.
IslandPartition partition_from_blocks(const ContextModel& model, const Sequence& x,
                                      const Sequence& y,
                                      const std::vector<std::pair<int, int>>& blocks);

}  // namespace ctsmc

#endif
