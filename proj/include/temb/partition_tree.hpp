#pragma once

#include "temb/geometry.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace temb {

// Minimum over ceil(c_rounds * ln(1/delta)) anchors of the distance to the
// max(2, ceil(m/2))-th closest point of ids (the anchor itself included).
double comp_rmed(const PointSet& X, const Ids& ids, double delta, std::uint64_t seed,
                 double c_rounds = 10.0);

struct PartitionRun {
  Partition partition;
  double edge_limit = 0.0;    // the length guard in force
  double longest_edge = 0.0;  // longest edge actually added
  std::size_t edges = 0;
};

// Random-projection sweep: ceil(10 ln(m/delta)) rounds, window 10r, edges
// accepted only up to edge_limit (default 1000 m^2 r).
PartitionRun construct_partition(const PointSet& X, const Ids& ids, double r, double delta,
                                 std::uint64_t seed, double edge_limit = -1.0);

inline constexpr std::size_t kNoNode = std::numeric_limits<std::size_t>::max();

struct TreeNode {
  Ids points;  // sorted
  double r_apx = 0.0;
  Partition c_low;
  Partition c_high;
  Ids c_rep;
  std::vector<std::size_t> low_children;  // aligned with c_low.blocks
  std::size_t rep_child = kNoNode;

  bool leaf() const { return points.size() == 1; }
};

struct TreeParams {
  double c_prob = 0.1;
  double c_rounds = 10.0;
  int retries = 8;
};

// Nodes are stored in preorder; the root is nodes[0].
struct PartitionTree {
  std::vector<TreeNode> nodes;
  std::size_t n = 0;  // size of the ground set
  std::size_t total_size = 0;
  std::uint64_t seed = 0;
  double delta = 0.0;

  const TreeNode& root() const { return nodes.front(); }
  std::size_t depth() const;
};

PartitionTree construct_partition_tree(const PointSet& X, double delta, std::uint64_t seed,
                                       const TreeParams& params = {});

// Exact check of every node against connected_components and r_med_exact.
// Returns an empty string when all invariants hold, else the first failure.
std::string check_tree(const PointSet& X, const PartitionTree& T);

}  // namespace temb
