#include "temb/partition_tree.hpp"

#include "temb/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace temb {

double comp_rmed(const PointSet& X, const Ids& ids, double delta, std::uint64_t seed,
                 double c_rounds) {
  const std::size_t m = ids.size();
  if (m < 2) throw std::invalid_argument("comp_rmed needs at least two points");
  const auto rounds = static_cast<std::size_t>(std::ceil(c_rounds * std::log(1.0 / delta)));
  const std::size_t rank = std::max<std::size_t>(2, (m + 1) / 2);
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, m - 1);
  std::vector<double> dist(m);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t round = 0; round < std::max<std::size_t>(rounds, 1); ++round) {
    auto anchor = X.col(ids[pick(rng)]);
    for (std::size_t j = 0; j < m; ++j) dist[j] = (X.col(ids[j]) - anchor).norm();
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(rank - 1), dist.end());
    best = std::min(best, dist[rank - 1]);
  }
  return best;
}

PartitionRun construct_partition(const PointSet& X, const Ids& ids, double r, double delta,
                                 std::uint64_t seed, double edge_limit) {
  if (!(r > 0.0)) throw std::invalid_argument("partition radius must be positive");
  const std::size_t m = ids.size();
  PartitionRun run;
  const double md = static_cast<double>(m);
  run.edge_limit = edge_limit > 0.0 ? edge_limit : 1000.0 * md * md * r;
  const double tau = 10.0 * r;
  const auto rounds = static_cast<std::size_t>(std::ceil(10.0 * std::log(md / delta)));
  UnionFind uf(m);
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector g(static_cast<Eigen::Index>(X.d()));
  std::vector<std::pair<double, std::uint32_t>> proj(m);
  for (std::size_t round = 0; m > 1 && round < std::max<std::size_t>(rounds, 1); ++round) {
    for (Eigen::Index c = 0; c < g.size(); ++c) g[c] = gauss(rng);
    for (std::uint32_t a = 0; a < m; ++a) proj[a] = {X.col(ids[a]).dot(g), a};
    std::sort(proj.begin(), proj.end());
    std::size_t i = 0;
    while (i + 1 < m) {
      std::size_t end = i;
      while (end + 1 < m && proj[end + 1].first <= proj[i].first + tau) ++end;
      for (std::size_t j = i + 1; j <= end; ++j) {
        double len = (X.col(ids[proj[i].second]) - X.col(ids[proj[j].second])).norm();
        if (len <= run.edge_limit) {
          uf.unite(proj[i].second, proj[j].second);
          run.longest_edge = std::max(run.longest_edge, len);
          ++run.edges;
        }
      }
      i = std::max(i + 1, end);
    }
  }
  std::vector<std::size_t> slot(m, kNoNode);
  for (std::size_t a = 0; a < m; ++a) {
    std::size_t root = uf.find(a);
    if (slot[root] == kNoNode) {
      slot[root] = run.partition.blocks.size();
      run.partition.blocks.emplace_back();
    }
    run.partition.blocks[slot[root]].push_back(ids[a]);
  }
  run.partition.canonicalize();
  return run;
}

std::size_t PartitionTree::depth() const {
  std::vector<std::size_t> level(nodes.size(), 1);
  std::size_t deepest = nodes.empty() ? 0 : 1;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& node = nodes[i];
    for (auto c : node.low_children) level[c] = level[i] + 1;
    if (node.rep_child != kNoNode) level[node.rep_child] = level[i] + 1;
    deepest = std::max(deepest, level[i]);
  }
  return deepest;
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const PointSet& X, double delta, std::uint64_t seed, const TreeParams& params)
      : X_(X), delta_(delta), seed_(seed), params_(params) {}

  std::size_t build(Ids points) {
    const std::size_t id = tree_.nodes.size();
    tree_.nodes.emplace_back();
    tree_.total_size += points.size();
    if (points.size() == 1) {
      tree_.nodes[id].points = std::move(points);
      return id;
    }
    const double n = static_cast<double>(X_.n());
    const double delta_node = params_.c_prob * delta_ / (n * n);
    const double half = static_cast<double>(points.size()) / 2.0;
    for (int attempt = 0; attempt <= params_.retries; ++attempt) {
      auto stream = [&](std::uint64_t tag) {
        return derive_seed(seed_, {static_cast<std::uint64_t>(id), static_cast<std::uint64_t>(attempt), tag});
      };
      double r_apx = comp_rmed(X_, points, delta_node, stream(1), params_.c_rounds);
      const double r_low = r_apx / (1000.0 * n * n * n);
      const double size = static_cast<double>(points.size());
      PartitionRun low = construct_partition(X_, points, r_low, delta_node, stream(2),
                                             std::min(1000.0 * size * size * r_low, r_apx / (10.0 * n)));
      PartitionRun high = construct_partition(X_, points, r_apx, delta_node, stream(3));
      Ids rep;
      for (const auto& block : high.partition.blocks) rep.push_back(block.front());
      std::sort(rep.begin(), rep.end());
      bool balanced = static_cast<double>(rep.size()) <= half;
      for (const auto& block : low.partition.blocks) balanced &= static_cast<double>(block.size()) <= half;
      if (!balanced) continue;
      TreeNode& node = tree_.nodes[id];
      node.points = std::move(points);
      node.r_apx = r_apx;
      node.c_low = std::move(low.partition);
      node.c_high = std::move(high.partition);
      node.c_rep = rep;
      std::vector<std::size_t> children;
      const auto blocks = tree_.nodes[id].c_low.blocks;
      for (const auto& block : blocks) children.push_back(build(block));
      tree_.nodes[id].low_children = std::move(children);
      std::size_t rep_child = build(rep);
      tree_.nodes[id].rep_child = rep_child;
      return id;
    }
    throw std::runtime_error("tree construction failed");
  }

  PartitionTree finish() {
    tree_.n = X_.n();
    tree_.seed = seed_;
    tree_.delta = delta_;
    return std::move(tree_);
  }

 private:
  const PointSet& X_;
  double delta_;
  std::uint64_t seed_;
  TreeParams params_;
  PartitionTree tree_;
};

}  // namespace

PartitionTree construct_partition_tree(const PointSet& X, double delta, std::uint64_t seed,
                                       const TreeParams& params) {
  TreeBuilder builder(X, delta, seed, params);
  Ids all(X.n());
  std::iota(all.begin(), all.end(), 0u);
  builder.build(std::move(all));
  return builder.finish();
}

std::string check_tree(const PointSet& X, const PartitionTree& T) {
  const double n = static_cast<double>(T.n);
  std::size_t total = 0;
  for (std::size_t id = 0; id < T.nodes.size(); ++id) {
    const TreeNode& node = T.nodes[id];
    std::ostringstream where;
    where << "node " << id << ": ";
    total += node.points.size();
    if (node.leaf()) {
      if (!node.low_children.empty() || node.rep_child != kNoNode) return where.str() + "leaf with children";
      continue;
    }
    const double z = static_cast<double>(node.points.size());
    const double r = node.r_apx;
    double rmed = r_med_exact(X, node.points);
    if (!(rmed <= r && r <= z * rmed)) return where.str() + "r_apx outside [r_med, |Z| r_med]";
    if (!refines(connected_components(X, node.points, 1000.0 * z * z * r), node.c_high))
      return where.str() + "c_high not within CC(1000 |Z|^2 r_apx)";
    if (!refines(node.c_high, connected_components(X, node.points, r)))
      return where.str() + "CC(r_apx) does not refine c_high";
    if (!refines(connected_components(X, node.points, r / (10.0 * n)), node.c_low))
      return where.str() + "c_low not within CC(r_apx/(10n))";
    if (!refines(node.c_low, connected_components(X, node.points, r / (1000.0 * n * n * n))))
      return where.str() + "CC(r_apx/(1000n^3)) does not refine c_low";
    if (node.c_rep.size() != node.c_high.blocks.size()) return where.str() + "one representative per c_high block";
    for (const auto& block : node.c_high.blocks) {
      std::size_t hits = 0;
      for (auto p : node.c_rep) hits += std::binary_search(block.begin(), block.end(), p);
      if (hits != 1) return where.str() + "one representative per c_high block";
    }
    if (node.low_children.size() != node.c_low.blocks.size() || node.rep_child == kNoNode)
      return where.str() + "children do not match partitions";
    for (std::size_t b = 0; b < node.low_children.size(); ++b) {
      if (T.nodes[node.low_children[b]].points != node.c_low.blocks[b]) return where.str() + "child set mismatch";
      if (2.0 * static_cast<double>(node.c_low.blocks[b].size()) > z) return where.str() + "c_low child too large";
    }
    if (T.nodes[node.rep_child].points != node.c_rep) return where.str() + "rep child mismatch";
    if (2.0 * static_cast<double>(node.c_rep.size()) > z) return where.str() + "rep child too large";
  }
  if (total != T.total_size) return "total_size mismatch";
  if (T.n >= 3 && static_cast<double>(total) > 4.0 * n * std::log2(n)) return "total_size above 4 n log2 n";
  return {};
}

}  // namespace temb
