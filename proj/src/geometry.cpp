#include "temb/geometry.hpp"

#include <numeric>

namespace temb {

PointSet::PointSet(Matrix points) : points_(std::move(points)) {
  if (points_.rows() < 1) throw std::invalid_argument("point dimension must be at least 1");
  if (points_.cols() < 1) throw std::invalid_argument("point set must be nonempty");
  if (!points_.allFinite()) throw std::invalid_argument("non-finite coordinate");
}

PointSet PointSet::subset(const Ids& ids) const {
  Matrix sub(points_.rows(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t j = 0; j < ids.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = col(ids[j]);
  return PointSet(std::move(sub));
}

void Partition::canonicalize() {
  for (auto& b : blocks) std::sort(b.begin(), b.end());
  std::sort(blocks.begin(), blocks.end(),
            [](const Ids& a, const Ids& b) { return a.front() < b.front(); });
}

std::size_t Partition::ground_size() const {
  std::size_t total = 0;
  for (const auto& b : blocks) total += b.size();
  return total;
}

UnionFind::UnionFind(std::size_t n) : parent_(n), size_(n, 1) {
  std::iota(parent_.begin(), parent_.end(), std::size_t{0});
}

std::size_t UnionFind::find(std::size_t a) {
  while (parent_[a] != a) {
    parent_[a] = parent_[parent_[a]];
    a = parent_[a];
  }
  return a;
}

bool UnionFind::unite(std::size_t a, std::size_t b) {
  a = find(a);
  b = find(b);
  if (a == b) return false;
  if (size_[a] < size_[b]) std::swap(a, b);
  parent_[b] = a;
  size_[a] += size_[b];
  return true;
}

namespace {

Partition components_of(UnionFind& uf, const Ids& ids) {
  std::vector<std::size_t> slot(ids.size(), SIZE_MAX);
  Partition out;
  for (std::size_t a = 0; a < ids.size(); ++a) {
    std::size_t root = uf.find(a);
    if (slot[root] == SIZE_MAX) {
      slot[root] = out.blocks.size();
      out.blocks.emplace_back();
    }
    out.blocks[slot[root]].push_back(ids[a]);
  }
  out.canonicalize();
  return out;
}

Ids all_ids(std::size_t n) {
  Ids ids(n);
  std::iota(ids.begin(), ids.end(), 0u);
  return ids;
}

}  // namespace

Partition connected_components(const PointSet& X, const Ids& ids, double r) {
  UnionFind uf(ids.size());
  for (std::size_t a = 0; a < ids.size(); ++a)
    for (std::size_t b = a + 1; b < ids.size(); ++b)
      if ((X.col(ids[a]) - X.col(ids[b])).norm() <= r) uf.unite(a, b);
  return components_of(uf, ids);
}

Partition connected_components(const PointSet& X, double r) {
  return connected_components(X, all_ids(X.n()), r);
}

double r_med_exact(const PointSet& X, const Ids& ids) {
  const std::size_t m = ids.size();
  if (m < 2) throw std::invalid_argument("r_med undefined for a single point");
  struct Edge {
    double length;
    std::uint32_t a, b;
  };
  std::vector<Edge> edges;
  edges.reserve(m * (m - 1) / 2);
  for (std::uint32_t a = 0; a < m; ++a)
    for (std::uint32_t b = a + 1; b < m; ++b)
      edges.push_back({(X.col(ids[a]) - X.col(ids[b])).norm(), a, b});
  std::sort(edges.begin(), edges.end(),
            [](const Edge& x, const Edge& y) { return x.length < y.length; });
  const std::size_t threshold = std::max<std::size_t>(2, (m + 1) / 2);
  UnionFind uf(m);
  for (const auto& e : edges) {
    uf.unite(e.a, e.b);
    if (uf.size_of(e.a) >= threshold) return e.length;
  }
  return edges.back().length;
}

double r_med_exact(const PointSet& X) { return r_med_exact(X, all_ids(X.n())); }

bool refines(const Partition& coarse, const Partition& fine) {
  std::size_t ground = coarse.ground_size();
  if (ground != fine.ground_size()) throw std::invalid_argument("mismatched ground sets");
  std::uint32_t max_id = 0;
  for (const auto& b : coarse.blocks)
    for (auto i : b) max_id = std::max(max_id, i);
  std::vector<std::size_t> owner(static_cast<std::size_t>(max_id) + 1, SIZE_MAX);
  for (std::size_t k = 0; k < coarse.blocks.size(); ++k)
    for (auto i : coarse.blocks[k]) owner[i] = k;
  for (const auto& b : fine.blocks) {
    if (b.empty()) continue;
    if (b.front() > max_id || owner[b.front()] == SIZE_MAX)
      throw std::invalid_argument("mismatched ground sets");
    std::size_t k = owner[b.front()];
    for (auto i : b) {
      if (i > max_id || owner[i] == SIZE_MAX) throw std::invalid_argument("mismatched ground sets");
      if (owner[i] != k) return false;
    }
  }
  return true;
}

Dedup deduplicate(const PointSet& X) {
  const std::size_t n = X.n();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const Matrix& M = X.matrix();
  auto less = [&](std::size_t a, std::size_t b) {
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
      if (M(r, a) != M(r, b)) return M(r, a) < M(r, b);
    }
    return a < b;
  };
  std::sort(order.begin(), order.end(), less);
  Dedup out;
  out.to_unique.assign(n, 0);
  std::vector<std::size_t> group_of(n);
  std::vector<std::size_t> group_first;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t i = order[k];
    if (k == 0 || M.col(i) != M.col(order[k - 1])) group_first.push_back(i);
    group_of[i] = group_first.size() - 1;
  }
  // Unique points keep the order of their first occurrence.
  std::vector<std::size_t> firsts = group_first;
  std::sort(firsts.begin(), firsts.end());
  std::vector<std::size_t> group_rank(group_first.size());
  for (std::size_t g = 0; g < group_first.size(); ++g)
    group_rank[g] = static_cast<std::size_t>(
        std::lower_bound(firsts.begin(), firsts.end(), group_first[g]) - firsts.begin());
  Matrix U(M.rows(), static_cast<Eigen::Index>(firsts.size()));
  for (std::size_t u = 0; u < firsts.size(); ++u) U.col(static_cast<Eigen::Index>(u)) = M.col(firsts[u]);
  for (std::size_t i = 0; i < n; ++i) out.to_unique[i] = group_rank[group_of[i]];
  out.first = std::move(firsts);
  out.unique = PointSet(std::move(U));
  return out;
}

}  // namespace temb
