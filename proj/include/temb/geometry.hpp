#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace temb {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Ids = std::vector<std::uint32_t>;

// Points are stored as the columns of a d x n matrix.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(Matrix points);

  std::size_t n() const { return static_cast<std::size_t>(points_.cols()); }
  std::size_t d() const { return static_cast<std::size_t>(points_.rows()); }
  auto col(std::size_t i) const { return points_.col(static_cast<Eigen::Index>(i)); }
  const Matrix& matrix() const { return points_; }

  PointSet subset(const Ids& ids) const;

 private:
  Matrix points_;
};

// Blocks are kept sorted internally and ordered by their smallest element.
struct Partition {
  std::vector<Ids> blocks;

  void canonicalize();
  std::size_t ground_size() const;
  bool operator==(const Partition& other) const = default;
};

class UnionFind {
 public:
  explicit UnionFind(std::size_t n);
  std::size_t find(std::size_t a);
  bool unite(std::size_t a, std::size_t b);
  std::size_t size_of(std::size_t a) { return size_[find(a)]; }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

// Components of the graph joining points at distance <= r. Block entries are
// the given ids.
Partition connected_components(const PointSet& X, const Ids& ids, double r);
Partition connected_components(const PointSet& X, double r);

// Smallest pairwise distance at which some component reaches
// max(2, ceil(n/2)) points.
double r_med_exact(const PointSet& X, const Ids& ids);
double r_med_exact(const PointSet& X);

// True iff every block of fine lies inside some block of coarse.
bool refines(const Partition& coarse, const Partition& fine);

struct Nearest {
  std::size_t index = 0;
  double distance = 0.0;
};

template <typename Derived>
Nearest brute_nearest(const PointSet& X, const Eigen::MatrixBase<Derived>& q) {
  Nearest best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < X.n(); ++i) {
    double dist = (X.col(i) - q).norm();
    if (dist < best.distance) best = {i, dist};
  }
  return best;
}

template <typename Derived>
Nearest brute_nearest(const PointSet& X, const Ids& ids, const Eigen::MatrixBase<Derived>& q) {
  Nearest best{ids.front(), std::numeric_limits<double>::infinity()};
  for (auto i : ids) {
    double dist = (X.col(i) - q).norm();
    if (dist < best.distance || (dist == best.distance && i < best.index)) best = {i, dist};
  }
  return best;
}

struct Dedup {
  PointSet unique;
  std::vector<std::size_t> to_unique;  // original index -> unique index
  std::vector<std::size_t> first;      // unique index -> first original index
};

Dedup deduplicate(const PointSet& X);

// Relative tolerance used for floating point equality.
inline bool nearly_equal(double a, double b, double tol = 1e-12) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

// (y - z, P(y - z)) normalized.
template <typename DY, typename DZ>
Vector lifted_direction(const Eigen::MatrixBase<DY>& y, const Eigen::MatrixBase<DZ>& z,
                        const Matrix& P) {
  Vector diff = y - z;
  Vector out(diff.size() + P.rows());
  out << diff, P * diff;
  double norm = out.norm();
  if (norm == 0.0) throw std::invalid_argument("zero direction");
  return out / norm;
}

// (q - y, -(v - P y)) normalized.
template <typename DQ, typename DY, typename DV>
Vector lifted_query(const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DY>& y,
                    const Eigen::MatrixBase<DV>& v, const Matrix& P) {
  Vector out(q.size() + P.rows());
  out << q - y, -(v - P * y);
  double norm = out.norm();
  if (norm == 0.0) throw std::invalid_argument("zero direction");
  return out / norm;
}

}  // namespace temb
