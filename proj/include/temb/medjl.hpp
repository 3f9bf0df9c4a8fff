#pragma once

#include "temb/geometry.hpp"
#include "temb/random.hpp"
#include "temb/sketch.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace temb {

struct MedianEnsemble {
  std::vector<Sketch> sketches;
  std::size_t k_prime = 0;
  double frobenius_cap = 0.0;
  std::vector<Matrix> projections;  // per sketch, k' x n

  // Triple sample over X plus one query slot (index n). Triples that avoid
  // the query slot have their worst defect cached per sketch.
  std::vector<std::array<std::uint32_t, 3>> query_triples;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> query_pairs;  // X-X pairs used by query_triples
  std::vector<Vector> pair_defects;                                  // per sketch, over query_pairs
  Vector base_defect;                                                // per sketch

  std::size_t m() const { return sketches.size(); }
};

std::size_t default_ensemble_size(std::size_t n, std::size_t d);
// ceil(4 ln n ln ln n), at least 2.
std::size_t default_ensemble_rows(std::size_t n);

MedianEnsemble build_ensemble(const PointSet& X, std::size_t m, std::size_t k_prime, double eps,
                              std::uint64_t seed, double c_frobenius = 2.0, int retries = 64);

// Wraps fixed sketches (used for identity checks).
MedianEnsemble ensemble_from_sketches(const PointSet& X, std::vector<Sketch> sketches,
                                      double c_frobenius = 2.0);

template <typename DX, typename DY, typename DZ>
double ap_ip_defect(const Matrix& P, const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DY>& y,
                    const Eigen::MatrixBase<DZ>& z) {
  Vector a = x - z, b = y - z;
  double scale = a.norm() * b.norm();
  if (scale == 0.0) return 0.0;
  return std::abs((P * a).dot(P * b) - a.dot(b)) / scale;
}

// Fraction of sketches whose worst defect over triples of X and q is <= eps.
// Exact over all triples when n <= 64, otherwise over a fixed sample of 1e5.
double good_fraction(const MedianEnsemble& E, const PointSet& X, const Vector& q, double eps);

// Per-sketch worst defect over the same triple set used by good_fraction.
Vector worst_defects(const MedianEnsemble& E, const PointSet& X, const Vector& q);

std::vector<std::size_t> sample_sketch_indices(const MedianEnsemble& E, std::size_t count, Rng& rng);

}  // namespace temb
