#pragma once

#include "temb/geometry.hpp"

#include <cstdint>
#include <vector>

namespace temb {

struct Sketch {
  Matrix matrix;  // k x d
  std::uint64_t seed = 0;

  std::size_t k() const { return static_cast<std::size_t>(matrix.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(matrix.cols()); }
};

Sketch sample_sketch(std::size_t d, std::size_t k, std::uint64_t seed);

// ceil(c_k * eps^-2 * ln n), at least 2.
std::size_t default_sketch_rows(std::size_t n, double eps, double c_k = 8.0);

// max over distinct pairs of | |P(x - y)| / |x - y| - 1 |.
double pair_distortion(const Sketch& S, const PointSet& X);

struct DistortionReport {
  double max_pair_violation = 0.0;
  double max_sampled_hull_violation = 0.0;
  std::size_t samples = 0;
  // | |Pz| - |z| | for every random hull sample, in draw order.
  std::vector<double> sample_violations;

  double fraction_above(double eps) const;
};

// Random convex combinations of signed normalized differences. Every pure
// difference and the origin are checked as well.
DistortionReport sampled_hull_distortion(const Sketch& S, const PointSet& X, std::size_t samples,
                                         std::uint64_t seed);

template <typename DX, typename DY>
double inner_product_defect(const Matrix& P, const Eigen::MatrixBase<DX>& x,
                            const Eigen::MatrixBase<DY>& y) {
  return std::abs((P * x).dot(P * y) - x.dot(y));
}

// Largest deviation of a singular value of P from 1. Bounds the distortion of
// every vector when k >= d; equals 1 when P has a nontrivial kernel.
double spectral_distortion(const Sketch& S);

// Resamples with derived seeds until pair_distortion <= eps.
Sketch certified_sketch(const PointSet& X, std::size_t k, double eps, std::uint64_t seed,
                        int retries = 8);

// Orthonormal factorization P = basis * factor with factor of size
// min(k, max(d, 2)) x d. All geometry inside range(P) can be carried out on
// the small factor.
struct RangeFactor {
  Matrix basis;   // k x r, orthonormal columns
  Matrix factor;  // r x d
};

RangeFactor range_factor(const Sketch& S);

}  // namespace temb
