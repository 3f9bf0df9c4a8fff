#include "temb/datasets.hpp"

#include "temb/random.hpp"

namespace temb {

PointSet gaussian_mixture(std::size_t n, std::size_t d, std::size_t clusters, double separation,
                          std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> gauss;
  const auto dd = static_cast<Eigen::Index>(d);
  const auto c = static_cast<Eigen::Index>(std::max<std::size_t>(1, clusters));
  Matrix centers = Matrix::NullaryExpr(dd, c, [&] { return separation * gauss(rng); });
  std::uniform_int_distribution<Eigen::Index> pick(0, c - 1);
  Matrix X(dd, static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    auto k = pick(rng);
    for (Eigen::Index i = 0; i < dd; ++i) X(i, j) = centers(i, k) + gauss(rng);
  }
  return PointSet(std::move(X));
}

PointSet uniform_cube(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unif;
  return PointSet(Matrix::NullaryExpr(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n),
                                      [&] { return unif(rng); }));
}

PointSet near_collinear(std::size_t n, std::size_t d, double noise, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const auto dd = static_cast<Eigen::Index>(d);
  Vector dir = Vector::NullaryExpr(dd, [&] { return gauss(rng); }).normalized();
  Vector origin = Vector::NullaryExpr(dd, [&] { return gauss(rng); });
  Matrix X(dd, static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    double t = 10.0 * unif(rng);
    for (Eigen::Index i = 0; i < dd; ++i) X(i, j) = origin[i] + t * dir[i] + noise * gauss(rng);
  }
  return PointSet(std::move(X));
}

}  // namespace temb
