#include "temb/sketch.hpp"

#include "temb/random.hpp"

#include <cmath>
#include <stdexcept>

namespace temb {

Sketch sample_sketch(std::size_t d, std::size_t k, std::uint64_t seed) {
  if (d < 1 || k < 1) throw std::invalid_argument("sketch dimensions must be positive");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(k)));
  Sketch S;
  S.seed = seed;
  S.matrix.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
  // Row-major fill so the stream order matches the serialized layout.
  for (Eigen::Index r = 0; r < S.matrix.rows(); ++r)
    for (Eigen::Index c = 0; c < S.matrix.cols(); ++c) S.matrix(r, c) = gauss(rng);
  return S;
}

std::size_t default_sketch_rows(std::size_t n, double eps, double c_k) {
  double rows = std::ceil(c_k * std::log(static_cast<double>(std::max<std::size_t>(n, 2))) / (eps * eps));
  return std::max<std::size_t>(2, static_cast<std::size_t>(rows));
}

double pair_distortion(const Sketch& S, const PointSet& X) {
  const Matrix PX = S.matrix * X.matrix();
  double worst = 0.0;
  for (Eigen::Index a = 0; a < PX.cols(); ++a)
    for (Eigen::Index b = a + 1; b < PX.cols(); ++b) {
      double base = (X.matrix().col(a) - X.matrix().col(b)).norm();
      if (base == 0.0) continue;
      worst = std::max(worst, std::abs((PX.col(a) - PX.col(b)).norm() / base - 1.0));
    }
  return worst;
}

double DistortionReport::fraction_above(double eps) const {
  if (sample_violations.empty()) return 0.0;
  std::size_t count = 0;
  for (double v : sample_violations) count += v > eps;
  return static_cast<double>(count) / static_cast<double>(sample_violations.size());
}

DistortionReport sampled_hull_distortion(const Sketch& S, const PointSet& X, std::size_t samples,
                                         std::uint64_t seed) {
  const std::size_t n = X.n();
  if (n < 2) throw std::invalid_argument("hull sampling needs at least two points");
  DistortionReport report;
  report.max_pair_violation = pair_distortion(S, X);
  // Pure differences are extreme points of the hull; the origin maps to itself.
  report.max_sampled_hull_violation = report.max_pair_violation;

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::exponential_distribution<double> expo(1.0);
  const std::size_t terms = std::min<std::size_t>(50, n * (n - 1));
  const std::size_t batch = 512;
  const Matrix& M = X.matrix();
  Matrix Z(M.rows(), static_cast<Eigen::Index>(batch));
  std::vector<double> weights(terms);
  Matrix dist(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index a = 0; a < dist.rows(); ++a)
    for (Eigen::Index b = 0; b < dist.cols(); ++b) dist(a, b) = (M.col(a) - M.col(b)).norm();
  report.sample_violations.reserve(samples);
  for (std::size_t done = 0; done < samples;) {
    std::size_t count = std::min(batch, samples - done);
    for (std::size_t s = 0; s < count; ++s) {
      double total = 0.0;
      for (auto& w : weights) total += (w = expo(rng));
      auto z = Z.col(static_cast<Eigen::Index>(s));
      z.setZero();
      for (std::size_t t = 0; t < terms; ++t) {
        std::size_t a = pick(rng), b = pick(rng);
        while (b == a) b = pick(rng);
        double sign = (rng() & 1) ? 1.0 : -1.0;
        auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
        double len = dist(ia, ib);
        if (len == 0.0) continue;
        z.noalias() += (sign * weights[t] / (total * len)) * (M.col(ia) - M.col(ib));
      }
    }
    auto block = Z.leftCols(static_cast<Eigen::Index>(count));
    Matrix PZ = S.matrix * block;
    for (std::size_t s = 0; s < count; ++s) {
      auto c = static_cast<Eigen::Index>(s);
      double v = std::abs(PZ.col(c).norm() - block.col(c).norm());
      report.sample_violations.push_back(v);
      report.max_sampled_hull_violation = std::max(report.max_sampled_hull_violation, v);
    }
    done += count;
  }
  report.samples = samples + n * (n - 1) / 2 + 1;
  return report;
}

double spectral_distortion(const Sketch& S) {
  if (S.k() < S.d()) return 1.0;
  Eigen::JacobiSVD<Matrix> svd(S.matrix);
  const Vector& sv = svd.singularValues();
  return std::max(std::abs(sv.maxCoeff() - 1.0), std::abs(sv.minCoeff() - 1.0));
}

Sketch certified_sketch(const PointSet& X, std::size_t k, double eps, std::uint64_t seed,
                        int retries) {
  for (int attempt = 0; attempt <= retries; ++attempt) {
    Sketch S = sample_sketch(X.d(), k, derive_seed(seed, {0x5ce7c4, static_cast<std::uint64_t>(attempt)}));
    if (X.n() < 2 || pair_distortion(S, X) <= eps) return S;
  }
  throw std::runtime_error("sketch certification failed after retries");
}

RangeFactor range_factor(const Sketch& S) {
  const Eigen::Index k = S.matrix.rows();
  const Eigen::Index d = S.matrix.cols();
  RangeFactor out;
  if (k <= std::max<Eigen::Index>(d, 2)) {
    out.basis = Matrix::Identity(k, k);
    out.factor = S.matrix;
    return out;
  }
  const Eigen::Index r = std::max<Eigen::Index>(d, 2);
  Eigen::HouseholderQR<Matrix> qr(S.matrix);
  out.basis = qr.householderQ() * Matrix::Identity(k, r);
  out.factor = out.basis.transpose() * S.matrix;
  return out;
}

}  // namespace temb
