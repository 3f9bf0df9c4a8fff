#include "temb/ellipsoid.hpp"

#include <doctest.h>

#include <random>

using namespace temb;

TEST_CASE("two dimensional cut") {
  EllipsoidState s = ellipsoid_start(Vector::Zero(2), 1.0);
  Vector v = Vector::Unit(2, 0);
  EllipsoidState t = ellipsoid_update(s, v);
  CHECK(t.center[0] == doctest::Approx(1.0 / 3));
  CHECK(t.center[1] == doctest::Approx(0.0));
  Matrix expect = 4.0 / 3 * (Matrix::Identity(2, 2) - 2.0 / 3 * v * v.transpose());
  CHECK((t.shape - expect).norm() < 1e-12);
  CHECK(t.iteration == 1);
}

TEST_CASE("determinant ratio of a cut") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  const std::size_t k = 6;
  Matrix B(k, k);
  for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = g(rng);
  EllipsoidState s{Vector::Zero(k), B * B.transpose() + Matrix::Identity(k, k), 0};
  Vector v(k);
  for (auto& x : v) x = g(rng);
  EllipsoidState t = ellipsoid_update(s, v);
  double kk = static_cast<double>(k);
  double ratio = std::pow(kk * kk / (kk * kk - 1), kk) * (1 - 2 / (kk + 1));
  CHECK(t.shape.determinant() / s.shape.determinant() == doctest::Approx(ratio).epsilon(1e-9));
  CHECK(ratio <= std::exp(-1 / (kk + 1)));
}

TEST_CASE("always accepting oracle returns the start") {
  Vector x0(3);
  x0 << 1, 2, 3;
  EllipsoidResult r = run_ellipsoid(x0, 1.0, [](const Vector&) { return std::optional<Vector>{}; }, 10);
  CHECK(r.point == x0);
  CHECK(r.iterations == 0);
}

TEST_CASE("finds a point of a cap") {
  auto oracle = [](const Vector& y) -> std::optional<Vector> {
    if (y.norm() > 1.0) return Vector(-y);
    if (y[0] < 0.9) return Vector(Vector::Unit(2, 0));
    return std::nullopt;
  };
  const std::size_t bound = ellipsoid_iteration_bound(2, 1.0, 0.05);
  EllipsoidResult r = run_ellipsoid(Vector::Zero(2), 1.0, oracle, bound);
  CHECK(r.point[0] >= 0.9);
  CHECK(r.point.norm() <= 1.0);
  CHECK(r.iterations <= bound);
}

TEST_CASE("zero budget with a rejecting oracle") {
  auto reject = [](const Vector&) { return std::optional<Vector>(Vector::Unit(2, 0)); };
  CHECK_THROWS_AS(run_ellipsoid(Vector::Zero(2), 1.0, reject, 0), EllipsoidCapExceeded);
}

TEST_CASE("shape stays positive definite over many cuts") {
  const std::size_t k = 16;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  EllipsoidState s = ellipsoid_start(Vector::Zero(k), 1.0);
  double log_det = 0.0;
  const double kk = static_cast<double>(k);
  const double step = kk * std::log(kk * kk / (kk * kk - 1)) + std::log(1 - 2 / (kk + 1));
  for (int i = 0; i < 2000; ++i) {
    Vector v(k);
    for (auto& x : v) x = g(rng);
    s = ellipsoid_update(s, v);
    log_det += step;
    s.shape /= std::exp(step / kk);  // keep the scale bounded
  }
  Eigen::LLT<Matrix> llt(s.shape);
  CHECK(llt.info() == Eigen::Success);
  CHECK((s.shape - s.shape.transpose()).norm() == 0.0);
  CHECK(log_det <= -2000.0 / (2 * (kk + 1)));
}
