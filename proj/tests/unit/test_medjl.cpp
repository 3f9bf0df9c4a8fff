#include "temb/datasets.hpp"
#include "temb/medjl.hpp"

#include <doctest.h>

#include <set>

using namespace temb;

TEST_CASE("identity ensemble is always good") {
  PointSet X = uniform_cube(20, 3, 1);
  MedianEnsemble E = ensemble_from_sketches(X, {Sketch{Matrix::Identity(3, 3), 0}});
  Vector q = Vector::Constant(3, 0.3);
  CHECK(good_fraction(E, X, q, 1e-12) == 1.0);
  CHECK(worst_defects(E, X, q).maxCoeff() < 1e-12);
}

TEST_CASE("inner product defect") {
  Matrix P = 2.0 * Matrix::Identity(2, 2);
  Vector x(2), y(2), z(2);
  x << 1, 0;
  y << 1, 1;
  z << 0, 0;
  CHECK(ap_ip_defect(P, x, y, z) == doctest::Approx(3 / std::sqrt(2.0)));
  CHECK(ap_ip_defect(P, z, y, z) == 0.0);
}

TEST_CASE("scaled member is flagged bad") {
  PointSet X = uniform_cube(10, 2, 3);
  MedianEnsemble E = ensemble_from_sketches(
      X, {Sketch{Matrix::Identity(2, 2), 0}, Sketch{2.0 * Matrix::Identity(2, 2), 1}});
  Vector q = Vector::Constant(2, 0.5);
  CHECK(good_fraction(E, X, q, 0.1) == doctest::Approx(0.5));
}

TEST_CASE("sketch index sampling") {
  PointSet X = uniform_cube(30, 4, 2);
  MedianEnsemble E = build_ensemble(X, 6, 40, 0.5, 3);
  CHECK(E.m() == 6);
  Rng rng(4);
  auto some = sample_sketch_indices(E, 3, rng);
  CHECK(std::set<std::size_t>(some.begin(), some.end()).size() == 3);
  auto all = sample_sketch_indices(E, 6, rng);
  CHECK(std::set<std::size_t>(all.begin(), all.end()) == std::set<std::size_t>{0, 1, 2, 3, 4, 5});
  CHECK_THROWS(sample_sketch_indices(E, 7, rng));
}
