#include "temb/datasets.hpp"
#include "temb/sketch.hpp"

#include <doctest.h>

using namespace temb;

TEST_CASE("sketch preserves squared norms in expectation") {
  double sum = 0.0;
  const int trials = 200;
  for (int s = 0; s < trials; ++s) {
    Sketch S = sample_sketch(16, 200, static_cast<std::uint64_t>(s));
    sum += S.matrix.col(0).squaredNorm();
  }
  double mean = sum / trials;
  CHECK(mean >= 0.95);
  CHECK(mean <= 1.05);
}

TEST_CASE("scaled identity distortion") {
  Sketch S{2.0 * Matrix::Identity(3, 3), 0};
  PointSet X = uniform_cube(10, 3, 4);
  CHECK(pair_distortion(S, X) == doctest::Approx(1.0));
  CHECK(spectral_distortion(S) == doctest::Approx(1.0));
}

TEST_CASE("default row count") {
  CHECK(default_sketch_rows(256, 0.25) == 710);
}

TEST_CASE("range factor") {
  Sketch S = sample_sketch(5, 40, 9);
  RangeFactor F = range_factor(S);
  CHECK(F.basis.cols() == 5);
  CHECK((F.basis.transpose() * F.basis - Matrix::Identity(5, 5)).norm() < 1e-10);
  CHECK((F.basis * F.factor - S.matrix).norm() < 1e-10 * S.matrix.norm());

  Sketch wide = sample_sketch(50, 3, 2);
  RangeFactor G = range_factor(wide);
  CHECK(G.basis.cols() == 3);
  CHECK((G.basis * G.factor - wide.matrix).norm() < 1e-10 * wide.matrix.norm());
}

TEST_CASE("sketches are deterministic in the seed") {
  CHECK(sample_sketch(7, 11, 42).matrix == sample_sketch(7, 11, 42).matrix);
  CHECK(sample_sketch(7, 11, 42).matrix != sample_sketch(7, 11, 43).matrix);
}

TEST_CASE("hull samples bound the pair distortion from above") {
  PointSet X = gaussian_mixture(40, 8, 4, 3.0, 5);
  Sketch S = sample_sketch(8, 60, 6);
  DistortionReport R = sampled_hull_distortion(S, X, 2000, 7);
  CHECK(R.sample_violations.size() == 2000);
  CHECK(R.samples >= 2000);
  CHECK(R.max_pair_violation == doctest::Approx(pair_distortion(S, X)));
  CHECK(R.max_sampled_hull_violation <= spectral_distortion(S) * (1 + 1e-9) + 1e-12);
  CHECK(R.fraction_above(1e9) == 0.0);
}

TEST_CASE("certified sketch meets its target") {
  PointSet X = uniform_cube(30, 4, 1);
  Sketch S = certified_sketch(X, 400, 0.3, 2);
  CHECK(pair_distortion(S, X) <= 0.3);
}
