#include "temb/geometry.hpp"

#include <doctest.h>

using namespace temb;

namespace {

PointSet line(std::initializer_list<double> xs) {
  Matrix M(1, static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) M(0, i++) = x;
  return PointSet(M);
}

}  // namespace

TEST_CASE("connected components on a line") {
  PointSet X = line({0, 1, 3});
  Partition P = connected_components(X, 1.0);
  CHECK(P.blocks == std::vector<Ids>{{0, 1}, {2}});
  CHECK(connected_components(X, 0.0).blocks.size() == 3);
  CHECK(connected_components(line({7}), 5.0).blocks.size() == 1);
}

TEST_CASE("components are monotone in the radius") {
  PointSet X = line({0, 0.5, 2, 2.2, 9, 13});
  double radii[] = {0.1, 0.5, 1.5, 4.0, 7.0, 20.0};
  for (std::size_t i = 0; i + 1 < std::size(radii); ++i)
    CHECK(refines(connected_components(X, radii[i + 1]), connected_components(X, radii[i])));
}

TEST_CASE("exact median radius") {
  CHECK(r_med_exact(line({0, 1, 2, 10})) == doctest::Approx(1.0));
  CHECK(r_med_exact(line({0, 5})) == doctest::Approx(5.0));
  CHECK(r_med_exact(line({3, 3, 3})) == 0.0);
  CHECK_THROWS_AS(r_med_exact(line({1})), std::invalid_argument);
}

TEST_CASE("refinement") {
  Partition coarse{{{1, 2}, {3}}};
  Partition fine{{{1}, {2, 3}}};
  CHECK_FALSE(refines(coarse, fine));
  CHECK(refines(Partition{{{1, 2, 3}}}, fine));
  CHECK(refines(fine, Partition{{{1}, {2}, {3}}}));
}

TEST_CASE("lifted vectors") {
  Matrix P(1, 1);
  P << 1.0;
  Vector y(1), z(1);
  y << 3.0;
  z << 0.0;
  Vector u = lifted_direction(y, z, P);
  CHECK(u[0] == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(u[1] == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK_THROWS(lifted_direction(y, y, P));

  Matrix P2 = Matrix::Random(3, 2);
  Vector q(2), y2(2);
  q << 1.0, -2.0;
  y2 << 0.5, 0.25;
  Vector w = lifted_query(q, y2, P2 * y2, P2);
  CHECK(w.norm() == doctest::Approx(1.0));
  CHECK(w.head(2).isApprox((q - y2) / (q - y2).norm()));
  CHECK(w.tail(3).norm() == doctest::Approx(0.0));
}

TEST_CASE("brute nearest") {
  PointSet X = line({0, 10});
  Vector q(1);
  q << 4.0;
  Nearest nn = brute_nearest(X, q);
  CHECK(nn.index == 0);
  CHECK(nn.distance == doctest::Approx(4.0));
  q << 5.0;
  CHECK(brute_nearest(X, q).index == 0);
  CHECK(brute_nearest(X, Ids{1, 0}, q).index == 0);
}

TEST_CASE("deduplicate keeps first occurrences") {
  PointSet X = line({2, 1, 2, 3, 1});
  Dedup D = deduplicate(X);
  CHECK(D.unique.n() == 3);
  CHECK(D.first == std::vector<std::size_t>{0, 1, 3});
  CHECK(D.to_unique == std::vector<std::size_t>{0, 1, 0, 2, 1});
}

TEST_CASE("rejects non-finite points") {
  Matrix M(1, 2);
  M << 1.0, std::nan("");
  CHECK_THROWS_AS(PointSet{M}, std::invalid_argument);
}
