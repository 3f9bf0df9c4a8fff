#include "temb/ann.hpp"
#include "temb/datasets.hpp"

#include <doctest.h>

using namespace temb;

namespace {

Ids iota(std::size_t n) {
  Ids ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::uint32_t>(i);
  return ids;
}

bool in_hashed_sets(const ApStructure& ap, const Vector& x, std::uint32_t y) {
  for (auto s : ap.hash(x))
    for (auto id : ap.set(s))
      if (id == y) return true;
  return false;
}

}  // namespace

TEST_CASE("lsh tradeoff") {
  CHECK(lsh_tradeoff(2.0, 0.0) == doctest::Approx(7.0 / 16));
  CHECK(lsh_tradeoff(2.0, 7.0 / 9) == doctest::Approx(0.0));
  CHECK_THROWS_AS(lsh_tradeoff(2.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(lsh_tradeoff(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("grid snapping") {
  Vector q(1);
  q << 0.37;
  CHECK(snap_to_grid(q, 0.1)[0] == doctest::Approx(0.3));
  Vector g(2);
  g << 0.5, -1.25;
  CHECK(snap_to_grid(g, 0.25) == g);
  CHECK_THROWS(snap_to_grid(q, 0.0));
  Rng rng(1);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int t = 0; t < 100; ++t) {
    Vector r(7);
    for (auto& x : r) x = u(rng);
    CHECK((snap_to_grid(r, 0.3) - r).norm() <= std::sqrt(7.0) * 0.3);
  }
}

TEST_CASE("trivial partition has full recall") {
  PointSet X = uniform_cube(50, 3, 2);
  ApStructure ap = ApStructure::build(X, iota(50), 0.2, ApParams{}, 3);
  CHECK(ap.set_count() == 1);
  for (std::uint32_t i = 0; i < 50; ++i) CHECK(in_hashed_sets(ap, X.col(i), (i + 7) % 50));
}

TEST_CASE("slab partition keeps far clusters apart") {
  const std::size_t half = 64;
  int good = 0;
  for (std::uint64_t run = 0; run < 100; ++run) {
    Matrix M = Matrix::Random(4, 2 * half) * 0.5;
    M.rightCols(half).array() += 100.0;
    PointSet X(M);
    ApParams params{ApBackend::hyperplane_lsh, 16, 0, 8.0, kNoCap, kNoCap};
    ApStructure ap = ApStructure::build(X, iota(2 * half), 1.0, params, run);
    std::size_t far = 0;
    for (auto s : ap.hash(X.col(0)))
      for (auto id : ap.set(s)) far += id >= half;
    good += far <= half;
  }
  CHECK(good >= 99);
}

TEST_CASE("slab partition recall on planted pairs") {
  int found = 0;
  for (std::uint64_t run = 0; run < 100; ++run) {
    PointSet base = uniform_cube(128, 8, run);
    Matrix M = base.matrix() * 20.0;
    Vector dir = Vector::Random(8).normalized();
    M.col(1) = M.col(0) + 0.9 * dir;
    PointSet X(M);
    ApParams params{ApBackend::hyperplane_lsh, 16, 0, 8.0, kNoCap, kNoCap};
    ApStructure ap = ApStructure::build(X, iota(128), 1.0, params, 1000 + run);
    found += in_hashed_sets(ap, X.col(0), 1);
  }
  CHECK(found >= 95);
}

TEST_CASE("ann answers are certified") {
  PointSet X = uniform_cube(100, 3, 4);
  AnnStructure ann = AnnStructure::build(X, iota(100), 0.05, 1.5, AnnBackend::brute, {}, 5);
  Rng rng(6);
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  for (int t = 0; t < 100; ++t) {
    Vector q(3);
    for (auto& x : q) x = u(rng);
    std::size_t probes = 0;
    auto hit = ann.query(X, q, probes);
    double best = brute_nearest(X, q).distance;
    if (hit) CHECK(hit->distance <= 1.5 * 0.05);
    if (best <= 0.05) CHECK(hit.has_value());
    if (best > 1.5 * 0.05) CHECK_FALSE(hit.has_value());
  }
}

TEST_CASE("single leaf tree needs no ladder") {
  PointSet X(Matrix::Ones(2, 1));
  AannIndex D = build_aann(X, construct_partition_tree(X, 0.1, 1), 0.1, {}, 2);
  CHECK(D.nodes.front().ladder == 0);
  CHECK(D.stored == 0);
  Rng rng(3);
  AannAnswer a = query_aann(D, X, Vector::Zero(2), rng);
  CHECK(a.index == 0);
  CHECK(a.node == 0);
  CHECK(a.scale == kLeafHit);
}

TEST_CASE("ladder radii are geometric") {
  PointSet X = gaussian_mixture(60, 3, 3, 5.0, 7);
  AannParams params;
  AannIndex D = build_aann(X, construct_partition_tree(X, 0.1, 8), 0.1, params, 9);
  for (const auto& node : D.nodes)
    for (std::size_t i = 0; i < node.ladder; ++i)
      CHECK(node.scale_radius(i + 1, params.gamma) / node.scale_radius(i, params.gamma) ==
            doctest::Approx(1 + params.gamma).epsilon(1e-12));
}

TEST_CASE("brute aann is near exact") {
  PointSet all = gaussian_mixture(600, 6, 8, 4.0, 10);
  PointSet X(all.matrix().leftCols(400));
  AannIndex D = build_aann(X, construct_partition_tree(X, 0.1, 11), 0.1, {}, 12);
  Rng rng(13);
  int good = 0;
  for (std::size_t i = 400; i < 600; ++i) {
    Vector q = all.col(i);
    AannAnswer a = query_aann(D, X, q, rng);
    CHECK(a.distance == doctest::Approx((X.col(a.index) - q).norm()));
    CHECK(std::binary_search(D.tree.nodes[a.node].points.begin(), D.tree.nodes[a.node].points.end(),
                             static_cast<std::uint32_t>(a.index)));
    good += a.distance <= 1.1 * brute_nearest(X, q).distance;
  }
  CHECK(good >= 198);
}

TEST_CASE("aann returns stored points exactly") {
  PointSet X = uniform_cube(80, 2, 14);
  AannIndex D = build_aann(X, construct_partition_tree(X, 0.1, 15), 0.1, {}, 16);
  Rng rng(17);
  for (std::size_t i = 0; i < 80; ++i) CHECK(query_aann(D, X, X.col(i), rng).distance == 0.0);
}

TEST_CASE("space cap is enforced") {
  PointSet X = uniform_cube(200, 3, 18);
  AannParams params;
  params.backend = AnnBackend::lsh;
  params.space_cap = 10;
  CHECK_THROWS_AS(build_aann(X, construct_partition_tree(X, 0.1, 19), 0.1, params, 20), CapExceeded);
}
