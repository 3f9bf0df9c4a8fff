#include "temb/datasets.hpp"
#include "temb/partition_tree.hpp"
#include "temb/random.hpp"

#include <doctest.h>

using namespace temb;

namespace {

PointSet line(std::initializer_list<double> xs) {
  Matrix M(1, static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) M(0, i++) = x;
  return PointSet(M);
}

Ids iota(std::size_t n) {
  Ids ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::uint32_t>(i);
  return ids;
}

}  // namespace

TEST_CASE("approximate median radius brackets the exact one") {
  PointSet X = line({0, 1, 2, 10});
  double r = comp_rmed(X, iota(4), 0.1, 3);
  CHECK(r >= 1.0);
  CHECK(r <= 8.0);

  PointSet Y = gaussian_mixture(200, 5, 3, 5.0, 8);
  double exact = r_med_exact(Y);
  for (std::uint64_t s = 0; s < 10; ++s) {
    double apx = comp_rmed(Y, iota(200), 0.1, s);
    CHECK(apx >= exact * (1 - 1e-12));
    CHECK(apx <= 200 * exact);
  }
}

TEST_CASE("single point tree is a leaf") {
  PartitionTree T = construct_partition_tree(line({4}), 0.1, 1);
  REQUIRE(T.nodes.size() == 1);
  CHECK(T.root().leaf());
}

TEST_CASE("two point tree") {
  PointSet X = line({0, 5});
  PartitionTree T = construct_partition_tree(X, 0.1, 2);
  const TreeNode& root = T.root();
  CHECK(root.r_apx >= 5.0);
  CHECK(root.r_apx <= 10.0);
  REQUIRE(root.c_low.blocks.size() == 2);
  REQUIRE(root.low_children.size() == 2);
  for (auto c : root.low_children) CHECK(T.nodes[c].points.size() == 1);
  REQUIRE(root.rep_child != kNoNode);
  CHECK(T.nodes[root.rep_child].points.size() == 1);
  CHECK(check_tree(X, T).empty());
}

TEST_CASE("partition separates far clusters") {
  Matrix M(2, 40);
  Rng rng(3);
  std::normal_distribution<double> g(0.0, 0.1);
  for (Eigen::Index i = 0; i < 40; ++i) {
    M(0, i) = g(rng) + (i < 20 ? 0.0 : 2e7);
    M(1, i) = g(rng);
  }
  PointSet X(M);
  PartitionRun run = construct_partition(X, iota(40), 1.0, 0.1, 5);
  CHECK(run.partition.blocks.size() == 2);
  CHECK(run.longest_edge <= run.edge_limit);
}

TEST_CASE("close pair is usually merged") {
  Matrix M(3, 2);
  M.col(0) << 0, 0, 0;
  M.col(1) << 0.3, 0.4, 0;
  PointSet X(M);
  int together = 0;
  for (std::uint64_t s = 0; s < 100; ++s) together += construct_partition(X, iota(2), 1.0, 0.1, s).partition.blocks.size() == 1;
  CHECK(together >= 90);
}

TEST_CASE("partition is sandwiched between component scales") {
  PointSet X = gaussian_mixture(128, 4, 6, 6.0, 11);
  const double r = 1.5;
  PartitionRun run = construct_partition(X, iota(128), r, 0.1, 12);
  CHECK(refines(run.partition, connected_components(X, r)));
  CHECK(refines(connected_components(X, 1000.0 * 128 * 128 * r), run.partition));
}

TEST_CASE("trees pass the exact checker") {
  for (std::uint64_t s = 0; s < 4; ++s) {
    PointSet X = gaussian_mixture(150, 3, 5, 4.0, 100 + s);
    PartitionTree T = construct_partition_tree(X, 0.1, s);
    CHECK(check_tree(X, T).empty());
    CHECK(T.n == 150);
  }
}
