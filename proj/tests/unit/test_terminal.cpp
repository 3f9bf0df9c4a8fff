#include "temb/datasets.hpp"
#include "temb/terminal.hpp"

#include <doctest.h>

using namespace temb;

namespace {

Ids iota(std::size_t n) {
  Ids ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::uint32_t>(i);
  return ids;
}

TerminalConfig small_config() {
  TerminalConfig c;
  c.eps = 0.3;
  return c;
}

}  // namespace

TEST_CASE("identity map has no distortion") {
  PointSet X = uniform_cube(20, 4, 1);
  Vector q = Vector::Constant(4, 2.0);
  Vector z(5);
  z << q, 0.0;
  Distortion D = verify_embedding(X, Matrix::Identity(4, 4), q, z);
  CHECK(D.max_over == doctest::Approx(0.0));
  CHECK(D.max_under == doctest::Approx(0.0));
}

TEST_CASE("single point set embeds exactly") {
  PointSet X(Matrix::Constant(3, 1, 1.0));
  TerminalIndex index = TerminalIndex::build(X, small_config(), 2);
  Rng rng(3);
  Vector q(3);
  q << 4, -1, 0.5;
  EmbeddingResult r = index.embed(q, rng);
  const Matrix& P = index.sketch().matrix;
  CHECK((r.z.head(P.rows()) - P * X.col(0)).norm() < 1e-9);
  CHECK(r.z[P.rows()] == doctest::Approx((q - X.col(0)).norm()));
  CHECK(r.anchor == 0);
}

TEST_CASE("terminal points map to their sketch image") {
  PointSet X = gaussian_mixture(64, 6, 4, 4.0, 4);
  TerminalIndex index = TerminalIndex::build(X, small_config(), 5);
  const Matrix& P = index.sketch().matrix;
  Rng rng(6);
  for (std::size_t i : {0, 17, 63}) {
    EmbeddingResult r = index.embed(X.col(i), rng);
    CHECK(r.anchor_distance == 0.0);
    CHECK((r.z.head(P.rows()) - P * X.col(i)).norm() < 1e-9 * (1 + (P * X.col(i)).norm()));
    CHECK(r.z[P.rows()] == 0.0);
  }
}

TEST_CASE("far query stays accurate") {
  PointSet X = gaussian_mixture(64, 6, 4, 4.0, 7);
  double diam = 0.0;
  for (std::size_t i = 0; i < X.n(); ++i)
    for (std::size_t j = 0; j < i; ++j) diam = std::max(diam, (X.col(i) - X.col(j)).norm());
  TerminalConfig config = small_config();
  TerminalIndex index = TerminalIndex::build(X, config, 8);
  Rng rng(9);
  Vector q = X.col(0) + 1e6 * diam * Vector::Unit(6, 2);
  EmbeddingResult r = index.embed(q, rng);
  Distortion D = verify_embedding(X, index.sketch().matrix, q, r.z);
  CHECK(D.max_over <= config.eps_acc);
  CHECK(D.max_under <= config.eps_acc);
}

TEST_CASE("embeddings meet the tolerance on a mixture") {
  PointSet all = gaussian_mixture(160, 8, 5, 4.0, 10);
  PointSet X(all.matrix().leftCols(128));
  TerminalConfig config = small_config();
  TerminalIndex index = TerminalIndex::build(X, config, 11);
  for (std::size_t i = 128; i < 160; ++i) {
    Rng rng(i);
    Vector q = all.col(i);
    EmbeddingResult r = index.embed(q, rng);
    Distortion D = verify_embedding(X, index.sketch().matrix, q, r.z);
    CHECK(D.max_over <= config.eps_acc);
    CHECK(D.max_under <= config.eps_acc);
    CHECK(r.z.size() == static_cast<Eigen::Index>(index.sketch().k() + 1));
  }
}

TEST_CASE("deterministic queries ignore the caller's generator") {
  PointSet all = gaussian_mixture(80, 4, 3, 4.0, 12);
  PointSet X(all.matrix().leftCols(64));
  TerminalConfig config = small_config();
  config.deterministic_queries = true;
  TerminalIndex index = TerminalIndex::build(X, config, 13);
  Rng a(1), b(2);
  Vector q = all.col(70);
  CHECK(index.embed(q, a).z == index.embed(q, b).z);
}

TEST_CASE("distance violator") {
  PointSet X = uniform_cube(5, 2, 14);
  Matrix P = Matrix::Identity(2, 2);
  Vector q = Vector::Constant(2, 3.0);
  const double gap = (q - X.col(2)).norm();
  Vector v = X.col(2) + 2 * gap * Vector::Unit(2, 0);
  Violator w{Violator::Kind::distance, 2, 0};
  CHECK(violator_holds(w, X, P, q, v, 0.01));
  Vector n = violator_to_hyperplane(w, X, P, q, v, 0.01);
  CHECK((P * q - v).dot(n) >= 0.0);
  CHECK_FALSE(violator_holds(w, X, P, q, P * q, 0.01));
}

TEST_CASE("degenerate pair violator") {
  PointSet X = uniform_cube(5, 2, 15);
  Matrix P = Matrix::Identity(2, 2);
  Vector q = Vector::Constant(2, 3.0);
  Violator w{Violator::Kind::pair, 1, 1};
  CHECK_THROWS_AS(violator_to_hyperplane(w, X, P, q, Vector::Zero(2), 0.01), std::domain_error);
}

TEST_CASE("scan witnesses separate the exact image") {
  PointSet X = gaussian_mixture(30, 3, 3, 3.0, 16);
  Matrix P = Matrix::Identity(3, 3);
  Matrix PX = P * X.matrix();
  ReqSystem req{&X, &P, &PX, 0.02};
  Rng rng(17);
  std::normal_distribution<double> g;
  int found = 0;
  for (int t = 0; t < 200; ++t) {
    Vector q(3), v(3);
    for (auto& x : q) x = 3 * g(rng);
    for (auto& x : v) x = 3 * g(rng);
    CHECK_FALSE(req.scan(q, P * q).has_value());
    if (auto w = req.scan(q, v)) {
      ++found;
      CHECK(req.holds(*w, q, v));
      Vector n = req.hyperplane(*w, q, v);
      CHECK((P * q - v).dot(n) >= 0.0);
    }
  }
  CHECK(found > 0);
}

TEST_CASE("direct feasible point passes the scan") {
  PointSet X = uniform_cube(40, 3, 18);
  Sketch S = sample_sketch(3, 300, 19);
  Vector q = Vector::Constant(3, 0.4);
  const double eps = 0.05;
  FeasiblePoint f = direct_feasible_point(X, S, q, eps);
  Matrix PX = S.matrix * X.matrix();
  ReqSystem req{&X, &S.matrix, &PX, eps};
  CHECK_FALSE(req.scan(q, f.v).has_value());
  CHECK(f.iterations <= f.bound);
}

TEST_CASE("fixed scale anchors cover their assignments") {
  PointSet X = gaussian_mixture(200, 4, 6, 5.0, 20);
  const Ids Z = iota(200);
  const double r = 1.0;
  FixedScaleParams params;
  FixedScaleIndex D = fixed_scale_instantiate(X, Z, r, params, 21);
  REQUIRE(D.anchor_of.size() == Z.size());
  for (std::size_t j = 0; j < Z.size(); ++j) {
    bool near_any = false;
    for (auto a : D.anchors) near_any |= (X.col(Z[j]) - X.col(a)).norm() <= 2 * r;
    if (D.anchor_of[j] == FixedScaleIndex::kNoAnchor) {
      CHECK_FALSE(near_any);
    } else {
      CHECK((X.col(Z[j]) - X.col(D.anchors[D.anchor_of[j]])).norm() <= 2 * r);
    }
  }
  for (const auto& rep : D.sets)
    for (const auto& F : rep) {
      CHECK_FALSE(F.anchors.empty());
      for (auto x : F.unassigned)
        for (auto w : F.anchors) CHECK((X.col(x) - X.col(w)).norm() > 4 * r);
    }
}

TEST_CASE("builds are reproducible") {
  PointSet all = gaussian_mixture(90, 5, 3, 4.0, 22);
  PointSet X(all.matrix().leftCols(80));
  TerminalIndex a = TerminalIndex::build(X, small_config(), 23);
  TerminalIndex b = TerminalIndex::build(X, small_config(), 23);
  CHECK(a.sketch().matrix == b.sketch().matrix);
  Rng ra(5), rb(5);
  CHECK(a.embed(all.col(85), ra).z == b.embed(all.col(85), rb).z);
}

TEST_CASE("duplicates are tolerated") {
  Matrix M = Matrix::Random(3, 20);
  M.col(5) = M.col(2);
  M.col(9) = M.col(2);
  PointSet X(M);
  TerminalIndex index = TerminalIndex::build(X, small_config(), 24);
  CHECK(index.geometry().X.n() == 18);
  Rng rng(25);
  Vector q = Vector::Constant(3, 0.1);
  EmbeddingResult r = index.embed(q, rng);
  Distortion D = verify_embedding(X, index.sketch().matrix, q, r.z);
  CHECK(D.max_over <= 0.5);
  CHECK(D.max_under <= 0.5);
}
