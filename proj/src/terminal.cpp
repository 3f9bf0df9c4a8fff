#include "temb/terminal.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <string>

namespace temb {

namespace {

Vector lift_output(const RangeFactor& F, const Vector& reduced, double last) {
  Vector z(F.basis.rows() + 1);
  z.head(F.basis.rows()) = F.basis * reduced;
  z[F.basis.rows()] = last;
  return z;
}

// Distance from every column to its nearest other column.
std::vector<double> nearest_other(const Matrix& M) {
  const auto n = M.cols();
  std::vector<double> out(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  const Vector sq = M.colwise().squaredNorm().transpose();
  constexpr Eigen::Index kBlock = 512;
  for (Eigen::Index b = 0; b < n; b += kBlock) {
    const Eigen::Index w = std::min(kBlock, n - b);
    const Matrix G = M.transpose() * M.middleCols(b, w);
    for (Eigen::Index j = 0; j < w; ++j) {
      double best = std::numeric_limits<double>::infinity();
      Eigen::Index arg = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (i == b + j) continue;
        double d2 = sq[i] + sq[b + j] - 2.0 * G(i, j);
        if (d2 < best) {
          best = d2;
          arg = i;
        }
      }
      if (arg >= 0) out[static_cast<std::size_t>(b + j)] = (M.col(arg) - M.col(b + j)).norm();
    }
  }
  return out;
}

std::size_t ceil_log2(std::size_t m) {
  std::size_t b = 0;
  while ((std::size_t{1} << b) < m) ++b;
  return b;
}

}  // namespace

struct TerminalIndex::State {
  TerminalConfig config;
  std::uint64_t seed = 0;
  PointSet input;
  Dedup dedup;
  Sketch sketch;
  RangeFactor range;
  TerminalGeometry geo;
  AannIndex aann;
  std::optional<MedianEnsemble> ensemble;
  std::vector<double> nn_distance;
  Matrix centroids;  // per tree node
  std::vector<double> radii;

  std::mutex lazy_mutex;
  std::map<std::size_t, std::unique_ptr<LiftFrame>> frames;
  std::map<std::size_t, std::unique_ptr<MultiScaleIndex>> ladders;

  void prepare();
  std::unique_ptr<LiftFrame> make_frame(std::size_t id) const;
  const MultiScaleIndex& ladder(std::size_t frame);
};

std::unique_ptr<LiftFrame> TerminalIndex::State::make_frame(std::size_t id) const {
  auto f = std::make_unique<LiftFrame>();
  f->id = id;
  if (id == 0) {
    f->coords = geo.X.matrix();
  } else {
    f->map = &ensemble->sketches.at(id - 1).matrix;
    f->coords = ensemble->projections.at(id - 1);
  }
  if (config.lifted == LiftedBackend::simhash) {
    f->tables = std::max<std::size_t>(1, config.lifted_tables);
    f->bits = config.lifted_bits ? config.lifted_bits
                                 : std::max<std::size_t>(1, (ceil_log2(geo.X.n()) + 1) / 2);
    f->bits = std::min<std::size_t>(f->bits, 63);
    const auto rows = static_cast<Eigen::Index>(f->tables * f->bits);
    Rng rng(derive_seed(seed, {0x5111, id}));
    std::normal_distribution<double> gauss;
    f->h_first = Matrix::NullaryExpr(rows, f->coords.rows(), [&] { return gauss(rng); });
    f->h_second = Matrix::NullaryExpr(rows, geo.P.rows(), [&] { return gauss(rng); });
    f->g_first = f->h_first * f->coords;
    f->g_second = f->h_second * geo.PX;
  }
  return f;
}

const MultiScaleIndex& TerminalIndex::State::ladder(std::size_t frame) {
  std::lock_guard lock(lazy_mutex);
  if (auto it = ladders.find(frame); it != ladders.end()) return *it->second;
  auto& f = frames[frame];
  if (!f) f = make_frame(frame);
  auto& m = ladders[frame];
  m = std::make_unique<MultiScaleIndex>(geo, aann.tree, *f, config, derive_seed(seed, {0x7e77}));
  return *m;
}

void TerminalIndex::State::prepare() {
  dedup = deduplicate(input);
  geo.X = dedup.unique;
  range = range_factor(sketch);
  geo.P = range.factor;
  geo.PX = geo.P * geo.X.matrix();
  geo.eps_dagger = config.eps_dagger();
  if (config.scale_window) nn_distance = nearest_other(geo.X.matrix());
  const auto& nodes = aann.tree.nodes;
  centroids.resize(geo.X.matrix().rows(), static_cast<Eigen::Index>(nodes.size()));
  radii.assign(nodes.size(), 0.0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto c = centroids.col(static_cast<Eigen::Index>(i));
    c.setZero();
    for (auto p : nodes[i].points) c += geo.X.col(p);
    c /= static_cast<double>(nodes[i].points.size());
    for (auto p : nodes[i].points) radii[i] = std::max(radii[i], (geo.X.col(p) - c).norm());
  }
}

TerminalIndex::TerminalIndex(std::unique_ptr<State> state) : state_(std::move(state)) {}
TerminalIndex::TerminalIndex(TerminalIndex&&) noexcept = default;
TerminalIndex& TerminalIndex::operator=(TerminalIndex&&) noexcept = default;
TerminalIndex::~TerminalIndex() = default;

TerminalIndex TerminalIndex::build(const PointSet& X, const TerminalConfig& config, std::uint64_t seed) {
  if (!(config.eps > 0.0 && config.eps < 1.0)) throw std::invalid_argument("eps must lie in (0, 1)");
  Dedup dedup = deduplicate(X);
  const std::size_t n = dedup.unique.n();
  const std::size_t k = config.k ? config.k : default_sketch_rows(std::max<std::size_t>(n, 2), config.eps, config.c_k);
  Sketch sketch = sample_sketch(X.d(), k, derive_seed(seed, {0x5c}));
  PartitionTree tree = construct_partition_tree(dedup.unique, config.delta, derive_seed(seed, {0x72}), config.tree);
  AannIndex aann = build_aann(dedup.unique, std::move(tree), config.delta, config.aann, derive_seed(seed, {0xa4}));
  std::optional<MedianEnsemble> ensemble;
  if (config.median_jl) {
    std::size_t m = config.mjl_sketches ? config.mjl_sketches : default_ensemble_size(n, X.d());
    std::size_t rows = config.mjl_rows ? config.mjl_rows : default_ensemble_rows(n);
    ensemble = build_ensemble(dedup.unique, m, rows, config.eps, derive_seed(seed, {0x3e}));
  }
  return assemble(X, config, seed, std::move(sketch), std::move(aann), std::move(ensemble));
}

TerminalIndex TerminalIndex::assemble(const PointSet& X, const TerminalConfig& config, std::uint64_t seed,
                                      Sketch sketch, AannIndex aann, std::optional<MedianEnsemble> ensemble) {
  auto s = std::make_unique<State>();
  s->config = config;
  s->seed = seed;
  s->input = X;
  s->sketch = std::move(sketch);
  s->aann = std::move(aann);
  s->ensemble = std::move(ensemble);
  s->prepare();
  return TerminalIndex(std::move(s));
}

const TerminalConfig& TerminalIndex::config() const { return state_->config; }
std::uint64_t TerminalIndex::seed() const { return state_->seed; }
const PointSet& TerminalIndex::input() const { return state_->input; }
const Dedup& TerminalIndex::dedup() const { return state_->dedup; }
const Sketch& TerminalIndex::sketch() const { return state_->sketch; }
const RangeFactor& TerminalIndex::range() const { return state_->range; }
const TerminalGeometry& TerminalIndex::geometry() const { return state_->geo; }
const AannIndex& TerminalIndex::aann() const { return state_->aann; }
const std::optional<MedianEnsemble>& TerminalIndex::ensemble() const { return state_->ensemble; }

std::size_t TerminalIndex::built_scales() const {
  std::lock_guard lock(state_->lazy_mutex);
  std::size_t total = 0;
  for (auto& [id, m] : state_->ladders) total += m->built_scales();
  return total;
}

EmbeddingResult TerminalIndex::embed(const Vector& q, Rng& external, bool trace) const {
  State& s = *state_;
  const TerminalConfig& config = s.config;
  const TerminalGeometry& geo = s.geo;
  if (static_cast<std::size_t>(q.size()) != geo.X.d()) throw std::invalid_argument("query dimension mismatch");
  if (!q.allFinite()) throw std::invalid_argument("query has non-finite coordinates");

  Rng local;
  if (config.deterministic_queries) {
    std::uint64_t h = s.seed;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, &q[i], sizeof bits);
      h = splitmix64(h ^ bits);
    }
    local.seed(h);
  }
  Rng& rng = config.deterministic_queries ? local : external;

  EmbeddingResult out;
  AannAnswer ans = query_aann(s.aann, geo.X, q, rng);
  out.probes = ans.probes;
  const std::size_t x_hat = ans.index;
  const double r_hat = (q - geo.X.col(x_hat)).norm();
  const Vector base = geo.PX.col(static_cast<Eigen::Index>(x_hat));
  out.node = ans.node;
  out.anchor = s.dedup.first[x_hat];
  out.anchor_distance = r_hat;
  const TreeNode& node = s.aann.tree.nodes[ans.node];
  if (node.leaf() || r_hat == 0.0) {
    out.z = lift_output(s.range, base, r_hat);
    return out;
  }

  std::vector<std::size_t> frames{0};
  if (config.median_jl && s.ensemble) {
    frames.clear();
    for (auto j : sample_sketch_indices(*s.ensemble, std::max<std::size_t>(1, config.mjl_samples), rng))
      frames.push_back(j + 1);
  }
  std::vector<const MultiScaleIndex*> ladders;
  for (auto f : frames) ladders.push_back(&s.ladder(f));
  std::vector<const LiftFrame*> lift;
  {
    std::lock_guard lock(s.lazy_mutex);
    for (auto f : frames) lift.push_back(s.frames.at(f).get());
  }

  const MultiScaleIndex& first = *ladders.front();
  std::size_t lo = 0, hi = first.ladder();
  if (config.scale_window) {
    const double r_low = first.r_low(ans.node);
    const double step = std::log1p(config.gamma_term);
    const double near = s.nn_distance[x_hat];
    const double far = (geo.X.col(x_hat) - s.centroids.col(static_cast<Eigen::Index>(ans.node))).norm() + s.radii[ans.node];
    auto index_of = [&](double r, double shift) {
      double i = (r > 0.0 ? std::log(r / r_low) / step : 0.0) + shift;
      return static_cast<std::size_t>(std::clamp(i, 0.0, static_cast<double>(first.ladder())));
    };
    lo = index_of(near, -1.0);
    hi = index_of(far, 2.0);
  }

  std::optional<std::size_t> exact;
  ReqSystem req{&geo.X, &geo.P, &geo.PX, geo.eps_dagger};
  SeparationOracle oracle = [&](const Vector& v) -> std::optional<Vector> {
    for (std::size_t f = 0; f < ladders.size(); ++f) {
      OracleCall call(geo, *lift[f], config, q, v);
      auto w = ladders[f]->query(call, ans.node, x_hat, lo, hi);
      out.probes += call.probes;
      if (out.probes > config.probe_cap) throw CapExceeded("probe cap exceeded at node " + std::to_string(ans.node));
      if (!w) continue;
      if (w->kind == Violator::Kind::distance && (q - geo.X.col(w->x)).norm() == 0.0) {
        exact = w->x;
        return std::nullopt;
      }
      Vector normal = req.hyperplane(*w, q, v);
      if (trace) out.steps.push_back({v, *w, normal});
      return normal;
    }
    return std::nullopt;
  };

  const std::size_t cap = ellipsoid_iteration_bound(static_cast<std::size_t>(geo.P.rows()), 2.0 * r_hat,
                                                    geo.eps_dagger * r_hat);
  EllipsoidResult res;
  try {
    res = run_ellipsoid(base, 2.0 * r_hat, oracle, cap);
  } catch (const EllipsoidCapExceeded&) {
    throw CapExceeded("ellipsoid iteration cap exceeded at node " + std::to_string(ans.node));
  }
  out.iterations = res.iterations;
  if (exact) {
    out.anchor = s.dedup.first[*exact];
    out.anchor_distance = 0.0;
    out.z = lift_output(s.range, geo.PX.col(static_cast<Eigen::Index>(*exact)), 0.0);
    return out;
  }
  const double slack = r_hat * r_hat - (res.point - base).squaredNorm();
  out.z = lift_output(s.range, res.point, std::sqrt(std::max(0.0, slack)));
  return out;
}

EmbeddingResult compute_terminal_embedding(const TerminalIndex& index, const Vector& q, Rng& rng) {
  return index.embed(q, rng);
}

FeasiblePoint direct_feasible_point(const PointSet& X, const RangeFactor& F, const Vector& q,
                                    double eps_dagger) {
  const Matrix PX = F.factor * X.matrix();
  ReqSystem req{&X, &F.factor, &PX, eps_dagger};
  const Nearest nn = brute_nearest(X, q);
  const Vector x0 = PX.col(static_cast<Eigen::Index>(nn.index));
  FeasiblePoint out;
  if (nn.distance == 0.0) {
    out.reduced = x0;
  } else {
    out.bound = ellipsoid_iteration_bound(static_cast<std::size_t>(F.factor.rows()), 2.0 * nn.distance,
                                          eps_dagger * nn.distance);
    SeparationOracle oracle = [&](const Vector& v) -> std::optional<Vector> {
      if (auto w = req.scan(q, v)) return req.hyperplane(*w, q, v);
      return std::nullopt;
    };
    EllipsoidResult res = run_ellipsoid(x0, 2.0 * nn.distance, oracle, out.bound);
    out.reduced = res.point;
    out.iterations = res.iterations;
  }
  out.v = F.basis * out.reduced;
  return out;
}

FeasiblePoint direct_feasible_point(const PointSet& X, const Sketch& S, const Vector& q, double eps_dagger) {
  return direct_feasible_point(X, range_factor(S), q, eps_dagger);
}

Distortion verify_embedding(const PointSet& X, const Matrix& P, const Vector& q, const Vector& z) {
  const auto k = P.rows();
  if (z.size() != k + 1) throw std::invalid_argument("embedding has the wrong length");
  const Matrix PX = P * X.matrix();
  const double last = z[k] * z[k];
  Distortion out{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  bool any = false;
  for (std::size_t i = 0; i < X.n(); ++i) {
    double dq = (q - X.col(i)).norm();
    if (dq == 0.0) continue;
    double dz = std::sqrt((z.head(k) - PX.col(static_cast<Eigen::Index>(i))).squaredNorm() + last);
    out.max_over = std::max(out.max_over, dz / dq - 1.0);
    out.max_under = std::max(out.max_under, 1.0 - dz / dq);
    any = true;
  }
  if (!any) return {};
  return out;
}

}  // namespace temb
