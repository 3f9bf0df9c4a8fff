#include "temb/terminal.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>
#include <tuple>

namespace temb {

double ReqSystem::pair_defect(const Vector& q, const Vector& v, std::size_t x, std::size_t y) const {
  const auto xi = static_cast<Eigen::Index>(x), yi = static_cast<Eigen::Index>(y);
  return (v - PX->col(yi)).dot(PX->col(xi) - PX->col(yi)) - (q - X->col(y)).dot(X->col(x) - X->col(y));
}

bool ReqSystem::holds(const Violator& w, const Vector& q, const Vector& v) const {
  if (w.kind == Violator::Kind::distance) {
    double lhs = (v - PX->col(static_cast<Eigen::Index>(w.x))).norm();
    return lhs > 0.0 && lhs >= (1.0 + 10.0 * eps_dagger) * (q - X->col(w.x)).norm();
  }
  if (w.x == w.y) return false;
  double s = std::abs(pair_defect(q, v, w.x, w.y));
  double bound = 20.0 * eps_dagger * (q - X->col(w.y)).norm() * (X->col(w.x) - X->col(w.y)).norm();
  return s > 0.0 && s >= bound;
}

Vector ReqSystem::hyperplane(const Violator& w, const Vector& q, const Vector& v) const {
  Vector normal;
  if (w.kind == Violator::Kind::distance) {
    normal = PX->col(static_cast<Eigen::Index>(w.x)) - v;
  } else {
    double s = pair_defect(q, v, w.x, w.y);
    normal = PX->col(static_cast<Eigen::Index>(w.x)) - PX->col(static_cast<Eigen::Index>(w.y));
    if (s > 0.0) normal = -normal;
    if (s == 0.0) normal.setZero();
  }
  if (normal.squaredNorm() == 0.0) throw std::domain_error("degenerate violator");
  return normal;
}

std::optional<Violator> ReqSystem::scan(const Vector& q, const Vector& v) const {
  const Matrix& M = X->matrix();
  const auto n = M.cols();
  const Vector qdist = (M.colwise() - q).colwise().norm().transpose();
  const Vector vdist = (PX->colwise() - v).colwise().norm().transpose();
  for (Eigen::Index x = 0; x < n; ++x)
    if (vdist[x] > 0.0 && vdist[x] >= (1.0 + 10.0 * eps_dagger) * qdist[x])
      return Violator{Violator::Kind::distance, static_cast<std::size_t>(x), 0};
  for (Eigen::Index y = 0; y < n; ++y) {
    const Matrix D = M.colwise() - M.col(y);
    const Matrix PD = PX->colwise() - PX->col(y);
    const Vector s = PD.transpose() * (v - PX->col(y)) - D.transpose() * (q - M.col(y));
    const Vector len = D.colwise().norm().transpose();
    for (Eigen::Index x = 0; x < n; ++x) {
      if (x == y) continue;
      double a = std::abs(s[x]);
      if (a > 0.0 && a >= 20.0 * eps_dagger * qdist[y] * len[x])
        return Violator{Violator::Kind::pair, static_cast<std::size_t>(x), static_cast<std::size_t>(y)};
    }
  }
  return std::nullopt;
}

bool violator_holds(const Violator& w, const PointSet& X, const Matrix& P, const Vector& q,
                    const Vector& v, double eps_dagger) {
  const Matrix PX = P * X.matrix();
  return ReqSystem{&X, &P, &PX, eps_dagger}.holds(w, q, v);
}

Vector violator_to_hyperplane(const Violator& w, const PointSet& X, const Matrix& P,
                              const Vector& q, const Vector& v, double eps_dagger) {
  const Matrix PX = P * X.matrix();
  return ReqSystem{&X, &P, &PX, eps_dagger}.hyperplane(w, q, v);
}

OracleCall::OracleCall(const TerminalGeometry& g, const LiftFrame& f, const TerminalConfig& c,
                       const Vector& q_, const Vector& v_)
    : geo(&g), frame(&f), config(&c), q(q_), v(v_) {
  fq = f.map ? Vector(*f.map * q) : q;
  if (f.bits) {
    hq = f.h_first * fq;
    hv = f.h_second * v;
  }
}

bool OracleCall::distance_violated(std::size_t x) {
  const std::uint64_t key = x;
  if (auto it = memo.find(key); it != memo.end()) return it->second != 0.0;
  ++probes;
  double lhs = (v - geo->PX.col(static_cast<Eigen::Index>(x))).norm();
  bool hit = lhs > 0.0 && lhs >= (1.0 + 10.0 * geo->eps_dagger) * (q - geo->X.col(x)).norm();
  memo.emplace(key, hit ? 1.0 : 0.0);
  return hit;
}

double OracleCall::lifted_cos(std::size_t x, std::size_t center) {
  if (x == center) return 0.0;
  const std::uint64_t key = (static_cast<std::uint64_t>(center) + 1) << 32 | x;
  if (auto it = memo.find(key); it != memo.end()) return it->second;
  ++probes;
  const auto xi = static_cast<Eigen::Index>(x), ci = static_cast<Eigen::Index>(center);
  const Matrix& F = frame->coords;
  const Matrix& PX = geo->PX;
  double num = (F.col(xi) - F.col(ci)).dot(fq - F.col(ci)) - (PX.col(xi) - PX.col(ci)).dot(v - PX.col(ci));
  double data = (F.col(xi) - F.col(ci)).squaredNorm() + (PX.col(xi) - PX.col(ci)).squaredNorm();
  double query = (fq - F.col(ci)).squaredNorm() + (v - PX.col(ci)).squaredNorm();
  double den = std::sqrt(data * query);
  double cos = den > 0.0 ? num / den : 0.0;
  memo.emplace(key, cos);
  return cos;
}

bool OracleCall::pair_violated(std::size_t x, std::size_t center) {
  if (x == center) return false;
  if (std::abs(lifted_cos(x, center)) < 20.0 * geo->eps_dagger) return false;
  ReqSystem req{&geo->X, &geo->P, &geo->PX, geo->eps_dagger};
  return req.holds({Violator::Kind::pair, x, center}, q, v);
}

namespace {

std::uint64_t sign_key(const Vector& proj, std::size_t table, std::size_t bits) {
  std::uint64_t key = 0;
  for (std::size_t j = 0; j < bits; ++j)
    if (proj[static_cast<Eigen::Index>(table * bits + j)] > 0.0) key |= std::uint64_t{1} << j;
  return key;
}

}  // namespace

std::optional<std::size_t> OracleCall::lifted_search(std::size_t center,
                                                     std::span<const std::uint32_t> members,
                                                     const LiftedTable* table) {
  std::optional<std::size_t> best;
  double best_abs = -1.0;
  auto consider = [&](std::size_t x) {
    if (x == center) return;
    double a = std::abs(lifted_cos(x, center));
    if (a > best_abs) {
      best_abs = a;
      best = x;
    }
  };
  if (!table) {
    for (auto x : members) consider(x);
    return best;
  }
  const auto ci = static_cast<Eigen::Index>(center);
  const Vector proj = hq - frame->g_first.col(ci) - hv + frame->g_second.col(ci);
  const std::uint64_t mask = frame->bits >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << frame->bits) - 1;
  std::vector<std::uint32_t> cand;
  const std::size_t m = table->members;
  for (std::size_t t = 0; t < frame->tables; ++t) {
    std::uint64_t plus = sign_key(proj, t, frame->bits);
    auto first = table->entries.begin() + static_cast<std::ptrdiff_t>(t * m);
    auto last = first + static_cast<std::ptrdiff_t>(m);
    for (std::uint64_t key : {plus, ~plus & mask}) {
      auto lo = std::lower_bound(first, last, std::make_pair(key, std::uint32_t{0}));
      for (; lo != last && lo->first == key; ++lo) cand.push_back(lo->second);
    }
  }
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  for (auto x : cand) consider(x);
  return best;
}

FixedScaleIndex fixed_scale_instantiate(const PointSet& X, const Ids& Z, double r,
                                        const FixedScaleParams& params, std::uint64_t seed) {
  if (!(r > 0.0)) throw std::invalid_argument("radius must be positive");
  if (params.rho_rep < 0.0 || params.rho_rep > 1.0) throw std::invalid_argument("rho_rep must lie in [0, 1]");
  FixedScaleIndex D;
  D.r = r;
  const double m = static_cast<double>(Z.size());
  const double log_term = std::log(m / params.delta);
  Rng rng(seed);
  auto sample = [&rng](std::span<const std::uint32_t> from, std::size_t count) {
    std::uniform_int_distribution<std::size_t> pick(0, from.size() - 1);
    Ids out;
    for (std::size_t i = 0; i < count; ++i) {
      auto x = from[pick(rng)];
      if (std::find(out.begin(), out.end(), x) == out.end()) out.push_back(x);
    }
    return out;
  };

  auto n_rep = static_cast<std::size_t>(std::ceil(params.c1 * std::pow(m, params.rho_rep) * log_term));
  D.anchors = sample(Z, std::max<std::size_t>(1, n_rep));
  D.anchor_of.assign(Z.size(), FixedScaleIndex::kNoAnchor);
  for (std::size_t j = 0; j < Z.size(); ++j)
    for (std::size_t a = 0; a < D.anchors.size(); ++a)
      if ((X.col(Z[j]) - X.col(D.anchors[a])).norm() <= 2.0 * r) {
        D.anchor_of[j] = static_cast<std::uint32_t>(a);
        break;
      }

  const std::size_t l = params.ap.backend == ApBackend::trivial
                            ? 1
                            : std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(params.c2 * log_term)));
  const double delta_ddagger = params.delta / (static_cast<double>(l) * m * m);
  const auto p = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(params.c3 * std::log(1.0 / delta_ddagger))));
  for (std::size_t i = 0; i < l; ++i) {
    D.partitions.push_back(ApStructure::build(X, Z, r, params.ap, derive_seed(seed, {1, i})));
    const ApStructure& ap = D.partitions.back();
    std::vector<FixedScaleSet> sets(ap.set_count());
    for (std::size_t s = 0; s < ap.set_count(); ++s) {
      auto S = ap.set(s);
      FixedScaleSet& F = sets[s];
      F.anchors = sample(S, p);
      for (auto x : S) {
        bool near = std::any_of(F.anchors.begin(), F.anchors.end(),
                                [&](std::uint32_t w) { return (X.col(x) - X.col(w)).norm() <= 4.0 * r; });
        if (near)
          ++F.assigned;
        else
          F.unassigned.push_back(x);
      }
    }
    D.sets.push_back(std::move(sets));
  }
  return D;
}

std::optional<Violator> fixed_scale_query(const FixedScaleIndex& D, const MultiScaleIndex* lazy,
                                          OracleCall& call, const Ids& Z, std::size_t x_hat) {
  using K = Violator::Kind;
  if (call.distance_violated(x_hat)) return Violator{K::distance, x_hat, 0};
  const bool tables = lazy && call.frame->bits > 0;
  const auto pos = static_cast<std::size_t>(std::lower_bound(Z.begin(), Z.end(), x_hat) - Z.begin());

  if (auto a = D.anchor_of.at(pos); a != FixedScaleIndex::kNoAnchor) {
    const std::size_t z = D.anchors[a];
    if (call.distance_violated(z)) return Violator{K::distance, z, 0};
    if (call.pair_violated(z, x_hat)) return Violator{K::pair, z, x_hat};
    const LiftedTable* T = tables ? &lazy->lifted_table(D, 0, z, Z) : nullptr;
    if (auto x = call.lifted_search(z, Z, T); x && call.pair_violated(*x, z)) return Violator{K::pair, *x, z};
    return std::nullopt;
  }

  const auto& config = *call.config;
  for (std::size_t i = 0; i < D.partitions.size(); ++i) {
    const ApStructure& ap = D.partitions[i];
    const auto sets = ap.hash(call.geo->X.col(x_hat));
    std::size_t unassigned = 0, assigned = 0;
    for (auto s : sets) {
      unassigned += D.sets[i][s].unassigned.size();
      assigned += D.sets[i][s].assigned;
    }
    if (unassigned > config.cap_unassigned || assigned > config.cap_assigned) continue;
    for (auto s : sets) {
      const FixedScaleSet& F = D.sets[i][s];
      for (auto x : F.unassigned)
        if (call.pair_violated(x, x_hat)) return Violator{K::pair, x, x_hat};
      const auto S = ap.set(s);
      for (auto w : F.anchors) {
        if (call.distance_violated(w)) return Violator{K::distance, w, 0};
        if (call.pair_violated(w, x_hat)) return Violator{K::pair, w, x_hat};
        const std::uint64_t group = 1 + (static_cast<std::uint64_t>(i) << 32 | s);
        const LiftedTable* T = tables ? &lazy->lifted_table(D, group, w, S) : nullptr;
        if (auto x = call.lifted_search(w, S, T); x && call.pair_violated(*x, w)) return Violator{K::pair, *x, w};
      }
    }
  }
  return std::nullopt;
}

struct MultiScaleIndex::Impl {
  mutable std::shared_mutex scales_mutex;
  std::map<std::pair<std::size_t, std::size_t>, std::unique_ptr<FixedScaleIndex>> scales;
  mutable std::shared_mutex tables_mutex;
  std::map<std::tuple<std::size_t, std::size_t, std::uint64_t, std::size_t>, std::unique_ptr<LiftedTable>> tables;
  double delta_dagger = 0.0;
  double spread = 1.0;  // r_apx / r_low
};

MultiScaleIndex::MultiScaleIndex(const TerminalGeometry& geo, const PartitionTree& tree,
                                 const LiftFrame& frame, const TerminalConfig& config,
                                 std::uint64_t seed)
    : geo_(geo), tree_(tree), frame_(frame), config_(config), seed_(seed), impl_(std::make_unique<Impl>()) {
  const double n = static_cast<double>(geo.X.n());
  const double d = static_cast<double>(geo.X.d());
  impl_->spread = std::pow(n * d, config.beta_term);
  ladder_ = static_cast<std::size_t>(std::ceil(std::log(impl_->spread * impl_->spread) / config.gamma_term));
  impl_->delta_dagger = config.delta / (n * n * d);
}

MultiScaleIndex::~MultiScaleIndex() = default;

double MultiScaleIndex::r_low(std::size_t node) const { return tree_.nodes.at(node).r_apx / impl_->spread; }

double MultiScaleIndex::scale_radius(std::size_t node, std::size_t i) const {
  return std::pow(1.0 + config_.gamma_term, static_cast<double>(i)) * r_low(node);
}

const FixedScaleIndex& MultiScaleIndex::scale(std::size_t node, std::size_t i) const {
  const auto key = std::make_pair(node, i);
  {
    std::shared_lock lock(impl_->scales_mutex);
    if (auto it = impl_->scales.find(key); it != impl_->scales.end()) return *it->second;
  }
  FixedScaleParams params{config_.rho_rep, config_.c1, config_.c2, config_.c3, impl_->delta_dagger, config_.ap};
  auto built = std::make_unique<FixedScaleIndex>(
      fixed_scale_instantiate(geo_.X, tree_.nodes.at(node).points, scale_radius(node, i), params,
                              derive_seed(seed_, {frame_.id, node, i})));
  built->node = node;
  built->scale = i;
  std::unique_lock lock(impl_->scales_mutex);
  auto [it, inserted] = impl_->scales.try_emplace(key, std::move(built));
  return *it->second;
}

const LiftedTable& MultiScaleIndex::lifted_table(const FixedScaleIndex& D, std::uint64_t group,
                                                 std::size_t center,
                                                 std::span<const std::uint32_t> members) const {
  const auto key = std::make_tuple(D.node, D.scale, group, center);
  {
    std::shared_lock lock(impl_->tables_mutex);
    if (auto it = impl_->tables.find(key); it != impl_->tables.end()) return *it->second;
  }
  auto T = std::make_unique<LiftedTable>();
  const auto ci = static_cast<Eigen::Index>(center);
  const Vector base = frame_.g_first.col(ci) + frame_.g_second.col(ci);
  std::vector<std::uint32_t> ids;
  for (auto x : members)
    if (x != center) ids.push_back(x);
  T->members = ids.size();
  T->entries.resize(frame_.tables * ids.size());
  for (std::size_t j = 0; j < ids.size(); ++j) {
    const auto xi = static_cast<Eigen::Index>(ids[j]);
    const Vector proj = frame_.g_first.col(xi) + frame_.g_second.col(xi) - base;
    for (std::size_t t = 0; t < frame_.tables; ++t)
      T->entries[t * ids.size() + j] = {sign_key(proj, t, frame_.bits), ids[j]};
  }
  for (std::size_t t = 0; t < frame_.tables; ++t) {
    auto first = T->entries.begin() + static_cast<std::ptrdiff_t>(t * ids.size());
    std::sort(first, first + static_cast<std::ptrdiff_t>(ids.size()));
  }
  std::unique_lock lock(impl_->tables_mutex);
  auto [it, inserted] = impl_->tables.try_emplace(key, std::move(T));
  return *it->second;
}

std::optional<Violator> MultiScaleIndex::query(OracleCall& call, std::size_t node, std::size_t x_hat,
                                               std::size_t lo, std::size_t hi) const {
  const Ids& Z = tree_.nodes.at(node).points;
  hi = std::min(hi, ladder_);
  for (std::size_t i = lo; i <= hi; ++i)
    if (auto w = fixed_scale_query(scale(node, i), this, call, Z, x_hat)) return w;
  return std::nullopt;
}

std::size_t MultiScaleIndex::built_scales() const {
  std::shared_lock lock(impl_->scales_mutex);
  return impl_->scales.size();
}

}  // namespace temb
