#include "temb/ann.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace temb {

double lsh_tradeoff(double c, double rho_u) {
  if (!(c > 1.0) || !(rho_u >= 0.0)) throw std::invalid_argument("lsh_tradeoff: argument out of range");
  double c2 = c * c;
  double bracket = std::sqrt(2.0 * c2 - 1.0) - (c2 - 1.0) * std::sqrt(rho_u);
  if (bracket < 0.0) throw std::invalid_argument("lsh_tradeoff: argument out of range");
  double root = bracket / c2;
  return root * root;
}

Vector snap_to_grid(const Vector& q, double nu) {
  if (!(nu > 0.0)) throw std::invalid_argument("snap width must be positive");
  return q.unaryExpr([nu](double x) { return std::floor(x / nu) * nu; });
}

namespace {

constexpr double kCellClip = 1 << 20;

std::size_t ceil_log2(std::size_t m) {
  std::size_t b = 0;
  while ((std::size_t{1} << b) < m) ++b;
  return b;
}

}  // namespace

std::uint64_t ApStructure::table_key(std::size_t table, const Vector& proj) const {
  std::uint64_t key = splitmix64(table);
  for (std::size_t j = 0; j < bits_; ++j) {
    auto row = static_cast<Eigen::Index>(table * bits_ + j);
    double cell = std::floor(proj[row] / width_ + offsets_[row]);
    cell = std::clamp(cell, -kCellClip, kCellClip);
    key = splitmix64(key ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(cell)));
  }
  return key;
}

ApStructure ApStructure::build(const PointSet& X, const Ids& ids, double r, const ApParams& params,
                               std::uint64_t seed) {
  if (!(r > 0.0)) throw std::invalid_argument("radius must be positive");
  ApStructure ap;
  ap.backend_ = params.backend;
  ap.r_ = r;
  ap.width_ = params.width;
  ap.probe_cap_ = params.probe_cap;
  if (ids.empty()) return ap;

  if (params.backend == ApBackend::trivial) {
    ap.ids_ = ids;
    ap.buckets_.push_back({0, 0, static_cast<std::uint32_t>(ids.size())});
    ap.table_first_.push_back(0);
    return ap;
  }

  const auto d = static_cast<Eigen::Index>(X.d());
  std::size_t tables = std::max<std::size_t>(1, params.tables);
  if (params.space_cap != kNoCap) tables = std::min(tables, std::max<std::size_t>(1, params.space_cap / ids.size()));
  ap.bits_ = params.bits ? params.bits : std::max<std::size_t>(1, ceil_log2(ids.size()));

  Rng rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif;
  const auto rows = static_cast<Eigen::Index>(tables * ap.bits_);
  ap.directions_.resize(rows, d);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < d; ++j) ap.directions_(i, j) = gauss(rng);
  ap.offsets_.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) ap.offsets_[i] = unif(rng);

  ap.centroid_ = Vector::Zero(d);
  for (auto i : ids) ap.centroid_ += X.col(i);
  ap.centroid_ /= static_cast<double>(ids.size());

  Matrix local(d, static_cast<Eigen::Index>(ids.size()));
  for (std::size_t j = 0; j < ids.size(); ++j)
    local.col(static_cast<Eigen::Index>(j)) = (X.col(ids[j]) - ap.centroid_) / r;
  const Matrix proj = ap.directions_ * local;

  std::vector<std::pair<std::uint64_t, std::uint32_t>> entries(ids.size());
  ap.ids_.reserve(tables * ids.size());
  for (std::size_t t = 0; t < tables; ++t) {
    for (std::size_t j = 0; j < ids.size(); ++j)
      entries[j] = {ap.table_key(t, proj.col(static_cast<Eigen::Index>(j))), ids[j]};
    std::sort(entries.begin(), entries.end());
    ap.table_first_.push_back(ap.buckets_.size());
    const auto base = static_cast<std::uint32_t>(ap.ids_.size());
    for (std::size_t j = 0; j < entries.size();) {
      std::size_t e = j;
      while (e < entries.size() && entries[e].first == entries[j].first) ++e;
      ap.buckets_.push_back({entries[j].first, base + static_cast<std::uint32_t>(j),
                             base + static_cast<std::uint32_t>(e)});
      j = e;
    }
    for (auto& [key, id] : entries) ap.ids_.push_back(id);
  }
  return ap;
}

std::span<const std::uint32_t> ApStructure::set(std::size_t s) const {
  const auto& b = buckets_.at(s);
  return {ids_.data() + b.begin, ids_.data() + b.end};
}

AnnStructure AnnStructure::build(const PointSet& X, const Ids& ids, double r, double c,
                                 AnnBackend backend, const ApParams& ap, std::uint64_t seed) {
  if (!(r > 0.0) || !(c > 1.0)) throw std::invalid_argument("ann requires r > 0 and c > 1");
  AnnStructure s;
  s.backend_ = backend;
  s.r_ = r;
  s.c_ = c;
  if (backend == AnnBackend::brute)
    s.ids_ = ids;
  else
    s.ap_ = ApStructure::build(X, ids, r, ap, seed);
  return s;
}

std::size_t AnnStructure::stored() const {
  return backend_ == AnnBackend::brute ? ids_.size() : ap_.stored();
}

Nearest AnnStructure::nearest_candidate(const PointSet& X, const Vector& q, std::size_t& probes) const {
  Nearest best{0, std::numeric_limits<double>::infinity()};
  auto consider = [&](std::size_t i) {
    ++probes;
    double dist = (X.col(i) - q).norm();
    if (dist < best.distance || (dist == best.distance && i < best.index)) best = {i, dist};
  };
  if (backend_ == AnnBackend::brute) {
    for (auto i : ids_) consider(i);
    return best;
  }
  auto sets = ap_.hash(q);
  if (sets.size() == 1) {
    for (auto i : ap_.set(sets[0])) consider(i);
    return best;
  }
  std::vector<std::uint32_t> seen;
  for (auto s : sets) {
    auto span = ap_.set(s);
    seen.insert(seen.end(), span.begin(), span.end());
  }
  std::sort(seen.begin(), seen.end());
  seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
  for (auto i : seen) consider(i);
  return best;
}

std::optional<Nearest> AnnStructure::query(const PointSet& X, const Vector& q,
                                           std::size_t& probes) const {
  Nearest best = nearest_candidate(X, q, probes);
  if (best.distance <= c_ * r_) return best;
  return std::nullopt;
}

namespace {

std::size_t scale_floor(double r, double r_low, double gamma, std::size_t ladder) {
  double i = std::floor(std::log(r / r_low) / std::log1p(gamma));
  return static_cast<std::size_t>(std::clamp(i, 0.0, static_cast<double>(ladder)));
}

std::size_t scale_ceil(double r, double r_low, double gamma, std::size_t ladder) {
  double i = std::ceil(std::log(r / r_low) / std::log1p(gamma));
  return static_cast<std::size_t>(std::clamp(i, 0.0, static_cast<double>(ladder)));
}

}  // namespace

AannIndex build_aann(const PointSet& X, PartitionTree tree, double delta, const AannParams& params,
                     std::uint64_t seed) {
  if (!(params.gamma > 0.0) || !(params.c > 1.0)) throw std::invalid_argument("aann requires gamma > 0 and c > 1");
  AannIndex D;
  D.params = params;
  D.delta = delta;
  D.seed = seed;
  const double n = static_cast<double>(tree.n);
  const double nd = n * static_cast<double>(X.d());
  D.copies = params.copies ? params.copies
                           : static_cast<std::size_t>(std::ceil(3.0 * std::log(n / delta)));
  D.copies = std::max<std::size_t>(1, D.copies);
  const double spread = params.c_range * std::pow(nd, params.alpha);

  D.nodes.resize(tree.nodes.size());
  for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
    const TreeNode& T = tree.nodes[id];
    AannNode& A = D.nodes[id];
    if (T.leaf()) continue;
    A.r_low = T.r_apx / spread;
    A.r_high = T.r_apx * spread;
    A.ladder = static_cast<std::size_t>(std::ceil(std::log(A.r_high / A.r_low) / params.gamma));
    A.nu = params.gamma / (1000.0 * std::pow(nd, params.beta)) * A.r_low;
    A.block.assign(T.points.size(), 0);
    for (std::size_t b = 0; b < T.c_low.blocks.size(); ++b)
      for (auto p : T.c_low.blocks[b]) {
        auto pos = std::lower_bound(T.points.begin(), T.points.end(), p) - T.points.begin();
        A.block[static_cast<std::size_t>(pos)] = static_cast<std::uint32_t>(b);
      }
    if (params.backend == AnnBackend::brute) {
      D.stored += T.points.size();
      continue;
    }

    Vector centroid = Vector::Zero(static_cast<Eigen::Index>(X.d()));
    for (auto p : T.points) centroid += X.col(p);
    centroid /= static_cast<double>(T.points.size());
    double radius = 0.0;
    for (auto p : T.points) radius = std::max(radius, (X.col(p) - centroid).norm());
    A.center_point = static_cast<std::uint32_t>(brute_nearest(X, T.points, centroid).index);

    double r_bottom = T.r_apx / params.c_bottom;
    double r_top = std::max(r_bottom, 2.0 * radius / (params.c - 1.0));
    A.phys_lo = scale_floor(r_bottom, A.r_low, params.gamma, A.ladder);
    A.phys_hi = std::max(A.phys_lo, scale_ceil(r_top, A.r_low, params.gamma, A.ladder));
    for (std::size_t i = A.phys_lo; i <= A.phys_hi; ++i)
      for (std::size_t c = 0; c < D.copies; ++c) {
        A.tables.push_back(AnnStructure::build(X, T.points, A.scale_radius(i, params.gamma), params.c,
                                               AnnBackend::lsh, params.ap, derive_seed(seed, {id, i, c})));
        D.stored += A.tables.back().stored();
        if (D.stored > params.space_cap)
          throw CapExceeded("aann space cap exceeded at node " + std::to_string(id));
      }
  }
  D.tree = std::move(tree);
  return D;
}

AannAnswer query_aann(const AannIndex& D, const PointSet& X, const Vector& q, Rng& rng) {
  const auto& P = D.params;
  AannAnswer ans;
  std::size_t id = 0;
  for (;;) {
    const TreeNode& T = D.tree.nodes[id];
    const AannNode& A = D.nodes[id];
    if (T.leaf()) {
      ans.index = T.points.front();
      ans.node = id;
      ans.scale = kLeafHit;
      ans.distance = (X.col(ans.index) - q).norm();
      ++ans.probes;
      return ans;
    }
    const Vector qs = snap_to_grid(q, A.nu);
    std::size_t hit = kNoHit;
    Nearest found;

    if (P.backend == AnnBackend::brute) {
      found = brute_nearest(X, T.points, qs);
      ans.probes += T.points.size();
      for (std::size_t i = 0; i <= A.ladder; ++i)
        if (found.distance <= P.c * A.scale_radius(i, P.gamma)) {
          hit = i;
          break;
        }
    } else {
      const std::size_t phys = A.phys_hi - A.phys_lo + 1;
      std::vector<std::optional<Nearest>> memo(phys * D.copies);
      std::optional<Nearest> center;
      std::vector<std::size_t> order(D.copies);
      for (std::size_t i = 0; i <= A.ladder && hit == kNoHit; ++i) {
        const double bound = P.c * A.scale_radius(i, P.gamma);
        const std::size_t slot = std::clamp(i, A.phys_lo, A.phys_hi) - A.phys_lo;
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (auto c : order) {
          auto& m = memo[slot * D.copies + c];
          if (!m) m = A.tables[slot * D.copies + c].nearest_candidate(X, qs, ans.probes);
          if (m->distance <= bound) {
            found = *m;
            hit = i;
            break;
          }
        }
        if (hit == kNoHit && i > A.phys_hi) {
          if (!center) {
            ++ans.probes;
            center = Nearest{A.center_point, (X.col(A.center_point) - qs).norm()};
          }
          if (center->distance <= bound) {
            found = *center;
            hit = i;
          }
        }
      }
    }

    if (hit == 0) {
      auto pos = std::lower_bound(T.points.begin(), T.points.end(), found.index) - T.points.begin();
      id = T.low_children[A.block[static_cast<std::size_t>(pos)]];
    } else if (hit == kNoHit) {
      id = T.rep_child;
    } else {
      ans.index = found.index;
      ans.node = id;
      ans.scale = hit;
      ans.distance = (X.col(found.index) - q).norm();
      return ans;
    }
  }
}

}  // namespace temb
