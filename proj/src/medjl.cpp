#include "temb/medjl.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>
#include <stdexcept>

namespace temb {

namespace {

constexpr std::size_t kExactLimit = 64;
constexpr std::size_t kTripleSamples = 100000;
constexpr std::uint64_t kTripleSeed = 0x7121e5ULL;

using Triple = std::array<std::uint32_t, 3>;

std::vector<Triple> triple_set(std::size_t n) {
  const auto slots = static_cast<std::uint32_t>(n + 1);
  std::vector<Triple> out;
  if (n <= kExactLimit) {
    out.reserve(static_cast<std::size_t>(slots) * slots * slots);
    for (std::uint32_t a = 0; a < slots; ++a)
      for (std::uint32_t b = 0; b < slots; ++b)
        for (std::uint32_t c = 0; c < slots; ++c) out.push_back({a, b, c});
    return out;
  }
  Rng rng(kTripleSeed);
  std::uniform_int_distribution<std::uint32_t> pick(0, slots - 1);
  out.resize(kTripleSamples);
  for (auto& t : out) t = {pick(rng), pick(rng), pick(rng)};
  return out;
}

// Defect from the bilinear form D(a,b) = <Pa,Pb> - <a,b> and the plain Gram G.
double triple_defect(double dxy, double dxz, double dyz, double dzz, double, double gxz,
                     double gyz, double gzz, double gxx, double gyy) {
  double num = dxy - dxz - dyz + dzz;
  double nx = gxx - 2 * gxz + gzz, ny = gyy - 2 * gyz + gzz;
  double scale = std::sqrt(std::max(nx, 0.0) * std::max(ny, 0.0));
  if (scale <= 1e-12 * std::max({gxx, gyy, gzz, 1e-300})) return 0.0;
  return std::abs(num) / scale;
}

void prepare_triples(MedianEnsemble& E, const PointSet& X) {
  const std::size_t n = X.n();
  const auto q = static_cast<std::uint32_t>(n);
  const Matrix G = X.matrix().transpose() * X.matrix();
  std::vector<Triple> base;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> pair_slot;
  E.query_triples.clear();
  for (const auto& t : triple_set(n)) {
    if (t[0] == q || t[1] == q || t[2] == q) {
      E.query_triples.push_back(t);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          if (t[i] != q && t[j] != q) {
            auto key = std::minmax(t[i], t[j]);
            pair_slot.emplace(key, 0);
          }
    } else {
      base.push_back(t);
    }
  }
  E.query_pairs.clear();
  for (auto& [key, slot] : pair_slot) {
    slot = static_cast<std::uint32_t>(E.query_pairs.size());
    E.query_pairs.push_back(key);
  }
  E.base_defect = Vector::Zero(static_cast<Eigen::Index>(E.m()));
  E.pair_defects.assign(E.m(), Vector());
  for (std::size_t s = 0; s < E.m(); ++s) {
    const Matrix& PX = E.projections[s];
    const Matrix D = PX.transpose() * PX - G;
    double worst = 0.0;
    for (const auto& [x, y, z] : base)
      worst = std::max(worst, triple_defect(D(x, y), D(x, z), D(y, z), D(z, z), G(x, y), G(x, z),
                                            G(y, z), G(z, z), G(x, x), G(y, y)));
    E.base_defect[static_cast<Eigen::Index>(s)] = worst;
    Vector pd(static_cast<Eigen::Index>(E.query_pairs.size()));
    for (std::size_t p = 0; p < E.query_pairs.size(); ++p)
      pd[static_cast<Eigen::Index>(p)] = D(E.query_pairs[p].first, E.query_pairs[p].second);
    E.pair_defects[s] = std::move(pd);
  }
}

}  // namespace

std::size_t default_ensemble_size(std::size_t n, std::size_t d) {
  double nd = static_cast<double>(std::max<std::size_t>(n * d, 2));
  return std::min<std::size_t>(512, static_cast<std::size_t>(std::ceil(4.0 * (d + 10.0) * std::log(nd))));
}

std::size_t default_ensemble_rows(std::size_t n) {
  double ln = std::log(static_cast<double>(std::max<std::size_t>(n, 3)));
  return std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(4.0 * ln * std::log(ln))));
}

MedianEnsemble ensemble_from_sketches(const PointSet& X, std::vector<Sketch> sketches,
                                      double c_frobenius) {
  MedianEnsemble E;
  if (sketches.empty()) throw std::invalid_argument("ensemble needs at least one sketch");
  E.k_prime = sketches.front().k();
  E.frobenius_cap = c_frobenius * std::sqrt(static_cast<double>(X.d()));
  E.sketches = std::move(sketches);
  for (const auto& S : E.sketches) E.projections.push_back(S.matrix * X.matrix());
  prepare_triples(E, X);
  return E;
}

MedianEnsemble build_ensemble(const PointSet& X, std::size_t m, std::size_t k_prime, double eps,
                              std::uint64_t seed, double c_frobenius, int retries) {
  if (m < 1) throw std::invalid_argument("ensemble size must be positive");
  if (eps * std::sqrt(static_cast<double>(X.n() * X.d())) < 1.0)
    std::clog << "warning: ensemble accuracy " << eps << " is below 1/sqrt(nd)\n";
  const double cap = c_frobenius * std::sqrt(static_cast<double>(X.d()));
  std::vector<Sketch> sketches;
  sketches.reserve(m);
  std::uint64_t draw = 0;
  for (std::size_t i = 0; i < m; ++i) {
    int rejected = 0;
    while (true) {
      Sketch S = sample_sketch(X.d(), k_prime, derive_seed(seed, {0xe5e, draw++}));
      if (S.matrix.norm() <= cap) {
        sketches.push_back(std::move(S));
        break;
      }
      if (++rejected > retries) throw std::runtime_error("ensemble resample cap exceeded");
    }
  }
  return ensemble_from_sketches(X, std::move(sketches), c_frobenius);
}

Vector worst_defects(const MedianEnsemble& E, const PointSet& X, const Vector& q) {
  const auto n = static_cast<std::uint32_t>(X.n());
  const Vector gq = X.matrix().transpose() * q;
  const double gqq = q.squaredNorm();
  Vector diagG(n);
  for (std::uint32_t i = 0; i < n; ++i) diagG[i] = X.col(i).squaredNorm();
  auto gram = [&](std::uint32_t a, std::uint32_t b) {
    if (a == n && b == n) return gqq;
    if (a == n) return gq[b];
    if (b == n) return gq[a];
    if (a == b) return diagG[a];
    return X.col(a).dot(X.col(b));
  };
  // Precompute the X-X Gram entries of the query pairs once.
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> slot;
  for (std::size_t p = 0; p < E.query_pairs.size(); ++p) slot.emplace(E.query_pairs[p], p);
  Vector gpair(static_cast<Eigen::Index>(E.query_pairs.size()));
  for (std::size_t p = 0; p < E.query_pairs.size(); ++p)
    gpair[static_cast<Eigen::Index>(p)] = gram(E.query_pairs[p].first, E.query_pairs[p].second);
  struct Resolved {
    std::array<std::int64_t, 6> pairs;  // xy, xz, yz, zz, xx, yy: >=0 pair slot, -1-i query with i, -1-n q-q
  };
  auto resolve = [&](std::uint32_t a, std::uint32_t b) -> std::int64_t {
    if (a == n || b == n) {
      std::uint32_t other = (a == n) ? b : a;
      return -1 - static_cast<std::int64_t>(other);
    }
    return static_cast<std::int64_t>(slot.at(std::minmax(a, b)));
  };
  std::vector<Resolved> plan;
  plan.reserve(E.query_triples.size());
  for (const auto& [x, y, z] : E.query_triples)
    plan.push_back({{resolve(x, y), resolve(x, z), resolve(y, z), resolve(z, z), resolve(x, x), resolve(y, y)}});

  Vector out(static_cast<Eigen::Index>(E.m()));
  for (std::size_t s = 0; s < E.m(); ++s) {
    const Matrix& PX = E.projections[s];
    const Vector pq = E.sketches[s].matrix * q;
    const Vector dq = PX.transpose() * pq - gq;  // D(q, x)
    const double dqq = pq.squaredNorm() - gqq;
    const Vector& pd = E.pair_defects[s];
    auto D = [&](std::int64_t r) {
      if (r >= 0) return pd[r];
      std::int64_t other = -1 - r;
      return other == n ? dqq : dq[other];
    };
    auto Gv = [&](std::int64_t r) {
      if (r >= 0) return gpair[r];
      std::int64_t other = -1 - r;
      return other == n ? gqq : gq[other];
    };
    double worst = E.base_defect[static_cast<Eigen::Index>(s)];
    for (const auto& r : plan) {
      const auto& p = r.pairs;
      worst = std::max(worst, triple_defect(D(p[0]), D(p[1]), D(p[2]), D(p[3]), Gv(p[0]), Gv(p[1]),
                                            Gv(p[2]), Gv(p[3]), Gv(p[4]), Gv(p[5])));
    }
    out[static_cast<Eigen::Index>(s)] = worst;
  }
  return out;
}

double good_fraction(const MedianEnsemble& E, const PointSet& X, const Vector& q, double eps) {
  Vector worst = worst_defects(E, X, q);
  std::size_t good = 0;
  for (Eigen::Index s = 0; s < worst.size(); ++s) good += worst[s] <= eps;
  return static_cast<double>(good) / static_cast<double>(worst.size());
}

std::vector<std::size_t> sample_sketch_indices(const MedianEnsemble& E, std::size_t count, Rng& rng) {
  if (count < 1 || count > E.m()) throw std::invalid_argument("sample count out of range");
  std::vector<std::size_t> all(E.m());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> out;
  out.reserve(count);
  std::sample(all.begin(), all.end(), std::back_inserter(out), count, rng);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

}  // namespace temb
