#pragma once

#include "temb/geometry.hpp"
#include "temb/partition_tree.hpp"
#include "temb/random.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace temb {

// rho_c with c^2 sqrt(rho_c) + (c^2 - 1) sqrt(rho_u) = sqrt(2c^2 - 1).
double lsh_tradeoff(double c, double rho_u);

// Coordinatewise floor(q / nu) * nu.
Vector snap_to_grid(const Vector& q, double nu);

inline constexpr std::size_t kNoCap = std::numeric_limits<std::size_t>::max();

enum class ApBackend { trivial, hyperplane_lsh };
enum class AnnBackend { brute, lsh };

struct ApParams {
  ApBackend backend = ApBackend::trivial;
  std::size_t tables = 16;
  std::size_t bits = 0;  // 0 selects ceil(log2 m)
  double width = 8.0;    // slab width in units of r
  std::size_t space_cap = kNoCap;
  std::size_t probe_cap = kNoCap;
};

// Sets are buckets of L hash tables. Each table hashes a point by t random
// slabs of (x - centroid) / r, clipped. Buckets are stored as sorted
// (key, id) runs.
class ApStructure {
 public:
  ApStructure() = default;

  static ApStructure build(const PointSet& X, const Ids& ids, double r, const ApParams& params,
                           std::uint64_t seed);

  std::size_t set_count() const { return buckets_.size(); }
  std::span<const std::uint32_t> set(std::size_t s) const;
  std::size_t stored() const { return ids_.size(); }
  std::size_t tables() const { return table_first_.size(); }

  // Indices of the sets containing the cell of x, at most one per table.
  template <typename Derived>
  std::vector<std::size_t> hash(const Eigen::MatrixBase<Derived>& x) const;

 private:
  friend struct Serializer;
  friend struct Deserializer;

  struct Bucket {
    std::uint64_t key;
    std::uint32_t begin, end;
  };

  std::uint64_t table_key(std::size_t table, const Vector& proj) const;

  ApBackend backend_ = ApBackend::trivial;
  double r_ = 1.0;
  double width_ = 8.0;
  std::size_t bits_ = 0;
  std::size_t probe_cap_ = kNoCap;
  Vector centroid_;
  Matrix directions_;  // (tables * bits) x d
  Vector offsets_;     // uniform in [0, 1)
  std::vector<std::uint32_t> ids_;
  std::vector<Bucket> buckets_;             // grouped by table, sorted by key
  std::vector<std::size_t> table_first_;    // first bucket of each table
};

// Returns the nearest candidate, certified only by the caller's radius check.
class AnnStructure {
 public:
  AnnStructure() = default;

  static AnnStructure build(const PointSet& X, const Ids& ids, double r, double c,
                            AnnBackend backend, const ApParams& ap, std::uint64_t seed);

  // Nearest inspected point; distance is infinite when nothing was inspected.
  Nearest nearest_candidate(const PointSet& X, const Vector& q, std::size_t& probes) const;

  // A point within c * r of q, or nothing.
  std::optional<Nearest> query(const PointSet& X, const Vector& q, std::size_t& probes) const;

  double radius() const { return r_; }
  double factor() const { return c_; }
  std::size_t stored() const;

 private:
  friend struct Serializer;
  friend struct Deserializer;

  AnnBackend backend_ = AnnBackend::brute;
  double r_ = 1.0;
  double c_ = 2.0;
  Ids ids_;  // brute only
  ApStructure ap_;
};

struct AannParams {
  AnnBackend backend = AnnBackend::brute;
  ApParams ap{ApBackend::hyperplane_lsh, 8, 0, 8.0, kNoCap, kNoCap};
  double c = 1.25;
  double gamma = 0.1;
  double alpha = 3.0;    // ladder range exponent
  double beta = 6.0;     // snap exponent
  double c_range = 1.0;
  std::size_t copies = 0;  // 0 selects ceil(3 ln(n / delta))
  // Physical lsh tables are kept for radii in [r_apx / c_bottom, 2 radius(Z) / (c - 1)].
  double c_bottom = 64.0;
  std::size_t space_cap = std::size_t{1} << 31;
};

struct AannNode {
  double r_low = 0.0;
  double r_high = 0.0;
  double nu = 0.0;                   // snap width
  std::size_t ladder = 0;            // scales 0..ladder
  std::vector<std::uint32_t> block;  // c_low block of each node point, aligned with points
  // lsh only
  std::size_t phys_lo = 0, phys_hi = 0;  // physical scale range, inclusive
  std::vector<AnnStructure> tables;      // (scale - phys_lo) * copies + copy
  std::uint32_t center_point = 0;        // point closest to the centroid

  double scale_radius(std::size_t i, double gamma) const {
    return std::pow(1.0 + gamma, static_cast<double>(i)) * r_low;
  }
};

struct AannIndex {
  PartitionTree tree;
  AannParams params;
  std::size_t copies = 0;
  double delta = 0.0;
  std::uint64_t seed = 0;
  std::vector<AannNode> nodes;  // aligned with tree.nodes
  std::size_t stored = 0;
};

inline constexpr std::size_t kLeafHit = std::numeric_limits<std::size_t>::max();
inline constexpr std::size_t kNoHit = kLeafHit - 1;

struct AannAnswer {
  std::size_t index = 0;
  std::size_t node = 0;
  std::size_t scale = kLeafHit;
  double distance = 0.0;
  std::size_t probes = 0;
};

class CapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

AannIndex build_aann(const PointSet& X, PartitionTree tree, double delta, const AannParams& params,
                     std::uint64_t seed);

AannAnswer query_aann(const AannIndex& D, const PointSet& X, const Vector& q, Rng& rng);

template <typename Derived>
std::vector<std::size_t> ApStructure::hash(const Eigen::MatrixBase<Derived>& x) const {
  std::vector<std::size_t> out;
  if (backend_ == ApBackend::trivial) {
    if (!buckets_.empty()) out.push_back(0);
    return out;
  }
  Vector proj = directions_ * ((x - centroid_) / r_);
  for (std::size_t t = 0; t < table_first_.size() && out.size() < probe_cap_; ++t) {
    std::uint64_t key = table_key(t, proj);
    auto first = buckets_.begin() + static_cast<std::ptrdiff_t>(table_first_[t]);
    auto last = t + 1 < table_first_.size()
                    ? buckets_.begin() + static_cast<std::ptrdiff_t>(table_first_[t + 1])
                    : buckets_.end();
    auto it = std::lower_bound(first, last, key,
                               [](const Bucket& b, std::uint64_t k) { return b.key < k; });
    if (it != last && it->key == key) out.push_back(static_cast<std::size_t>(it - buckets_.begin()));
  }
  return out;
}

}  // namespace temb
