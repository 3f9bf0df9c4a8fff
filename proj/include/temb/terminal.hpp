#pragma once

#include "temb/ann.hpp"
#include "temb/ellipsoid.hpp"
#include "temb/geometry.hpp"
#include "temb/medjl.hpp"
#include "temb/partition_tree.hpp"
#include "temb/random.hpp"
#include "temb/sketch.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace temb {

enum class LiftedBackend { brute, simhash };

// Theory values are noted beside each default.
struct TerminalConfig {
  double eps = 0.2;
  double c_dagger = 1.0 / 50.0;  // eps_dagger = c_dagger * eps, "small enough c"
  double c_k = 32.0;             // k = ceil(c_k eps^-2 ln n), O(eps^-2 log n)
  std::size_t k = 0;             // 0 selects the formula above
  double delta = 0.1;
  TreeParams tree;
  AannParams aann;

  double gamma_term = 0.1;  // Theta(eps^3 / log^3 n)
  double beta_term = 1.0;   // 10
  double rho_rep = 0.0;
  double c1 = 1.0;   // anchors: ceil(c1 m^rho_rep ln(m / delta_dagger))
  double c2 = 0.25;  // AP repetitions: ceil(c2 ln(m / delta_dagger))
  double c3 = 0.25;  // anchors per set: ceil(c3 ln(1 / delta_ddagger))
  ApParams ap;       // trivial partitions use a single repetition
  std::size_t cap_unassigned = kNoCap;
  std::size_t cap_assigned = kNoCap;

  LiftedBackend lifted = LiftedBackend::brute;
  std::size_t lifted_tables = 2;
  std::size_t lifted_bits = 0;  // 0 selects ceil(log2(n) / 2)

  bool scale_window = true;
  bool deterministic_queries = false;
  std::size_t probe_cap = kNoCap;  // per query

  bool median_jl = false;
  std::size_t mjl_sketches = 0;  // 0 selects default_ensemble_size
  std::size_t mjl_rows = 0;      // 0 selects default_ensemble_rows
  std::size_t mjl_samples = 1;   // ensemble members consulted per query

  double eps_acc = 0.5;  // verification tolerance

  double eps_dagger() const { return c_dagger * eps; }
};

struct Violator {
  enum class Kind { distance, pair };
  Kind kind = Kind::distance;
  std::size_t x = 0;
  std::size_t y = 0;  // center of a pair violator
};

// Req constraints for a candidate v in the coordinates of P (rows x d).
struct ReqSystem {
  const PointSet* X = nullptr;
  const Matrix* P = nullptr;
  const Matrix* PX = nullptr;  // P * X
  double eps_dagger = 0.0;

  // Signed pair defect <v - Py, P(x - y)> - <q - y, x - y>.
  double pair_defect(const Vector& q, const Vector& v, std::size_t x, std::size_t y) const;
  bool holds(const Violator& w, const Vector& q, const Vector& v) const;
  // Normal n with <y' - v, n> >= 0 for every y' satisfying the constraints.
  Vector hyperplane(const Violator& w, const Vector& q, const Vector& v) const;
  // Exhaustive scan; distance constraints first, then pairs by center.
  std::optional<Violator> scan(const Vector& q, const Vector& v) const;
};

bool violator_holds(const Violator& w, const PointSet& X, const Matrix& P, const Vector& q,
                    const Vector& v, double eps_dagger);
Vector violator_to_hyperplane(const Violator& w, const PointSet& X, const Matrix& P,
                              const Vector& q, const Vector& v, double eps_dagger);

struct FeasiblePoint {
  Vector v;        // k-vector
  Vector reduced;  // coordinates in the range basis
  std::size_t iterations = 0;
  std::size_t bound = 0;
};

// Ellipsoid method against the exhaustive Req oracle, started at P x_hat with
// x_hat the exact nearest neighbor of q.
FeasiblePoint direct_feasible_point(const PointSet& X, const Sketch& S, const Vector& q,
                                    double eps_dagger);
FeasiblePoint direct_feasible_point(const PointSet& X, const RangeFactor& F, const Vector& q,
                                    double eps_dagger);

// First block of the lifted vectors: the identity or one median-JL member.
struct LiftFrame {
  std::size_t id = 0;         // 0 for the identity
  const Matrix* map = nullptr;  // k' x d, null for the identity
  Matrix coords;              // map * X
  Matrix h_first, h_second;   // simhash hyperplanes
  Matrix g_first, g_second;   // h_first * coords, h_second * PX
  std::size_t bits = 0, tables = 0;
};

struct LiftedTable {
  std::vector<std::pair<std::uint64_t, std::uint32_t>> entries;  // tables x members, sorted per table
  std::size_t members = 0;
};

struct FixedScaleSet {
  Ids anchors;     // W
  Ids unassigned;  // members farther than 4r from every anchor
  std::size_t assigned = 0;
};

struct FixedScaleIndex {
  double r = 0.0;
  std::size_t node = 0;
  std::size_t scale = 0;
  Ids anchors;                          // Z
  std::vector<std::uint32_t> anchor_of;  // per node position; kNoAnchor if unassigned
  std::vector<ApStructure> partitions;
  std::vector<std::vector<FixedScaleSet>> sets;  // [repetition][set]

  static constexpr std::uint32_t kNoAnchor = 0xffffffffu;
};

struct TerminalGeometry {
  PointSet X;
  Matrix P;   // reduced sketch, rows x d
  Matrix PX;  // P * X
  double eps_dagger = 0.0;
};

struct FixedScaleParams {
  double rho_rep = 0.0;
  double c1 = 1.0, c2 = 0.25, c3 = 0.25;
  double delta = 0.1;  // delta_dagger of the caller
  ApParams ap;
};

FixedScaleIndex fixed_scale_instantiate(const PointSet& X, const Ids& Z, double r,
                                        const FixedScaleParams& params, std::uint64_t seed);

class MultiScaleIndex;

// Per-call state: the query, the candidate and memoized evaluations.
struct OracleCall {
  const TerminalGeometry* geo = nullptr;
  const LiftFrame* frame = nullptr;
  const TerminalConfig* config = nullptr;
  Vector q, v;
  Vector fq;          // first block of q
  Vector hq, hv;      // simhash projections of fq and v
  std::size_t probes = 0;
  std::unordered_map<std::uint64_t, double> memo;

  OracleCall(const TerminalGeometry& g, const LiftFrame& f, const TerminalConfig& c, const Vector& q,
             const Vector& v);
  bool distance_violated(std::size_t x);
  double lifted_cos(std::size_t x, std::size_t center);
  bool pair_violated(std::size_t x, std::size_t center);
  // Member with the largest |lifted cosine| around center among those inspected.
  std::optional<std::size_t> lifted_search(std::size_t center, std::span<const std::uint32_t> members,
                                           const LiftedTable* table);
};

// Tables come from lazy when the frame uses simhash; brute scans otherwise.
std::optional<Violator> fixed_scale_query(const FixedScaleIndex& D, const MultiScaleIndex* lazy,
                                          OracleCall& call, const Ids& Z, std::size_t x_hat);

// Lazily instantiated ladders over every tree node for one lift frame.
class MultiScaleIndex {
 public:
  MultiScaleIndex(const TerminalGeometry& geo, const PartitionTree& tree, const LiftFrame& frame,
                  const TerminalConfig& config, std::uint64_t seed);
  ~MultiScaleIndex();

  std::size_t ladder() const { return ladder_; }
  double r_low(std::size_t node) const;
  double scale_radius(std::size_t node, std::size_t i) const;
  const FixedScaleIndex& scale(std::size_t node, std::size_t i) const;
  // Simhash table over members around center; group 0 is the anchor layer,
  // 1 + flat set id otherwise.
  const LiftedTable& lifted_table(const FixedScaleIndex& D, std::uint64_t group, std::size_t center,
                                  std::span<const std::uint32_t> members) const;

  // Scales i = lo..hi of the stop node; first violator wins.
  std::optional<Violator> query(OracleCall& call, std::size_t node, std::size_t x_hat,
                                std::size_t lo, std::size_t hi) const;

  std::size_t built_scales() const;

 private:
  struct Impl;
  const TerminalGeometry& geo_;
  const PartitionTree& tree_;
  const LiftFrame& frame_;
  const TerminalConfig& config_;
  std::uint64_t seed_;
  std::size_t ladder_ = 0;
  std::unique_ptr<Impl> impl_;
};

struct EmbeddingStep {
  Vector v;  // reduced coordinates
  Violator violator;
  Vector normal;
};

struct EmbeddingResult {
  Vector z;  // k + 1 coordinates
  std::size_t anchor = 0;  // input index of x_hat
  std::size_t node = 0;
  double anchor_distance = 0.0;
  std::size_t iterations = 0;
  std::size_t probes = 0;
  std::vector<EmbeddingStep> steps;  // filled when tracing
};

class TerminalIndex {
 public:
  static TerminalIndex build(const PointSet& X, const TerminalConfig& config, std::uint64_t seed);
  // Rebuild from stored parts; lazy ladders are regenerated from the seed.
  static TerminalIndex assemble(const PointSet& X, const TerminalConfig& config, std::uint64_t seed,
                                Sketch sketch, AannIndex aann, std::optional<MedianEnsemble> ensemble);

  TerminalIndex(TerminalIndex&&) noexcept;
  TerminalIndex& operator=(TerminalIndex&&) noexcept;
  ~TerminalIndex();

  EmbeddingResult embed(const Vector& q, Rng& rng, bool trace = false) const;

  const TerminalConfig& config() const;
  std::uint64_t seed() const;
  const PointSet& input() const;
  const Dedup& dedup() const;
  const Sketch& sketch() const;
  const RangeFactor& range() const;
  const TerminalGeometry& geometry() const;
  const AannIndex& aann() const;
  const std::optional<MedianEnsemble>& ensemble() const;
  std::size_t built_scales() const;

 private:
  struct State;
  explicit TerminalIndex(std::unique_ptr<State> state);
  std::unique_ptr<State> state_;
};

EmbeddingResult compute_terminal_embedding(const TerminalIndex& index, const Vector& q, Rng& rng);

struct Distortion {
  double max_over = 0.0;
  double max_under = 0.0;
};

// Against f(x) = (Px, 0).
Distortion verify_embedding(const PointSet& X, const Matrix& P, const Vector& q, const Vector& z);

}  // namespace temb
