#pragma once

#include "temb/geometry.hpp"

#include <functional>
#include <optional>
#include <stdexcept>

namespace temb {

// E(x, A) = { y : (y - x)^T A^{-1} (y - x) <= 1 }.
struct EllipsoidState {
  Vector center;
  Matrix shape;
  std::size_t iteration = 0;

  std::size_t dim() const { return static_cast<std::size_t>(center.size()); }
};

EllipsoidState ellipsoid_start(const Vector& x0, double R);

// Central cut keeping { y : <y - x, v> >= 0 }.
EllipsoidState ellipsoid_update(const EllipsoidState& state, const Vector& v);

// ceil(2k(k+1) ln(R / eps_ball)) + 1.
std::size_t ellipsoid_iteration_bound(std::size_t k, double R, double eps_ball);

// Returns a normal v with <y - x, v> >= 0 for every feasible y, or nullopt
// to accept x.
using SeparationOracle = std::function<std::optional<Vector>(const Vector&)>;

struct EllipsoidResult {
  Vector point;
  std::size_t iterations = 0;
};

class EllipsoidCapExceeded : public std::runtime_error {
 public:
  EllipsoidCapExceeded(EllipsoidState state)
      : std::runtime_error("ellipsoid iteration cap exceeded"), state_(std::move(state)) {}
  const EllipsoidState& state() const { return state_; }

 private:
  EllipsoidState state_;
};

EllipsoidResult run_ellipsoid(const Vector& x0, double R, const SeparationOracle& oracle,
                              std::size_t max_iters);

}  // namespace temb
