#include "temb/ellipsoid.hpp"

#include <cmath>

namespace temb {

EllipsoidState ellipsoid_start(const Vector& x0, double R) {
  if (x0.size() < 2) throw std::invalid_argument("ellipsoid needs dimension at least 2");
  if (!(R > 0.0)) throw std::invalid_argument("initial radius must be positive");
  return {x0, R * R * Matrix::Identity(x0.size(), x0.size()), 0};
}

EllipsoidState ellipsoid_update(const EllipsoidState& state, const Vector& v) {
  const double k = static_cast<double>(state.dim());
  const Vector Av = state.shape * v;
  const double vAv = v.dot(Av);
  if (!(vAv >= 1e-300)) throw std::runtime_error("degenerate ellipsoid cut");
  const Vector u = Av / std::sqrt(vAv);
  EllipsoidState next;
  next.center = state.center + u / (k + 1.0);
  next.shape = (k * k / (k * k - 1.0)) * (state.shape - (2.0 / (k + 1.0)) * u * u.transpose());
  next.shape = 0.5 * (next.shape + next.shape.transpose()).eval();
  next.iteration = state.iteration + 1;
  return next;
}

std::size_t ellipsoid_iteration_bound(std::size_t k, double R, double eps_ball) {
  const double kk = static_cast<double>(k);
  return static_cast<std::size_t>(std::ceil(2.0 * kk * (kk + 1.0) * std::log(R / eps_ball))) + 1;
}

EllipsoidResult run_ellipsoid(const Vector& x0, double R, const SeparationOracle& oracle,
                              std::size_t max_iters) {
  EllipsoidState state = ellipsoid_start(x0, R);
  while (true) {
    std::optional<Vector> normal = oracle(state.center);
    if (!normal) return {state.center, state.iteration};
    if (state.iteration >= max_iters) throw EllipsoidCapExceeded(std::move(state));
    state = ellipsoid_update(state, *normal);
  }
}

}  // namespace temb
