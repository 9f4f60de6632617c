#pragma once

// Fixed-step RK4 for the delayed modal system, with a cubic-Hermite continuous
// extension. Steps are aligned with the delay (tau = d * dt), so every delayed
// lookup falls either on a stored node or on the midpoint of an earlier step.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "errors.hpp"
#include "model.hpp"

namespace rijke4dvar {

struct IntegratorConfig {
  double dt = 1e-3;
  double t_end = 1.0;
};

namespace detail {

inline constexpr double kGridTolerance = 1e-9;

/// Returns `duration / dt` when it is an integer to within kGridTolerance.
inline std::optional<std::size_t> exact_steps(double duration, double dt) {
  const double ratio = duration / dt;
  const double rounded = std::round(ratio);
  if (!std::isfinite(ratio) || rounded < 0.0) return std::nullopt;
  if (std::abs(ratio - rounded) > kGridTolerance * std::max(1.0, rounded)) return std::nullopt;
  return static_cast<std::size_t>(rounded);
}

/// Hermite midpoint of u_f over one step [xa, xb]. Only eta is needed, and
/// d(eta_j)/dt = j pi (etadot_j/(j pi)) comes from the nodal states alone.
inline double midpoint_flame_velocity(const ModelParams& params,
                                      const Eigen::Ref<const Eigen::VectorXd>& xa,
                                      const Eigen::Ref<const Eigen::VectorXd>& xb, double dt) {
  const int n = params.n_modes();
  const auto& c = params.cos_f();
  const auto& k = params.wavenumber();
  double u = 0.0;
  for (int i = 0; i < n; ++i)
    u += c[i] * (0.5 * (xa[i] + xb[i]) + 0.125 * dt * k[i] * (xa[n + i] - xb[n + i]));
  return u;
}

}  // namespace detail

/// Number of RK4 steps for a window and the delay measured in steps.
struct TimeGrid {
  double dt = 0.0;
  std::size_t n_steps = 0;
  std::size_t delay_steps = 0;

  static TimeGrid make(const IntegratorConfig& config, const ModelParams& params) {
    if (!(config.dt > 0.0) || !std::isfinite(config.dt))
      throw ConfigError("integrator.dt must be > 0");
    if (!(config.t_end > 0.0) || !std::isfinite(config.t_end))
      throw ConfigError("integrator.t_end must be > 0");
    const auto n = detail::exact_steps(config.t_end, config.dt);
    if (!n || *n == 0)
      throw ConfigError("t_end / dt must be an integer (t_end=" + std::to_string(config.t_end) +
                        ", dt=" + std::to_string(config.dt) + ")");
    const auto d = detail::exact_steps(params.tau(), config.dt);
    if (!d || *d == 0)
      throw ConfigError("tau / dt must be a positive integer (tau=" +
                        std::to_string(params.tau()) + ", dt=" + std::to_string(config.dt) + ")");
    return TimeGrid{config.dt, *n, *d};
  }

  double time(std::size_t k) const noexcept { return static_cast<double>(k) * dt; }
  double t_end() const noexcept { return time(n_steps); }

  /// Grid index of t when t lies on a node.
  std::optional<std::size_t> node_index(double t) const {
    const auto k = detail::exact_steps(t, dt);
    if (!k || *k > n_steps) return std::nullopt;
    return k;
  }
};

class Trajectory;
inline Trajectory integrate(const StateVector& x0, const ModelParams& params,
                            const IntegratorConfig& config);

/// Dense forward solution: nodal states plus, per step, the start and end
/// derivatives that define the Hermite interpolant on that step.
class Trajectory {
 public:
  Trajectory(TimeGrid grid, int n_modes)
      : grid_(grid),
        n_modes_(n_modes),
        states_(2 * n_modes, grid.n_steps + 1),
        start_rate_(2 * n_modes, grid.n_steps),
        end_rate_(2 * n_modes, grid.n_steps) {}

  const TimeGrid& grid() const noexcept { return grid_; }
  int n_modes() const noexcept { return n_modes_; }
  std::size_t n_steps() const noexcept { return grid_.n_steps; }
  double dt() const noexcept { return grid_.dt; }
  double t_end() const noexcept { return grid_.t_end(); }
  double time(std::size_t k) const noexcept { return grid_.time(k); }

  /// Column k is the state at t_k.
  const Eigen::MatrixXd& states() const noexcept { return states_; }
  const Eigen::MatrixXd& start_rates() const noexcept { return start_rate_; }
  const Eigen::MatrixXd& end_rates() const noexcept { return end_rate_; }

  StateVector state(std::size_t k) const { return StateVector(Eigen::VectorXd(states_.col(k))); }

  /// Cubic-Hermite dense output; exact at nodes.
  StateVector sample(double t) const {
    if (!(t >= 0.0) || t > t_end() * (1.0 + detail::kGridTolerance))
      throw OutOfWindow("sample time " + std::to_string(t) + " outside [0, " +
                        std::to_string(t_end()) + "]");
    if (auto k = grid_.node_index(t)) return state(*k);
    const double r = t / grid_.dt;
    auto k = static_cast<std::size_t>(std::floor(r));
    if (k >= grid_.n_steps) k = grid_.n_steps - 1;
    const double s = r - static_cast<double>(k);
    const double s2 = s * s;
    const double s3 = s2 * s;
    const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    const double h10 = s3 - 2.0 * s2 + s;
    const double h01 = -2.0 * s3 + 3.0 * s2;
    const double h11 = s3 - s2;
    Eigen::VectorXd x = h00 * states_.col(k) + h10 * grid_.dt * start_rate_.col(k) +
                        h01 * states_.col(k + 1) + h11 * grid_.dt * end_rate_.col(k);
    return StateVector(std::move(x));
  }

 private:
  friend Trajectory integrate(const StateVector&, const ModelParams&, const IntegratorConfig&);

  TimeGrid grid_;
  int n_modes_;
  Eigen::MatrixXd states_;
  Eigen::MatrixXd start_rate_;
  Eigen::MatrixXd end_rate_;
};

/// Classical RK4 over [0, t_end]. Step n is forced iff t_n >= tau; within a
/// forced step the stage delays read node n-d, the Hermite midpoint of step
/// n-d, and node n-d+1.
inline Trajectory integrate(const StateVector& x0, const ModelParams& params,
                            const IntegratorConfig& config) {
  if (x0.n_modes() != params.n_modes())
    throw ConfigError("initial state has " + std::to_string(x0.n_modes()) +
                      " modes, model has " + std::to_string(params.n_modes()));
  const TimeGrid grid = TimeGrid::make(config, params);
  Trajectory traj(grid, params.n_modes());
  const double dt = grid.dt;
  const std::size_t d = grid.delay_steps;
  const int m = params.state_size();

  Eigen::VectorXd k1(m), k2(m), k3(m), k4(m), stage(m);
  auto& X = traj.states_;
  X.col(0) = x0.values();
  if (!X.col(0).allFinite()) throw IntegrationDiverged(0);

  for (std::size_t n = 0; n < grid.n_steps; ++n) {
    const bool forced = n >= d;
    double u1 = 0.0, u_mid = 0.0, u4 = 0.0;
    if (forced) {
      u1 = flame_velocity(X.col(n - d), params);
      u_mid = detail::midpoint_flame_velocity(params, X.col(n - d), X.col(n - d + 1), dt);
      u4 = flame_velocity(X.col(n - d + 1), params);
    }
    const auto xn = X.col(n);
    evaluate_rhs(params, xn, u1, forced, k1);
    stage = xn + 0.5 * dt * k1;
    evaluate_rhs(params, stage, u_mid, forced, k2);
    stage = xn + 0.5 * dt * k2;
    evaluate_rhs(params, stage, u_mid, forced, k3);
    stage = xn + dt * k3;
    evaluate_rhs(params, stage, u4, forced, k4);
    X.col(n + 1) = xn + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!X.col(n + 1).allFinite()) throw IntegrationDiverged(n);

    traj.start_rate_.col(n) = k1;
    const double u_end = forced ? u4 : 0.0;
    evaluate_rhs(params, X.col(n + 1), u_end, forced, traj.end_rate_.col(n));
  }
  return traj;
}

}  // namespace rijke4dvar
