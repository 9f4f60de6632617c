#pragma once

// Discrete adjoint of the delayed RK4 integrator.
//
// The reverse sweep transposes each step exactly as it was executed forward,
// so the returned gradient is the gradient of the discrete cost to rounding.
// The model is linear in the current state (dx/dt = A x + g(u_delayed)), so
// each stage transposes through the constant A^T; the nonlinearity only enters
// through the delayed flame velocity, whose sensitivity is routed back to the
// nodes of the step n-d that produced it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "cost.hpp"
#include "errors.hpp"
#include "integrator.hpp"
#include "model.hpp"

namespace rijke4dvar {

/// Lagrange multipliers at one node, laid out like StateVector:
/// xi_j/(j pi) dual to the eta_j equations, nu_j dual to the pressure ones.
struct AdjointState {
  Eigen::VectorXd xi;
  Eigen::VectorXd nu;

  static AdjointState from_values(const Eigen::Ref<const Eigen::VectorXd>& v) {
    const Eigen::Index n = v.size() / 2;
    return AdjointState{v.head(n), v.tail(n)};
  }
};

struct GradientReport {
  Eigen::VectorXd grad;
  double j_value = 0.0;
  CostBreakdown cost;
  /// Observation-only sensitivity of x0 (before adding dJ_bg/dx0).
  AdjointState adjoint_at_start;
  /// Per-component |adjoint - fd| / max(1, |fd|), when a check was requested.
  std::optional<Eigen::VectorXd> fd_check;
};

namespace detail {

/// y = A^T v for the linear part of the modal rhs.
inline void apply_transposed_operator(const ModelParams& params,
                                      const Eigen::Ref<const Eigen::VectorXd>& v,
                                      Eigen::Ref<Eigen::VectorXd> y) {
  const int n = params.n_modes();
  const auto& k = params.wavenumber();
  const auto& zeta = params.damping();
  for (int i = 0; i < n; ++i) {
    y[i] = -k[i] * v[n + i];
    y[n + i] = k[i] * v[i] - zeta[i] * v[n + i];
  }
}

/// Backward sweep. `multipliers` must hold the observation sources at their
/// nodes on entry; on exit column k is dJ_obs/dx_k including all downstream
/// influence, and column 0 is the observation part of the gradient.
inline void adjoint_sweep(const Trajectory& traj, const ModelParams& params,
                          Eigen::MatrixXd& multipliers) {
  const TimeGrid& grid = traj.grid();
  const int n = params.n_modes();
  const int m = params.state_size();
  const double dt = grid.dt;
  const std::size_t d = grid.delay_steps;
  const auto& X = traj.states();
  const auto& c = params.cos_f();
  const auto& s = params.sin_f();
  const auto& k = params.wavenumber();

  Eigen::VectorXd kb1(m), kb2(m), kb3(m), kb4(m), z(m), acc(m);
  for (std::size_t step = grid.n_steps; step-- > 0;) {
    const Eigen::VectorXd lam = multipliers.col(step + 1);
    kb4 = (dt / 6.0) * lam;
    acc = lam;
    apply_transposed_operator(params, kb4, z);
    acc += z;
    kb3 = (dt / 3.0) * lam + dt * z;
    apply_transposed_operator(params, kb3, z);
    acc += z;
    kb2 = (dt / 3.0) * lam + (0.5 * dt) * z;
    apply_transposed_operator(params, kb2, z);
    acc += z;
    kb1 = (dt / 6.0) * lam + (0.5 * dt) * z;
    apply_transposed_operator(params, kb1, z);
    acc += z;
    multipliers.col(step) += acc;

    if (step < d) continue;
    const auto xa = X.col(step - d);
    const auto xb = X.col(step - d + 1);
    const double u1 = flame_velocity(xa, params);
    const double u_mid = midpoint_flame_velocity(params, xa, xb, dt);
    const double u4 = flame_velocity(xb, params);
    // dk/du = -2 s beta Poly'(u) on the pressure rows.
    auto sens = [&](double u, const Eigen::VectorXd& kb) {
      return -2.0 * params.beta() * params.poly_derivative(u) * s.dot(kb.tail(n));
    };
    const double ub1 = sens(u1, kb1);
    const double ub_mid = sens(u_mid, kb2) + sens(u_mid, kb3);
    const double ub4 = sens(u4, kb4);

    auto col_a = multipliers.col(step - d);
    col_a.head(n) += (ub1 + 0.5 * ub_mid) * c;
    col_a.tail(n) += (0.125 * dt * ub_mid) * c.cwiseProduct(k);
    auto col_b = multipliers.col(step - d + 1);
    col_b.head(n) += (ub4 + 0.5 * ub_mid) * c;
    col_b.tail(n) -= (0.125 * dt * ub_mid) * c.cwiseProduct(k);
  }
}

}  // namespace detail

/// Exact gradient of the discrete cost with respect to x0.
inline GradientReport gradient(const StateVector& x0, const AssimilationProblem& problem) {
  const auto& params = problem.params;
  CostEvaluation eval = eval_total(x0, problem);
  const Trajectory& traj = eval.trajectory;
  const auto steps = locate_observations(problem.observations, traj.grid(), params.n_modes());
  const Eigen::VectorXd shape = pressure_shape(params.n_modes(), problem.observations.x_m);

  Eigen::MatrixXd multipliers = Eigen::MatrixXd::Zero(params.state_size(), traj.n_steps() + 1);
  for (std::size_t i = 0; i < steps.size(); ++i)
    multipliers.col(steps[i]) +=
        detail::observation_source(traj.states().col(steps[i]), problem.observations.records[i],
                                   problem.observations, shape, problem.covariance);
  detail::adjoint_sweep(traj, params, multipliers);

  GradientReport report;
  report.adjoint_at_start = AdjointState::from_values(multipliers.col(0));
  report.grad = multipliers.col(0) +
                background_gradient(x0, problem.background, problem.covariance);
  if (!report.grad.allFinite()) throw NumericalFailure("adjoint gradient is not finite");
  report.j_value = eval.cost.total;
  report.cost = std::move(eval.cost);
  return report;
}

inline constexpr double kDefaultFdStep = 1e-6;

/// Central-difference oracle, two forward solves per component.
inline Eigen::VectorXd fd_gradient(const StateVector& x0, const AssimilationProblem& problem,
                                   double step = kDefaultFdStep) {
  if (!(step > 0.0)) throw ConfigError("finite-difference step must be > 0");
  const Eigen::Index m = x0.values().size();
  Eigen::VectorXd g(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    StateVector plus = x0;
    StateVector minus = x0;
    plus.values()[i] += step;
    minus.values()[i] -= step;
    const double jp = eval_total(plus, problem).cost.total;
    const double jm = eval_total(minus, problem).cost.total;
    g[i] = (jp - jm) / (2.0 * step);
  }
  return g;
}

/// |a - f| / max(1, |f|) componentwise.
inline Eigen::VectorXd gradient_relative_error(const Eigen::VectorXd& adjoint,
                                               const Eigen::VectorXd& fd) {
  return (adjoint - fd).cwiseAbs().cwiseQuotient(fd.cwiseAbs().cwiseMax(1.0));
}

/// Adjoint gradient with the finite-difference comparison filled in.
inline GradientReport checked_gradient(const StateVector& x0, const AssimilationProblem& problem,
                                       double step = kDefaultFdStep) {
  GradientReport report = gradient(x0, problem);
  report.fd_check = gradient_relative_error(report.grad, fd_gradient(x0, problem, step));
  return report;
}

}  // namespace rijke4dvar
