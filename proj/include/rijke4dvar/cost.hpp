#pragma once

// Background and observation cost functionals for strong-constraint 4D-Var.
//
//   J = J_bg(x0) + sum_i J_obs,i(x(t_i))
//
// Background kinds: (a) pressure at x_m at t=0, (b) sin-weighted pressure
// modes, (c) all modes. Observation kinds: (a) pressure at x_m, (b)
// sin-weighted pressure modes. Covariances are diagonal with scalar variances.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "integrator.hpp"
#include "model.hpp"

namespace rijke4dvar {

enum class BackgroundKind { PressurePoint, PressureModes, FullState };
enum class ObservationKind { PressurePoint, PressureModes };

inline std::string_view to_string(BackgroundKind kind) {
  switch (kind) {
    case BackgroundKind::PressurePoint: return "a";
    case BackgroundKind::PressureModes: return "b";
    case BackgroundKind::FullState: return "c";
  }
  return "?";
}

inline std::string_view to_string(ObservationKind kind) {
  return kind == ObservationKind::PressurePoint ? "a" : "b";
}

inline std::optional<BackgroundKind> parse_background_kind(std::string_view s) {
  if (s == "a" || s == "pressure") return BackgroundKind::PressurePoint;
  if (s == "b" || s == "modes") return BackgroundKind::PressureModes;
  if (s == "c" || s == "full") return BackgroundKind::FullState;
  return std::nullopt;
}

inline std::optional<ObservationKind> parse_observation_kind(std::string_view s) {
  if (s == "a" || s == "pressure") return ObservationKind::PressurePoint;
  if (s == "b" || s == "modes") return ObservationKind::PressureModes;
  return std::nullopt;
}

/// Matching pressure/pressure or modes/modes pairings.
inline bool pairing_is_consistent(BackgroundKind bg, ObservationKind obs) {
  return (bg == BackgroundKind::PressurePoint && obs == ObservationKind::PressurePoint) ||
         (bg == BackgroundKind::PressureModes && obs == ObservationKind::PressureModes);
}

struct CovarianceSpec {
  double b_var = 0.005 * 0.005;
  double r_var = 0.005 * 0.005;

  void validate() const {
    if (!(b_var > 0.0) || !std::isfinite(b_var)) throw ConfigError("covariance.b_var must be > 0");
    if (!(r_var > 0.0) || !std::isfinite(r_var)) throw ConfigError("covariance.r_var must be > 0");
  }
};

struct ObservationRecord {
  double t = 0.0;
  /// Scalar pressure (kind a) or the N_m mode amplitudes etadot_j/(j pi) (kind b).
  Eigen::VectorXd value;
};

struct ObservationSet {
  ObservationKind kind = ObservationKind::PressurePoint;
  double x_m = 0.8;
  std::vector<ObservationRecord> records;
};

struct BackgroundSpec {
  BackgroundKind kind = BackgroundKind::PressurePoint;
  StateVector x0_bg;
  double x_m = 0.8;
};

struct AssimilationProblem {
  ModelParams params;
  /// The assimilation window is [0, integrator.t_end].
  IntegratorConfig integrator;
  BackgroundSpec background;
  ObservationSet observations;
  CovarianceSpec covariance;
};

/// Observable of one state. Kind a gives p(x_m); kind b gives the raw mode
/// amplitudes, with the sin(j pi x_m) weight applied later inside the cost.
inline Eigen::VectorXd measure(const StateVector& state, ObservationKind kind, double x_m) {
  if (kind == ObservationKind::PressurePoint)
    return Eigen::VectorXd::Constant(1, reconstruct_pressure(state, x_m));
  return state.eta_dot();
}

inline double eval_j_bg(const StateVector& x0, const BackgroundSpec& bg, const CovarianceSpec& cov) {
  if (x0.n_modes() != bg.x0_bg.n_modes()) throw ConfigError("background/state mode mismatch");
  const Eigen::VectorXd dp = x0.eta_dot() - bg.x0_bg.eta_dot();
  const double scale = 0.5 / cov.b_var;
  switch (bg.kind) {
    case BackgroundKind::PressurePoint: {
      const double diff = pressure_shape(x0.n_modes(), bg.x_m).dot(dp);
      return scale * diff * diff;
    }
    case BackgroundKind::PressureModes:
      return scale * dp.cwiseProduct(pressure_shape(x0.n_modes(), bg.x_m)).squaredNorm();
    case BackgroundKind::FullState:
      return scale * (dp.squaredNorm() + (x0.eta() - bg.x0_bg.eta()).squaredNorm());
  }
  return 0.0;
}

/// Analytic dJ_bg/dx0.
inline Eigen::VectorXd background_gradient(const StateVector& x0, const BackgroundSpec& bg,
                                           const CovarianceSpec& cov) {
  const int n = x0.n_modes();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(2 * n);
  const Eigen::VectorXd dp = x0.eta_dot() - bg.x0_bg.eta_dot();
  switch (bg.kind) {
    case BackgroundKind::PressurePoint: {
      const Eigen::VectorXd w = pressure_shape(n, bg.x_m);
      g.tail(n) = (w.dot(dp) / cov.b_var) * w;
      break;
    }
    case BackgroundKind::PressureModes: {
      const Eigen::VectorXd w2 = pressure_shape(n, bg.x_m).array().square();
      g.tail(n) = dp.cwiseProduct(w2) / cov.b_var;
      break;
    }
    case BackgroundKind::FullState:
      g.head(n) = (x0.eta() - bg.x0_bg.eta()) / cov.b_var;
      g.tail(n) = dp / cov.b_var;
      break;
  }
  return g;
}

/// Grid index of every observation. Throws ConfigError for off-grid,
/// non-increasing, out-of-window, or wrongly sized records.
inline std::vector<std::size_t> locate_observations(const ObservationSet& obs,
                                                    const TimeGrid& grid, int n_modes) {
  if (!(obs.x_m > 0.0 && obs.x_m < 1.0))
    throw ConfigError("observation x_m must lie in (0, 1)");
  const Eigen::Index expected = obs.kind == ObservationKind::PressurePoint ? 1 : n_modes;
  std::vector<std::size_t> steps;
  steps.reserve(obs.records.size());
  for (std::size_t i = 0; i < obs.records.size(); ++i) {
    const auto& rec = obs.records[i];
    const auto k = grid.node_index(rec.t);
    if (!k)
      throw ConfigError("observation " + std::to_string(i) + " at t=" + std::to_string(rec.t) +
                        " is off the integration grid or outside [0, T]");
    if (*k == 0) throw ConfigError("observation times must be > 0");
    if (!steps.empty() && *k <= steps.back())
      throw ConfigError("observation times must be strictly increasing (record " +
                        std::to_string(i) + ")");
    if (rec.value.size() != expected)
      throw ConfigError("observation " + std::to_string(i) + " has " +
                        std::to_string(rec.value.size()) + " values, expected " +
                        std::to_string(expected));
    steps.push_back(*k);
  }
  return steps;
}

namespace detail {

/// Weighted residual r such that J_obs,i = |r|^2 / (2R), together with the
/// linear map from state to r (row form for kind a, diagonal weights for b).
inline Eigen::VectorXd observation_residual(const Eigen::Ref<const Eigen::VectorXd>& x,
                                            const ObservationRecord& rec,
                                            const ObservationSet& obs,
                                            const Eigen::VectorXd& shape) {
  const Eigen::Index n = shape.size();
  if (obs.kind == ObservationKind::PressurePoint)
    return Eigen::VectorXd::Constant(1, shape.dot(x.tail(n)) - rec.value[0]);
  return (x.tail(n) - rec.value).cwiseProduct(shape);
}

inline double observation_term(const Eigen::Ref<const Eigen::VectorXd>& x,
                               const ObservationRecord& rec, const ObservationSet& obs,
                               const Eigen::VectorXd& shape, const CovarianceSpec& cov) {
  return 0.5 / cov.r_var * observation_residual(x, rec, obs, shape).squaredNorm();
}

/// dJ_obs,i/dx at the observation time.
inline Eigen::VectorXd observation_source(const Eigen::Ref<const Eigen::VectorXd>& x,
                                          const ObservationRecord& rec,
                                          const ObservationSet& obs,
                                          const Eigen::VectorXd& shape,
                                          const CovarianceSpec& cov) {
  const Eigen::Index n = shape.size();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(2 * n);
  const Eigen::VectorXd r = observation_residual(x, rec, obs, shape);
  if (obs.kind == ObservationKind::PressurePoint)
    g.tail(n) = (r[0] / cov.r_var) * shape;
  else
    g.tail(n) = r.cwiseProduct(shape) / cov.r_var;
  return g;
}

}  // namespace detail

/// Per-observation terms J_obs,i.
inline std::vector<double> observation_terms(const Trajectory& traj, const ObservationSet& obs,
                                             const CovarianceSpec& cov) {
  const auto steps = locate_observations(obs, traj.grid(), traj.n_modes());
  const Eigen::VectorXd shape = pressure_shape(traj.n_modes(), obs.x_m);
  std::vector<double> terms(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i)
    terms[i] = detail::observation_term(traj.states().col(steps[i]), obs.records[i], obs, shape, cov);
  return terms;
}

inline double eval_j_obs(const Trajectory& traj, const ObservationSet& obs,
                         const CovarianceSpec& cov) {
  double total = 0.0;
  for (double term : observation_terms(traj, obs, cov)) total += term;
  return total;
}

struct CostBreakdown {
  double j_bg = 0.0;
  double j_obs = 0.0;
  double total = 0.0;
  std::vector<double> obs_terms;
};

struct CostEvaluation {
  CostBreakdown cost;
  Trajectory trajectory;
  /// False for mixed pairings such as (c, a) or (a, b); they are allowed.
  bool consistent_pairing = true;
};

inline CostEvaluation eval_total(const StateVector& x0, const BackgroundSpec& bg,
                                 const ObservationSet& obs, const CovarianceSpec& cov,
                                 const ModelParams& params, const IntegratorConfig& config) {
  cov.validate();
  Trajectory traj = integrate(x0, params, config);
  CostBreakdown cost;
  cost.j_bg = eval_j_bg(x0, bg, cov);
  cost.obs_terms = observation_terms(traj, obs, cov);
  for (double term : cost.obs_terms) cost.j_obs += term;
  cost.total = cost.j_bg + cost.j_obs;
  if (!std::isfinite(cost.total)) throw NumericalFailure("cost functional is not finite");
  return CostEvaluation{std::move(cost), std::move(traj), pairing_is_consistent(bg.kind, obs.kind)};
}

inline CostEvaluation eval_total(const StateVector& x0, const AssimilationProblem& problem) {
  return eval_total(x0, problem.background, problem.observations, problem.covariance,
                    problem.params, problem.integrator);
}

}  // namespace rijke4dvar
