#pragma once

// Galerkin-discretized thermoacoustic model of a horizontal Rijke tube.
//
// The acoustic field is expanded on the natural modes of an open-open duct,
//   u(x,t) = sum_j eta_j(t) cos(j pi x),
//   p(x,t) = sum_j (etadot_j(t) / (j pi)) sin(j pi x),
// and the state vector stores (eta_1..eta_N, etadot_1/pi..etadot_N/(N pi)).
// A compact heat source at x_f couples the modes through a quintic law of the
// velocity seen by the flame one delay tau earlier.

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "errors.hpp"

namespace rijke4dvar {

/// Raw physical and numerical constants. Defaults are the reference Rijke tube
/// configuration used throughout the twin experiments.
struct ModelSettings {
  int n_modes = 10;
  double beta = 1.0;
  double tau = 0.02;
  double c1 = 0.05;
  double c2 = 0.01;
  /// a1..a5; a1 multiplies u^5, a5 multiplies u.
  std::array<double, 5> poly = {-0.012, 0.059, -0.044, -0.108, 0.5};
  double x_f = 0.3;
};

/// Validated model constants plus the loop-invariant modal arrays
/// s_j = sin(j pi x_f), c_j = cos(j pi x_f), zeta_j = C1 j^2 + C2 sqrt(j).
class ModelParams {
 public:
  ModelParams() : ModelParams(ModelSettings{}) {}

  explicit ModelParams(const ModelSettings& settings) : settings_(settings) {
    if (settings_.n_modes < 1) throw ConfigError("model.n_modes must be >= 1");
    if (!(settings_.tau > 0.0) || !std::isfinite(settings_.tau))
      throw ConfigError("model.tau must be > 0");
    if (!(settings_.x_f > 0.0 && settings_.x_f < 1.0))
      throw ConfigError("model.x_f must lie in (0, 1)");
    if (!std::isfinite(settings_.beta) || !std::isfinite(settings_.c1) ||
        !std::isfinite(settings_.c2))
      throw ConfigError("model coefficients must be finite");
    for (double a : settings_.poly)
      if (!std::isfinite(a)) throw ConfigError("model.poly coefficients must be finite");

    const int n = settings_.n_modes;
    wavenumber_.resize(n);
    sin_f_.resize(n);
    cos_f_.resize(n);
    damping_.resize(n);
    for (int i = 0; i < n; ++i) {
      const double j = i + 1;
      wavenumber_[i] = j * std::numbers::pi;
      sin_f_[i] = std::sin(j * std::numbers::pi * settings_.x_f);
      cos_f_[i] = std::cos(j * std::numbers::pi * settings_.x_f);
      damping_[i] = settings_.c1 * j * j + settings_.c2 * std::sqrt(j);
    }
  }

  const ModelSettings& settings() const noexcept { return settings_; }
  int n_modes() const noexcept { return settings_.n_modes; }
  int state_size() const noexcept { return 2 * settings_.n_modes; }
  double beta() const noexcept { return settings_.beta; }
  double tau() const noexcept { return settings_.tau; }
  double x_f() const noexcept { return settings_.x_f; }

  /// j pi for j = 1..N (0-based storage).
  const Eigen::VectorXd& wavenumber() const noexcept { return wavenumber_; }
  const Eigen::VectorXd& sin_f() const noexcept { return sin_f_; }
  const Eigen::VectorXd& cos_f() const noexcept { return cos_f_; }
  const Eigen::VectorXd& damping() const noexcept { return damping_; }

  /// Poly(u) = a1 u^5 + a2 u^4 + a3 u^3 + a4 u^2 + a5 u (Horner form).
  double poly(double u) const noexcept {
    const auto& a = settings_.poly;
    return ((((a[0] * u + a[1]) * u + a[2]) * u + a[3]) * u + a[4]) * u;
  }

  double poly_derivative(double u) const noexcept {
    const auto& a = settings_.poly;
    return (((5.0 * a[0] * u + 4.0 * a[1]) * u + 3.0 * a[2]) * u + 2.0 * a[3]) * u + a[4];
  }

 private:
  ModelSettings settings_;
  Eigen::VectorXd wavenumber_;
  Eigen::VectorXd sin_f_;
  Eigen::VectorXd cos_f_;
  Eigen::VectorXd damping_;
};

/// Galerkin amplitudes at one instant: eta_j followed by etadot_j/(j pi).
class StateVector {
 public:
  StateVector() = default;

  explicit StateVector(int n_modes) : values_(Eigen::VectorXd::Zero(2 * n_modes)) {
    if (n_modes < 1) throw ConfigError("state must have at least one mode");
  }

  explicit StateVector(Eigen::VectorXd values) : values_(std::move(values)) {
    if (values_.size() < 2 || values_.size() % 2 != 0)
      throw ConfigError("state vector length must be a positive even number");
  }

  static StateVector from_modes(const Eigen::VectorXd& eta, const Eigen::VectorXd& eta_dot) {
    if (eta.size() != eta_dot.size())
      throw ConfigError("eta and eta_dot must have the same number of modes");
    Eigen::VectorXd v(2 * eta.size());
    v << eta, eta_dot;
    return StateVector(std::move(v));
  }

  int n_modes() const noexcept { return static_cast<int>(values_.size() / 2); }

  auto eta() { return values_.head(n_modes()); }
  auto eta() const { return values_.head(n_modes()); }
  /// Scaled pressure amplitudes etadot_j/(j pi).
  auto eta_dot() { return values_.tail(n_modes()); }
  auto eta_dot() const { return values_.tail(n_modes()); }

  Eigen::VectorXd& values() noexcept { return values_; }
  const Eigen::VectorXd& values() const noexcept { return values_; }

  bool operator==(const StateVector&) const = default;

 private:
  Eigen::VectorXd values_;
};

/// beta * Poly(u) for the flame velocity u seen one delay earlier.
inline double heat_release(double u_f_delayed, const ModelParams& params) noexcept {
  return params.beta() * params.poly(u_f_delayed);
}

/// zeta_j for 1-based mode index j.
inline double damping(int j, const ModelParams& params) {
  if (j < 1 || j > params.n_modes())
    throw std::out_of_range("mode index " + std::to_string(j) + " outside 1.." +
                            std::to_string(params.n_modes()));
  return params.damping()[j - 1];
}

/// sin(j pi x) for j = 1..n_modes.
inline Eigen::VectorXd pressure_shape(int n_modes, double x) {
  Eigen::VectorXd w(n_modes);
  for (int i = 0; i < n_modes; ++i) w[i] = std::sin((i + 1) * std::numbers::pi * x);
  return w;
}

/// cos(j pi x) for j = 1..n_modes.
inline Eigen::VectorXd velocity_shape(int n_modes, double x) {
  Eigen::VectorXd w(n_modes);
  for (int i = 0; i < n_modes; ++i) w[i] = std::cos((i + 1) * std::numbers::pi * x);
  return w;
}

/// u at the flame, sum_j eta_j c_j, from a raw state vector.
inline double flame_velocity(const Eigen::Ref<const Eigen::VectorXd>& x,
                             const ModelParams& params) {
  return params.cos_f().dot(x.head(params.n_modes()));
}

/// Time derivative of the raw state. `forced` selects whether the delayed
/// heat release acts; the integrator decides this per step.
inline void evaluate_rhs(const ModelParams& params, const Eigen::Ref<const Eigen::VectorXd>& x,
                         double u_f_delayed, bool forced, Eigen::Ref<Eigen::VectorXd> out) {
  const int n = params.n_modes();
  const auto& k = params.wavenumber();
  const auto& zeta = params.damping();
  const double q = forced ? heat_release(u_f_delayed, params) : 0.0;
  for (int i = 0; i < n; ++i) {
    const double eta = x[i];
    const double p = x[n + i];
    out[i] = k[i] * p;
    out[n + i] = -k[i] * eta - zeta[i] * p - 2.0 * params.sin_f()[i] * q;
  }
}

/// d/dt of the state at time t. The heat-release forcing is active for t >= tau.
inline StateVector rhs(double t, const StateVector& state, double u_f_delayed,
                       const ModelParams& params) {
  if (state.n_modes() != params.n_modes())
    throw ConfigError("state has " + std::to_string(state.n_modes()) + " modes, model has " +
                      std::to_string(params.n_modes()));
  StateVector rate(params.n_modes());
  evaluate_rhs(params, state.values(), u_f_delayed, t >= params.tau(), rate.values());
  return rate;
}

inline double reconstruct_velocity(const StateVector& state, double x) {
  return velocity_shape(state.n_modes(), x).dot(state.eta());
}

inline double reconstruct_pressure(const StateVector& state, double x) {
  return pressure_shape(state.n_modes(), x).dot(state.eta_dot());
}

/// Per-mode acoustic energy eta_j^2 + (etadot_j/(j pi))^2.
inline Eigen::VectorXd modal_energy(const StateVector& state) {
  return state.eta().array().square() + state.eta_dot().array().square();
}

/// 1/2 sum_j (eta_j^2 + (etadot_j/(j pi))^2).
inline double acoustic_energy(const StateVector& state) { return 0.5 * modal_energy(state).sum(); }

}  // namespace rijke4dvar
