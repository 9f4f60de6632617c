#pragma once

// Twin experiments: a model run from a perturbed origin plays the truth, a
// noisy copy of its initial state is the background, and noisy measurements of
// the truth over [0, T_as] are assimilated. Errors are reported in pressure at
// x_m over the assimilation window and the forecast that follows it.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cost.hpp"
#include "errors.hpp"
#include "integrator.hpp"
#include "model.hpp"
#include "optimizer.hpp"

namespace rijke4dvar {

struct TwinConfig {
  ModelSettings model;
  double dt = 1e-3;
  /// Truth initial condition: eta_j(0) and etadot_j(0)/(j pi) for every mode.
  double truth_perturbation = 0.05;
  double truth_pressure_perturbation = 0.0;
  double x_m = 0.8;
  double b_var = 0.005 * 0.005;
  double r_var = 0.005 * 0.005;
  BackgroundKind bg_kind = BackgroundKind::PressurePoint;
  ObservationKind obs_kind = ObservationKind::PressurePoint;
  int n_obs = 100;
  double t_assim = 0.4;
  double t_forecast = 5.0;
  std::uint64_t rng_seed = 1;
  /// Zeroes the corresponding noise draws when false.
  bool background_noise = true;
  bool observation_noise = true;
  OptimizerConfig optimizer;

  void validate() const {
    ModelParams params(model);
    if (!(x_m > 0.0 && x_m < 1.0)) throw ConfigError("x_m must lie in (0, 1)");
    CovarianceSpec{b_var, r_var}.validate();
    if (n_obs < 1) throw ConfigError("twin.n_obs must be >= 1");
    if (!(t_assim > 0.0)) throw ConfigError("twin.t_assim must be > 0");
    if (t_forecast < t_assim) throw ConfigError("twin.t_forecast must be >= twin.t_assim");
    const auto n_as = TimeGrid::make({dt, t_assim}, params).n_steps;
    TimeGrid::make({dt, t_forecast}, params);
    if (static_cast<std::size_t>(n_obs) > n_as)
      throw ConfigError("twin.n_obs exceeds the number of grid points in the assimilation window");
    optimizer.validate();
  }
};

struct ErrorSample {
  double t = 0.0;
  double bg_error = 0.0;
  double analysis_error = 0.0;
};

struct WindowRms {
  double background = 0.0;
  double analysis = 0.0;
};

struct TwinSummary {
  WindowRms assimilation;
  WindowRms forecast;
  /// Divisor applied to the pressure errors.
  double normalization = 1.0;
  /// True when |p_true(x_m, 0)| was too small and max |p_true| was used.
  bool normalization_fallback = false;
};

struct TwinResult {
  StateVector x0_true;
  StateVector x0_bg;
  StateVector x0_analysis;
  std::vector<ErrorSample> error_series;
  TwinSummary summary;
  OptimizationResult optimization;
  CostBreakdown background_cost;
  CostBreakdown analysis_cost;
  AssimilationProblem problem;
  bool consistent_pairing = true;
};

inline constexpr double kNormalizationFloor = 1e-8;

namespace detail {

inline std::seed_seq make_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t extra = 0) {
  return std::seed_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(extra),
                       static_cast<std::uint32_t>(extra >> 32)};
}

inline constexpr std::uint64_t kBackgroundStream = 0x6267;
inline constexpr std::uint64_t kObservationStream = 0x6f6273;

}  // namespace detail

/// Truth, background and observations of a twin experiment, before assimilation.
struct TwinSetup {
  StateVector x0_true;
  Trajectory truth;
  AssimilationProblem problem;
};

inline TwinSetup make_twin_setup(const TwinConfig& config) {
  config.validate();
  ModelParams params(config.model);
  const int n = params.n_modes();

  StateVector x0_true(n);
  x0_true.eta().setConstant(config.truth_perturbation);
  x0_true.eta_dot().setConstant(config.truth_pressure_perturbation);

  // Background noise depends only on the seed, so sweeps over n_obs share it.
  StateVector x0_bg = x0_true;
  {
    auto seq = detail::make_seed(config.rng_seed, detail::kBackgroundStream);
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, std::sqrt(config.b_var));
    for (Eigen::Index i = 0; i < x0_bg.values().size(); ++i) {
      const double draw = normal(rng);
      if (config.background_noise) x0_bg.values()[i] += draw;
    }
  }

  Trajectory truth = integrate(x0_true, params, {config.dt, config.t_forecast});
  const TimeGrid assim_grid = TimeGrid::make({config.dt, config.t_assim}, params);

  ObservationSet obs;
  obs.kind = config.obs_kind;
  obs.x_m = config.x_m;
  {
    auto seq = detail::make_seed(config.rng_seed, detail::kObservationStream,
                                 static_cast<std::uint64_t>(config.n_obs));
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, std::sqrt(config.r_var));
    const auto n_as = static_cast<double>(assim_grid.n_steps);
    for (int i = 1; i <= config.n_obs; ++i) {
      // Equispaced in (0, T_as], snapped to the nearest node.
      const auto k = static_cast<std::size_t>(std::llround(i * n_as / config.n_obs));
      ObservationRecord rec;
      rec.t = assim_grid.time(k);
      rec.value = measure(truth.state(k), obs.kind, obs.x_m);
      for (Eigen::Index c = 0; c < rec.value.size(); ++c) {
        const double draw = normal(rng);
        if (config.observation_noise) rec.value[c] += draw;
      }
      obs.records.push_back(std::move(rec));
    }
  }

  AssimilationProblem problem{params,
                              {config.dt, config.t_assim},
                              {config.bg_kind, x0_bg, config.x_m},
                              std::move(obs),
                              {config.b_var, config.r_var}};
  return TwinSetup{std::move(x0_true), std::move(truth), std::move(problem)};
}

inline TwinResult run_twin(const TwinConfig& config) {
  TwinSetup setup = make_twin_setup(config);
  const AssimilationProblem& problem = setup.problem;
  const ModelParams& params = problem.params;

  TwinResult result;
  result.x0_true = setup.x0_true;
  result.x0_bg = problem.background.x0_bg;
  result.optimization = minimize(problem, result.x0_bg, config.optimizer);
  result.x0_analysis = result.optimization.x0_analysis;
  result.background_cost = eval_total(result.x0_bg, problem).cost;
  result.analysis_cost = eval_total(result.x0_analysis, problem).cost;
  result.consistent_pairing = pairing_is_consistent(config.bg_kind, config.obs_kind);

  const IntegratorConfig horizon{config.dt, config.t_forecast};
  const Trajectory& truth = setup.truth;
  const Trajectory bg = integrate(result.x0_bg, params, horizon);
  const Trajectory an = integrate(result.x0_analysis, params, horizon);

  const Eigen::VectorXd shape = pressure_shape(params.n_modes(), config.x_m);
  const std::size_t n_steps = truth.n_steps();
  Eigen::VectorXd p_true(n_steps + 1), p_bg(n_steps + 1), p_an(n_steps + 1);
  for (std::size_t k = 0; k <= n_steps; ++k) {
    p_true[k] = shape.dot(truth.states().col(k).tail(params.n_modes()));
    p_bg[k] = shape.dot(bg.states().col(k).tail(params.n_modes()));
    p_an[k] = shape.dot(an.states().col(k).tail(params.n_modes()));
  }

  TwinSummary& summary = result.summary;
  summary.normalization = std::abs(p_true[0]);
  if (summary.normalization < kNormalizationFloor) {
    summary.normalization = p_true.cwiseAbs().maxCoeff();
    summary.normalization_fallback = true;
    if (summary.normalization < kNormalizationFloor) summary.normalization = 1.0;
  }

  const std::size_t n_as = TimeGrid::make({config.dt, config.t_assim}, params).n_steps;
  double sum_bg_as = 0.0, sum_an_as = 0.0, sum_bg_fc = 0.0, sum_an_fc = 0.0;
  std::size_t count_as = 0, count_fc = 0;
  result.error_series.reserve(n_steps + 1);
  for (std::size_t k = 0; k <= n_steps; ++k) {
    const double e_bg = (p_true[k] - p_bg[k]) / summary.normalization;
    const double e_an = (p_true[k] - p_an[k]) / summary.normalization;
    result.error_series.push_back({truth.time(k), e_bg, e_an});
    if (k <= n_as) {
      sum_bg_as += e_bg * e_bg;
      sum_an_as += e_an * e_an;
      ++count_as;
    }
    if (k >= n_as) {
      sum_bg_fc += e_bg * e_bg;
      sum_an_fc += e_an * e_an;
      ++count_fc;
    }
  }
  summary.assimilation = {std::sqrt(sum_bg_as / count_as), std::sqrt(sum_an_as / count_as)};
  summary.forecast = {std::sqrt(sum_bg_fc / count_fc), std::sqrt(sum_an_fc / count_fc)};
  result.problem = std::move(setup.problem);
  return result;
}

/// One twin run per observation count. Truth and background are shared; the
/// observation noise stream is keyed on (seed, n_obs).
inline std::vector<TwinResult> sweep_n_obs(const TwinConfig& config,
                                           const std::vector<int>& n_obs_list) {
  std::vector<TwinResult> results;
  results.reserve(n_obs_list.size());
  for (int n_obs : n_obs_list) {
    TwinConfig c = config;
    c.n_obs = n_obs;
    results.push_back(run_twin(c));
  }
  return results;
}

/// Share of the instantaneous modal energy held by modes 1..k.
inline double modal_energy_split(const StateVector& state, int k) {
  if (k < 1 || k > state.n_modes())
    throw std::out_of_range("mode cutoff " + std::to_string(k) + " outside 1.." +
                            std::to_string(state.n_modes()));
  const Eigen::VectorXd e = modal_energy(state);
  const double total = e.sum();
  if (!(total > 0.0)) throw std::domain_error("modal energy fraction undefined for zero energy");
  return e.head(k).sum() / total;
}

inline double modal_energy_split(const Trajectory& traj, double t, int k) {
  return modal_energy_split(traj.sample(t), k);
}

}  // namespace rijke4dvar
