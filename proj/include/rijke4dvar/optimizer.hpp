#pragma once

// Polak-Ribiere+ nonlinear conjugate gradient with a strong-Wolfe line search
// (bracketing + cubic-interpolation zoom).

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "adjoint.hpp"
#include "cost.hpp"
#include "errors.hpp"
#include "model.hpp"

namespace rijke4dvar {

struct OptimizerConfig {
  /// Stop when |grad J| / |grad J(x_start)| <= rel_grad_tol.
  double rel_grad_tol = 1e-4;
  int max_iters = 500;
  int max_line_search_evals = 40;
  /// Forced restart period; 0 selects the problem dimension 2 * N_m.
  int restart_period = 0;
  double c1 = 1e-4;
  double c2 = 0.1;
  /// Length of the first trial step, in state-norm units.
  double initial_step = 1e-2;

  void validate() const {
    if (!(rel_grad_tol > 0.0 && rel_grad_tol < 1.0))
      throw ConfigError("optimizer.rel_grad_tol must lie in (0, 1)");
    if (max_iters < 1) throw ConfigError("optimizer.max_iters must be >= 1");
    if (max_line_search_evals < 1) throw ConfigError("optimizer.max_line_search_evals must be >= 1");
    if (restart_period < 0) throw ConfigError("optimizer.restart_period must be >= 0");
    if (!(c1 > 0.0 && c1 < c2 && c2 < 1.0)) throw ConfigError("need 0 < c1 < c2 < 1");
    if (!(initial_step > 0.0)) throw ConfigError("optimizer.initial_step must be > 0");
  }
};

/// Value and gradient of an objective, plus its background/observation split.
struct Evaluation {
  double value = 0.0;
  Eigen::VectorXd gradient;
  double j_bg = 0.0;
  double j_obs = 0.0;
};

template <class F>
concept Objective = requires(F f, const Eigen::VectorXd& x) {
  { f(x) } -> std::convertible_to<Evaluation>;
};

struct IterationLog {
  int iteration = 0;
  double j = 0.0;
  double j_bg = 0.0;
  double j_obs = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
};

struct OptimizationResult {
  StateVector x0_analysis;
  std::vector<double> j_history;
  std::vector<double> grad_norm_history;
  std::vector<IterationLog> log;
  bool converged = false;
  int iterations = 0;
  int evaluations = 0;
  int restarts = 0;
  std::string diagnostic;

  double final_j() const { return j_history.back(); }
  double relative_grad_norm() const {
    return grad_norm_history.front() > 0.0
               ? grad_norm_history.back() / grad_norm_history.front()
               : 0.0;
  }
};

namespace detail {

struct LinePoint {
  double alpha = 0.0;
  double phi = 0.0;
  double dphi = 0.0;
};

/// Minimizer of the cubic matching values and slopes at a and b; NaN when
/// the cubic has no interior minimum.
inline double cubic_minimizer(const LinePoint& a, const LinePoint& b) {
  const double d1 = a.dphi + b.dphi - 3.0 * (a.phi - b.phi) / (a.alpha - b.alpha);
  const double disc = d1 * d1 - a.dphi * b.dphi;
  if (!(disc >= 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
  const double denom = b.dphi - a.dphi + 2.0 * d2;
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return b.alpha - (b.alpha - a.alpha) * (b.dphi + d2 - d1) / denom;
}

struct LineSearchOutcome {
  bool ok = false;
  double alpha = 0.0;
  Evaluation eval;
  int evals = 0;
  std::string diagnostic;
};

template <Objective F>
LineSearchOutcome strong_wolfe_search(F& objective, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& dir, double phi0, double dphi0,
                                      double alpha_init, const OptimizerConfig& config) {
  LineSearchOutcome out;
  std::optional<std::pair<double, Evaluation>> best;

  auto trial = [&](double alpha, Evaluation& eval) -> LinePoint {
    ++out.evals;
    LinePoint p{alpha, std::numeric_limits<double>::infinity(),
                std::numeric_limits<double>::quiet_NaN()};
    try {
      eval = objective(Eigen::VectorXd(x + alpha * dir));
    } catch (const IntegrationDiverged&) {
      return p;
    } catch (const NumericalFailure&) {
      return p;
    }
    if (!std::isfinite(eval.value) || !eval.gradient.allFinite()) return p;
    p.phi = eval.value;
    p.dphi = eval.gradient.dot(dir);
    if (p.phi <= phi0 + config.c1 * alpha * dphi0 && (!best || p.phi < best->second.value))
      best = std::make_pair(alpha, eval);
    return p;
  };
  auto armijo_fails = [&](const LinePoint& p) {
    return !(p.phi <= phi0 + config.c1 * p.alpha * dphi0);
  };
  auto curvature_holds = [&](const LinePoint& p) {
    return std::abs(p.dphi) <= -config.c2 * dphi0;
  };
  auto accept = [&](double alpha, Evaluation&& eval) {
    out.ok = true;
    out.alpha = alpha;
    out.eval = std::move(eval);
    return out;
  };
  auto fail = [&](std::string why) {
    out.ok = false;
    out.diagnostic = std::move(why);
    if (best) {
      out.alpha = best->first;
      out.eval = best->second;
    }
    return out;
  };

  auto zoom = [&](LinePoint lo, LinePoint hi) -> LineSearchOutcome {
    while (out.evals < config.max_line_search_evals) {
      const double left = std::min(lo.alpha, hi.alpha);
      const double right = std::max(lo.alpha, hi.alpha);
      const double width = right - left;
      if (width <= 1e-15 * right)
        return fail("line search bracket collapsed at alpha=" + std::to_string(lo.alpha));
      double a = std::isfinite(hi.phi) && std::isfinite(hi.dphi)
                     ? cubic_minimizer(lo, hi)
                     : std::numeric_limits<double>::quiet_NaN();
      if (!std::isfinite(a) || a <= left || a >= right)
        a = 0.5 * (left + right);
      else
        a = std::clamp(a, left + 0.01 * width, right - 0.01 * width);
      Evaluation eval;
      const LinePoint p = trial(a, eval);
      if (armijo_fails(p) || p.phi >= lo.phi) {
        hi = p;
      } else {
        if (curvature_holds(p)) return accept(a, std::move(eval));
        if (p.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = p;
      }
    }
    return fail("line search exceeded " + std::to_string(config.max_line_search_evals) +
                " evaluations");
  };

  LinePoint prev{0.0, phi0, dphi0};
  double alpha = alpha_init;
  for (int i = 0; out.evals < config.max_line_search_evals; ++i) {
    Evaluation eval;
    const LinePoint p = trial(alpha, eval);
    if (armijo_fails(p) || (i > 0 && p.phi >= prev.phi)) return zoom(prev, p);
    if (curvature_holds(p)) return accept(alpha, std::move(eval));
    if (p.dphi >= 0.0) return zoom(p, prev);
    double next = cubic_minimizer(prev, p);
    if (!std::isfinite(next)) next = 4.0 * alpha;
    next = std::clamp(next, 1.1 * alpha, 10.0 * alpha);
    prev = p;
    alpha = next;
  }
  return fail("line search exceeded " + std::to_string(config.max_line_search_evals) +
              " evaluations while bracketing");
}

}  // namespace detail

/// Minimizes a generic smooth objective from x_start.
template <Objective F>
OptimizationResult minimize_objective(F objective, const Eigen::VectorXd& x_start,
                                      const OptimizerConfig& config) {
  config.validate();
  OptimizationResult result;
  const Eigen::Index dim = x_start.size();
  const int restart_period = config.restart_period > 0 ? config.restart_period
                                                       : static_cast<int>(dim);

  Eigen::VectorXd x = x_start;
  Evaluation current = objective(x);
  result.evaluations = 1;
  if (!std::isfinite(current.value) || !current.gradient.allFinite())
    throw NumericalFailure("objective is not finite at the starting point");

  auto record = [&](int iter, double step) {
    const double gn = current.gradient.norm();
    result.j_history.push_back(current.value);
    result.grad_norm_history.push_back(gn);
    result.log.push_back({iter, current.value, current.j_bg, current.j_obs, gn, step});
  };
  record(0, 0.0);

  const double g0 = current.gradient.norm();
  const double target = config.rel_grad_tol * g0;
  if (g0 == 0.0) {
    result.converged = true;
    result.x0_analysis = StateVector(x);
    return result;
  }

  Eigen::VectorXd dir = -current.gradient;
  double prev_alpha = 0.0;
  double prev_slope = 0.0;
  for (int iter = 1; iter <= config.max_iters; ++iter) {
    double slope = current.gradient.dot(dir);
    bool fresh = iter == 1;
    if (!(slope < 0.0)) {
      dir = -current.gradient;
      slope = -current.gradient.squaredNorm();
      ++result.restarts;
      fresh = true;
    }
    double alpha0 = fresh ? config.initial_step / dir.norm() : prev_alpha * prev_slope / slope;
    if (!(alpha0 > 0.0) || !std::isfinite(alpha0)) alpha0 = config.initial_step / dir.norm();

    auto ls = detail::strong_wolfe_search(objective, x, dir, current.value, slope, alpha0, config);
    result.evaluations += ls.evals;
    if (!ls.ok) {
      result.diagnostic = ls.diagnostic;
      if (ls.alpha > 0.0 && ls.eval.value < current.value) {
        x += ls.alpha * dir;
        current = std::move(ls.eval);
        result.iterations = iter;
        record(iter, ls.alpha * dir.norm());
        if (current.gradient.norm() <= target) result.converged = true;
      }
      break;
    }

    x += ls.alpha * dir;
    Eigen::VectorXd g_old = current.gradient;
    current = std::move(ls.eval);
    result.iterations = iter;
    record(iter, ls.alpha * dir.norm());
    if (current.gradient.norm() <= target) {
      result.converged = true;
      break;
    }

    double beta = current.gradient.dot(current.gradient - g_old) / g_old.squaredNorm();
    if (!(beta > 0.0) || iter % restart_period == 0) beta = 0.0;
    prev_alpha = ls.alpha;
    prev_slope = slope;
    dir = -current.gradient + beta * dir;
  }
  if (!result.converged && result.diagnostic.empty())
    result.diagnostic = "reached max_iters=" + std::to_string(config.max_iters);
  result.x0_analysis = StateVector(x);
  return result;
}

/// Objective adaptor: J and its adjoint gradient for an assimilation problem.
inline auto assimilation_objective(const AssimilationProblem& problem) {
  return [&problem](const Eigen::VectorXd& x) {
    GradientReport report = gradient(StateVector(x), problem);
    return Evaluation{report.j_value, std::move(report.grad), report.cost.j_bg, report.cost.j_obs};
  };
}

/// Analysis initial condition for the problem, starting from x_start.
inline OptimizationResult minimize(const AssimilationProblem& problem, const StateVector& x_start,
                                   const OptimizerConfig& config = {}) {
  return minimize_objective(assimilation_objective(problem), x_start.values(), config);
}

inline OptimizationResult minimize(const AssimilationProblem& problem,
                                   const OptimizerConfig& config = {}) {
  return minimize(problem, problem.background.x0_bg, config);
}

struct LocalMinimumReport {
  double j_center = 0.0;
  double j_min = 0.0;
  double j_mean = 0.0;
  double j_max = 0.0;
  /// Probes whose J is strictly below J at the centre.
  int n_below = 0;
  std::vector<double> probe_values;
};

/// Samples J at points drawn uniformly from a ball around x0_analysis.
inline LocalMinimumReport verify_local_minimum(const StateVector& x0_analysis,
                                               const AssimilationProblem& problem, double radius,
                                               int n_probes, std::uint64_t seed = 0) {
  if (!(radius >= 0.0)) throw ConfigError("probe radius must be >= 0");
  if (n_probes < 1) throw ConfigError("need at least one probe");
  LocalMinimumReport report;
  report.j_center = eval_total(x0_analysis, problem).cost.total;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const Eigen::Index dim = x0_analysis.values().size();
  report.j_min = std::numeric_limits<double>::infinity();
  report.j_max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (int p = 0; p < n_probes; ++p) {
    Eigen::VectorXd dir(dim);
    for (Eigen::Index i = 0; i < dim; ++i) dir[i] = normal(rng);
    const double r = radius * std::pow(uniform(rng), 1.0 / static_cast<double>(dim));
    StateVector probe = x0_analysis;
    if (radius > 0.0) probe.values() += (r / dir.norm()) * dir;
    const double j = eval_total(probe, problem).cost.total;
    report.probe_values.push_back(j);
    report.j_min = std::min(report.j_min, j);
    report.j_max = std::max(report.j_max, j);
    sum += j;
    if (j < report.j_center) ++report.n_below;
  }
  report.j_mean = sum / n_probes;
  return report;
}

}  // namespace rijke4dvar
