#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "rijke4dvar/cost.hpp"

using namespace rijke4dvar;
using std::numbers::pi;

namespace {

constexpr double kVar = 0.005 * 0.005;

StateVector random_state(int n, std::mt19937_64& rng, double sd = 0.05) {
  std::normal_distribution<double> normal(0.0, sd);
  StateVector s(n);
  for (Eigen::Index i = 0; i < s.values().size(); ++i) s.values()[i] = normal(rng);
  return s;
}

ModelParams params(int n) {
  ModelSettings s;
  s.n_modes = n;
  return ModelParams(s);
}

/// Noise-free observations of the trajectory from x0 at every `stride` nodes.
ObservationSet observe(const Trajectory& traj, ObservationKind kind, double x_m, std::size_t stride) {
  ObservationSet obs;
  obs.kind = kind;
  obs.x_m = x_m;
  for (std::size_t k = stride; k <= traj.n_steps(); k += stride)
    obs.records.push_back({traj.time(k), measure(traj.state(k), kind, x_m)});
  return obs;
}

}  // namespace

TEST(Measure, ZeroStateAndSingleMode) {
  EXPECT_EQ(measure(StateVector(3), ObservationKind::PressurePoint, 0.8)[0], 0.0);
  EXPECT_TRUE(measure(StateVector(3), ObservationKind::PressureModes, 0.8).isZero(0.0));
  StateVector s(3);
  s.eta_dot()[0] = 1.0;
  EXPECT_NEAR(measure(s, ObservationKind::PressurePoint, 0.8)[0], 0.58779, 1e-5);
}

TEST(Measure, Linear) {
  std::mt19937_64 rng(1);
  for (auto kind : {ObservationKind::PressurePoint, ObservationKind::PressureModes}) {
    const auto x1 = random_state(5, rng);
    const auto x2 = random_state(5, rng);
    const StateVector combo(Eigen::VectorXd(2.0 * x1.values() + x2.values()));
    const Eigen::VectorXd expected = 2.0 * measure(x1, kind, 0.8) + measure(x2, kind, 0.8);
    EXPECT_LE((measure(combo, kind, 0.8) - expected).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(BackgroundCost, ZeroAtBackground) {
  std::mt19937_64 rng(2);
  const auto x = random_state(4, rng);
  for (auto kind : {BackgroundKind::PressurePoint, BackgroundKind::PressureModes, BackgroundKind::FullState})
    EXPECT_EQ(eval_j_bg(x, {kind, x, 0.8}, {kVar, kVar}), 0.0);
}

TEST(BackgroundCost, FullStateSingleComponent) {
  StateVector bg(3), x(3);
  x.eta()[0] = 0.01;
  EXPECT_NEAR(eval_j_bg(x, {BackgroundKind::FullState, bg, 0.8}, {kVar, kVar}), 2.0, 1e-12);
}

TEST(BackgroundCost, PointAndModeForms) {
  StateVector bg(2), x(2);
  x.eta_dot() << 0.01, -0.02;
  const double s1 = std::sin(pi * 0.8), s2 = std::sin(2 * pi * 0.8);
  const double point = std::pow(0.01 * s1 - 0.02 * s2, 2) / (2 * kVar);
  const double modes = (std::pow(0.01 * s1, 2) + std::pow(0.02 * s2, 2)) / (2 * kVar);
  EXPECT_NEAR(eval_j_bg(x, {BackgroundKind::PressurePoint, bg, 0.8}, {kVar, kVar}), point, 1e-12);
  EXPECT_NEAR(eval_j_bg(x, {BackgroundKind::PressureModes, bg, 0.8}, {kVar, kVar}), modes, 1e-12);
  // velocity modes are invisible to kinds a and b
  x.eta() << 3.0, 4.0;
  EXPECT_NEAR(eval_j_bg(x, {BackgroundKind::PressureModes, bg, 0.8}, {kVar, kVar}), modes, 1e-12);
}

TEST(BackgroundCost, DoublingVarianceHalvesValue) {
  std::mt19937_64 rng(3);
  const auto bg = random_state(4, rng);
  const auto x = random_state(4, rng);
  for (auto kind : {BackgroundKind::PressurePoint, BackgroundKind::PressureModes, BackgroundKind::FullState}) {
    const double j1 = eval_j_bg(x, {kind, bg, 0.8}, {kVar, kVar});
    const double j2 = eval_j_bg(x, {kind, bg, 0.8}, {2 * kVar, kVar});
    EXPECT_NEAR(j2, 0.5 * j1, 1e-12 * j1);
  }
}

TEST(BackgroundCost, GradientMatchesFiniteDifference) {
  std::mt19937_64 rng(4);
  const auto bg = random_state(3, rng);
  const auto x = random_state(3, rng);
  for (auto kind : {BackgroundKind::PressurePoint, BackgroundKind::PressureModes, BackgroundKind::FullState}) {
    const BackgroundSpec spec{kind, bg, 0.8};
    const Eigen::VectorXd g = background_gradient(x, spec, {kVar, kVar});
    for (Eigen::Index i = 0; i < 6; ++i) {
      StateVector plus = x, minus = x;
      plus.values()[i] += 1e-7;
      minus.values()[i] -= 1e-7;
      const double fd = (eval_j_bg(plus, spec, {kVar, kVar}) - eval_j_bg(minus, spec, {kVar, kVar})) / 2e-7;
      EXPECT_NEAR(g[i], fd, 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(ObservationCost, ZeroForSelfConsistentObservations) {
  const auto p = params(4);
  std::mt19937_64 rng(5);
  const auto traj = integrate(random_state(4, rng), p, {1e-3, 0.4});
  for (auto kind : {ObservationKind::PressurePoint, ObservationKind::PressureModes})
    EXPECT_EQ(eval_j_obs(traj, observe(traj, kind, 0.8, 20), {kVar, kVar}), 0.0);
}

TEST(ObservationCost, SingleScalarMismatch) {
  const auto p = params(2);
  const auto traj = integrate(StateVector(2), p, {1e-3, 0.1});
  ObservationSet obs;
  obs.records.push_back({0.05, Eigen::VectorXd::Constant(1, 0.005)});
  EXPECT_NEAR(eval_j_obs(traj, obs, {kVar, kVar}), 0.5, 1e-12);
}

TEST(ObservationCost, ModeWeightedResidual) {
  const auto p = params(2);
  const auto traj = integrate(StateVector(2), p, {1e-3, 0.1});
  ObservationSet obs;
  obs.kind = ObservationKind::PressureModes;
  Eigen::VectorXd v(2);
  v << 0.01, 0.02;
  obs.records.push_back({0.1, v});
  const double s1 = std::sin(pi * 0.8), s2 = std::sin(2 * pi * 0.8);
  const double expected = (std::pow(0.01 * s1, 2) + std::pow(0.02 * s2, 2)) / (2 * kVar);
  EXPECT_NEAR(eval_j_obs(traj, obs, {kVar, kVar}), expected, 1e-12);
}

TEST(ObservationCost, AdditiveOverObservationSets) {
  const auto p = params(3);
  std::mt19937_64 rng(6);
  const auto truth = integrate(random_state(3, rng), p, {1e-3, 0.4});
  const auto model = integrate(random_state(3, rng), p, {1e-3, 0.4});
  const auto all = observe(truth, ObservationKind::PressurePoint, 0.8, 10);
  ObservationSet a = all, b = all;
  a.records.assign(all.records.begin(), all.records.begin() + 17);
  b.records.assign(all.records.begin() + 17, all.records.end());
  const double whole = eval_j_obs(model, all, {kVar, kVar});
  EXPECT_NEAR(whole, eval_j_obs(model, a, {kVar, kVar}) + eval_j_obs(model, b, {kVar, kVar}), 1e-10 * whole);
}

TEST(ObservationCost, SubWindowTermsSumToTotal) {
  // Each J_obs,i evaluated on a window ending at its own observation time.
  const auto p = params(3);
  std::mt19937_64 rng(7);
  const auto x0 = random_state(3, rng);
  const auto truth = integrate(random_state(3, rng), p, {1e-3, 0.4});
  const auto obs = observe(truth, ObservationKind::PressureModes, 0.8, 40);
  const auto full = eval_total(x0, {BackgroundKind::PressureModes, x0, 0.8}, obs, {kVar, kVar}, p, {1e-3, 0.4});
  double sum = 0.0;
  for (const auto& rec : obs.records) {
    ObservationSet one = obs;
    one.records = {rec};
    sum += eval_total(x0, {BackgroundKind::PressureModes, x0, 0.8}, one, {kVar, kVar}, p, {1e-3, rec.t}).cost.j_obs;
  }
  EXPECT_NEAR(full.cost.j_obs, sum, 1e-10 * full.cost.j_obs);
}

TEST(ObservationCost, ModesAtPressureNodesAreInvisible) {
  // sin(j pi 0.5) = 0 for even j.
  const auto p = params(4);
  std::mt19937_64 rng(8);
  const auto x = random_state(4, rng);
  const auto traj = integrate(x, p, {1e-3, 0.2});
  auto obs = observe(traj, ObservationKind::PressureModes, 0.5, 50);
  for (auto& rec : obs.records) {
    rec.value[1] += 1.0;
    rec.value[3] -= 2.0;
  }
  EXPECT_LE(eval_j_obs(traj, obs, {kVar, kVar}), 1e-20);
}

TEST(ObservationCost, QuadraticScaling) {
  const auto p = params(3);
  const auto traj = integrate(StateVector(3), p, {1e-3, 0.2});
  ObservationSet obs;
  obs.records = {{0.1, Eigen::VectorXd::Constant(1, 0.003)}, {0.2, Eigen::VectorXd::Constant(1, -0.001)}};
  const double j1 = eval_j_obs(traj, obs, {kVar, kVar});
  for (auto& r : obs.records) r.value *= 3.0;
  EXPECT_NEAR(eval_j_obs(traj, obs, {kVar, kVar}), 9.0 * j1, 1e-12 * j1);
}

TEST(ObservationCost, RejectsBadTimes) {
  const auto p = params(2);
  const auto traj = integrate(StateVector(2), p, {1e-3, 0.1});
  ObservationSet obs;
  obs.records = {{0.0505, Eigen::VectorXd::Zero(1)}};
  EXPECT_THROW(eval_j_obs(traj, obs, {kVar, kVar}), ConfigError);
  obs.records = {{0.2, Eigen::VectorXd::Zero(1)}};
  EXPECT_THROW(eval_j_obs(traj, obs, {kVar, kVar}), ConfigError);
  obs.records = {{0.05, Eigen::VectorXd::Zero(1)}, {0.05, Eigen::VectorXd::Zero(1)}};
  EXPECT_THROW(eval_j_obs(traj, obs, {kVar, kVar}), ConfigError);
  obs.records = {{0.05, Eigen::VectorXd::Zero(2)}};
  EXPECT_THROW(eval_j_obs(traj, obs, {kVar, kVar}), ConfigError);
}

TEST(TotalCost, ZeroAtTruthAndNonNegative) {
  const auto p = params(3);
  std::mt19937_64 rng(9);
  const auto x0 = random_state(3, rng);
  const auto obs = observe(integrate(x0, p, {1e-3, 0.4}), ObservationKind::PressurePoint, 0.8, 4);
  const BackgroundSpec bg{BackgroundKind::PressurePoint, x0, 0.8};
  EXPECT_EQ(eval_total(x0, bg, obs, {kVar, kVar}, p, {1e-3, 0.4}).cost.total, 0.0);
  for (int i = 0; i < 10; ++i)
    EXPECT_GE(eval_total(random_state(3, rng), bg, obs, {kVar, kVar}, p, {1e-3, 0.4}).cost.total, 0.0);
}

TEST(TotalCost, IncreasesAwayFromNoiseFreeOptimum) {
  const auto p = params(3);
  std::mt19937_64 rng(10);
  const auto x0 = random_state(3, rng);
  const auto obs = observe(integrate(x0, p, {1e-3, 0.4}), ObservationKind::PressureModes, 0.8, 4);
  const BackgroundSpec bg{BackgroundKind::FullState, x0, 0.8};
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd d(6);
    for (auto& v : d) v = normal(rng);
    d.normalize();
    double previous = 0.0;
    for (double eps : {1e-4, 1e-3, 1e-2}) {
      const StateVector x(Eigen::VectorXd(x0.values() + eps * d));
      const double j = eval_total(x, bg, obs, {kVar, kVar}, p, {1e-3, 0.4}).cost.total;
      EXPECT_GT(j, previous);
      previous = j;
    }
  }
}

TEST(TotalCost, FlagsMixedPairing) {
  const auto p = params(2);
  ObservationSet obs;
  obs.records = {{0.1, Eigen::VectorXd::Zero(1)}};
  const StateVector x(2);
  EXPECT_TRUE(eval_total(x, {BackgroundKind::PressurePoint, x, 0.8}, obs, {kVar, kVar}, p, {1e-3, 0.1}).consistent_pairing);
  EXPECT_FALSE(eval_total(x, {BackgroundKind::FullState, x, 0.8}, obs, {kVar, kVar}, p, {1e-3, 0.1}).consistent_pairing);
}

TEST(Covariance, RejectsNonPositive) {
  EXPECT_THROW((CovarianceSpec{0.0, 1.0}.validate()), ConfigError);
  EXPECT_THROW((CovarianceSpec{1.0, -1.0}.validate()), ConfigError);
}

TEST(Kinds, ParseAndPrint) {
  EXPECT_EQ(parse_background_kind("c"), BackgroundKind::FullState);
  EXPECT_EQ(parse_observation_kind("modes"), ObservationKind::PressureModes);
  EXPECT_FALSE(parse_background_kind("z").has_value());
  EXPECT_EQ(to_string(BackgroundKind::PressureModes), "b");
  EXPECT_TRUE(pairing_is_consistent(BackgroundKind::PressureModes, ObservationKind::PressureModes));
  EXPECT_FALSE(pairing_is_consistent(BackgroundKind::PressurePoint, ObservationKind::PressureModes));
}
