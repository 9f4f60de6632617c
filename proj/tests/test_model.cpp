#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "rijke4dvar/model.hpp"

using namespace rijke4dvar;
using std::numbers::pi;

namespace {

ModelSettings settings(int n_modes) {
  ModelSettings s;
  s.n_modes = n_modes;
  return s;
}

StateVector random_state(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 0.3);
  StateVector s(n);
  for (Eigen::Index i = 0; i < s.values().size(); ++i) s.values()[i] = normal(rng);
  return s;
}

}  // namespace

TEST(HeatRelease, ZeroInputGivesZero) {
  EXPECT_EQ(heat_release(0.0, ModelParams(settings(3))), 0.0);
}

TEST(HeatRelease, UnitInputsMatchCoefficientSums) {
  ModelParams p(settings(3));
  EXPECT_NEAR(heat_release(1.0, p), 0.395, 1e-15);
  EXPECT_NEAR(heat_release(-1.0, p), -0.493, 1e-15);
}

TEST(HeatRelease, ScalesWithBeta) {
  auto s = settings(2);
  s.beta = 2.5;
  EXPECT_NEAR(heat_release(1.0, ModelParams(s)), 2.5 * 0.395, 1e-14);
}

TEST(HeatRelease, EvenPartComesFromEvenPowers) {
  ModelParams p(settings(1));
  const auto& a = p.settings().poly;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uniform(-2.0, 2.0);
  for (int i = 0; i < 50; ++i) {
    const double u = uniform(rng);
    const double expected = 2.0 * (a[1] * std::pow(u, 4) + a[3] * u * u);
    EXPECT_NEAR(heat_release(u, p) + heat_release(-u, p), expected, 1e-13);
  }
}

TEST(HeatRelease, DerivativeMatchesFiniteDifference) {
  ModelParams p(settings(1));
  for (double u : {-1.3, -0.2, 0.0, 0.4, 1.1}) {
    const double h = 1e-6;
    const double fd = (p.poly(u + h) - p.poly(u - h)) / (2 * h);
    EXPECT_NEAR(p.poly_derivative(u), fd, 1e-8);
  }
}

TEST(Damping, ModalValues) {
  ModelParams p(settings(10));
  EXPECT_NEAR(damping(1, p), 0.06, 1e-15);
  EXPECT_NEAR(damping(4, p), 0.82, 1e-15);
  EXPECT_NEAR(damping(10, p), 5.0316, 1e-4);
  EXPECT_NEAR(damping(10, p), 5.0 + 0.01 * std::sqrt(10.0), 1e-14);
}

TEST(Damping, RejectsOutOfRangeMode) {
  ModelParams p(settings(3));
  EXPECT_THROW(damping(0, p), std::out_of_range);
  EXPECT_THROW(damping(4, p), std::out_of_range);
}

TEST(ModelParams, RejectsInvalidSettings) {
  auto bad = settings(0);
  EXPECT_THROW(ModelParams{bad}, ConfigError);
  bad = settings(2);
  bad.tau = 0.0;
  EXPECT_THROW(ModelParams{bad}, ConfigError);
  bad = settings(2);
  bad.x_f = 1.0;
  EXPECT_THROW(ModelParams{bad}, ConfigError);
  bad = settings(2);
  bad.beta = std::nan("");
  EXPECT_THROW(ModelParams{bad}, ConfigError);
}

TEST(ModelParams, DerivedArraysFollowSettings) {
  ModelParams p(settings(4));
  for (int j = 1; j <= 4; ++j) {
    EXPECT_DOUBLE_EQ(p.sin_f()[j - 1], std::sin(j * pi * 0.3));
    EXPECT_DOUBLE_EQ(p.cos_f()[j - 1], std::cos(j * pi * 0.3));
    EXPECT_DOUBLE_EQ(p.wavenumber()[j - 1], j * pi);
  }
}

TEST(StateVector, LayoutAndValidation) {
  Eigen::VectorXd eta(2), eta_dot(2);
  eta << 1, 2;
  eta_dot << 3, 4;
  const auto s = StateVector::from_modes(eta, eta_dot);
  EXPECT_EQ(s.n_modes(), 2);
  EXPECT_EQ(s.values()[0], 1);
  EXPECT_EQ(s.values()[3], 4);
  EXPECT_THROW(StateVector(Eigen::VectorXd::Zero(3)), ConfigError);
}

TEST(Rhs, UndampedOscillatorComponents) {
  auto s = settings(1);
  s.c1 = s.c2 = 0.0;
  ModelParams p(s);
  StateVector x(1);
  x.eta()[0] = 1.0;
  auto r = rhs(0.0, x, 0.0, p);
  EXPECT_EQ(r.eta()[0], 0.0);
  EXPECT_NEAR(r.eta_dot()[0], -pi, 1e-15);

  StateVector y(1);
  y.eta_dot()[0] = 1.0;
  r = rhs(0.0, y, 0.0, p);
  EXPECT_NEAR(r.eta()[0], pi, 1e-15);
}

TEST(Rhs, DelayedForcingAfterTau) {
  ModelParams p(settings(3));
  const StateVector zero(3);
  const auto r = rhs(0.02, zero, 1.0, p);
  EXPECT_NEAR(r.eta_dot()[0], -2.0 * std::sin(0.3 * pi) * 0.395, 1e-15);
  EXPECT_NEAR(r.eta_dot()[0], -0.6391, 1e-4);
  EXPECT_NEAR(r.eta_dot()[1], -2.0 * std::sin(0.6 * pi) * 0.395, 1e-15);
}

TEST(Rhs, ForcingOffBeforeTau) {
  ModelParams p(settings(3));
  const StateVector zero(3);
  const auto r = rhs(0.019, zero, 1.0, p);
  EXPECT_TRUE(r.values().isZero(0.0));
}

TEST(Rhs, EnergyConservedWithoutDampingOrForcing) {
  auto s = settings(10);
  s.beta = 0.0;
  s.c1 = s.c2 = 0.0;
  ModelParams p(s);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto x = random_state(10, rng);
    const auto r = rhs(1.0, x, 0.7, p);
    // grad E = x for E = 1/2 |x|^2
    EXPECT_LE(std::abs(x.values().dot(r.values())), 1e-12);
  }
}

TEST(Rhs, LinearInStateForFixedDelayedInput) {
  ModelParams p(settings(5));
  std::mt19937_64 rng(11);
  const StateVector zero(5);
  for (int i = 0; i < 10; ++i) {
    const auto x1 = random_state(5, rng);
    const auto x2 = random_state(5, rng);
    const double alpha = 1.7;
    const double u = 0.3;
    const Eigen::VectorXd forcing = rhs(1.0, zero, u, p).values();
    const Eigen::VectorXd lhs =
        rhs(1.0, StateVector(Eigen::VectorXd(alpha * x1.values() + x2.values())), u, p).values() - forcing;
    const Eigen::VectorXd rhs_sum =
        alpha * (rhs(1.0, x1, u, p).values() - forcing) + (rhs(1.0, x2, u, p).values() - forcing);
    EXPECT_LE((lhs - rhs_sum).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(Reconstruct, VelocityExamples) {
  StateVector s(3);
  s.eta()[0] = 1.0;
  EXPECT_NEAR(reconstruct_velocity(s, 0.0), 1.0, 1e-15);
  EXPECT_NEAR(reconstruct_velocity(s, 0.3), 0.58779, 1e-5);
  EXPECT_EQ(reconstruct_velocity(StateVector(3), 0.42), 0.0);
}

TEST(Reconstruct, PressureExamplesAndOpenEnds) {
  StateVector s(3);
  s.eta_dot()[0] = 1.0;
  EXPECT_NEAR(reconstruct_pressure(s, 0.8), 0.58779, 1e-5);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10; ++i) {
    const auto x = random_state(6, rng);
    EXPECT_EQ(reconstruct_pressure(x, 0.0), 0.0);
    EXPECT_LE(std::abs(reconstruct_pressure(x, 1.0)), 1e-14);
  }
}

TEST(Reconstruct, FlameVelocityUsesCosines) {
  ModelParams p(settings(4));
  std::mt19937_64 rng(9);
  const auto x = random_state(4, rng);
  EXPECT_NEAR(flame_velocity(x.values(), p), reconstruct_velocity(x, 0.3), 1e-14);
}

TEST(Energy, ModalEnergyIsSumOfSquares) {
  StateVector s(2);
  s.values() << 1, 2, 3, 4;
  const auto e = modal_energy(s);
  EXPECT_DOUBLE_EQ(e[0], 10.0);
  EXPECT_DOUBLE_EQ(e[1], 20.0);
  EXPECT_DOUBLE_EQ(acoustic_energy(s), 15.0);
}
