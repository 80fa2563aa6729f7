// Copyright 2026 The rarl-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rarl/envs.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rarl;

TEST(Pendulum, NominalConfiguration) {
  auto p = pendulum_defaults();
  p.adversary_force_cap = 0.0;
  InvertedPendulum env(p);
  EXPECT_EQ(env.spec().obs_dim, 4);
  EXPECT_EQ(env.spec().act1_dim, 1);
  EXPECT_EQ(env.spec().act2_dim, 2);
  EXPECT_EQ(env.spec().horizon, 1000);
  EXPECT_DOUBLE_EQ(env.params().mass, 4.89);
  EXPECT_EQ(env.spec().act2_hi.norm(), 0.0);
  // observation scale: termination bounds for positions, one for velocities
  EXPECT_EQ(env.spec().obs_scale, (Vector(4) << 2.4, 1.0, 0.2, 1.0).finished());
}

TEST(Pendulum, UprightEquilibriumIsExact) {
  const auto p = pendulum_defaults();
  Vector s = Vector::Zero(4);
  for (int t = 0; t < 1000; ++t) s = pendulum::integrate(p, s, 0.0, 0.0, 0.0);
  EXPECT_EQ(s[2], 0.0);
  EXPECT_EQ(s.norm(), 0.0);
}

TEST(Pendulum, ConstantLateralPushTopplesPole) {
  const auto p = pendulum_defaults();
  InvertedPendulum env(p);
  env.reset(0);
  Vector a2(2);
  a2 << p.adversary_force_cap, 0.0;
  int steps = 0;
  bool ended = false;
  while (!ended && steps < p.horizon) {
    ended = env.step(Vector::Zero(1), a2).terminal;
    ++steps;
  }
  EXPECT_TRUE(ended);
  EXPECT_LT(steps, p.horizon);
}

TEST(Pendulum, ZeroActionProtagonistFails) {
  auto p = pendulum_defaults();
  p.adversary_force_cap = 0.0;
  InvertedPendulum env(p);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    env.reset(seed);
    int t = 0;
    while (!env.step(Vector::Zero(1), Vector::Zero(2)).terminal) ++t;
    EXPECT_LT(t, 200);
  }
}

TEST(Pendulum, EnergyDriftWithoutForces) {
  // small oscillation about the hanging position; no termination applies here
  auto p = pendulum_defaults();
  p.dt = 0.01;
  Vector s = Vector::Zero(4);
  s[2] = M_PI - 0.05;
  const double e0 = pendulum::energy(p, s);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    s = pendulum::integrate(p, s, 0.0, 0.0, 0.0);
    worst = std::max(worst, std::abs(pendulum::energy(p, s) - e0) / std::abs(e0));
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(Pendulum, EnergyErrorIsFirstOrderInDt) {
  // large swings: the error is not bounded by 1e-3 at dt=0.01 but shrinks
  // linearly with the step, so the equations of motion conserve energy
  auto drift = [](double dt) {
    auto p = pendulum_defaults();
    p.dt = dt;
    Vector s = Vector::Zero(4);
    s[2] = M_PI - 0.3;
    const double e0 = pendulum::energy(p, s);
    double worst = 0.0;
    for (int t = 0; t < static_cast<int>(5.0 / dt); ++t) {
      s = pendulum::integrate(p, s, 0.0, 0.0, 0.0);
      worst = std::max(worst, std::abs(pendulum::energy(p, s) - e0));
    }
    return worst;
  };
  const double coarse = drift(1e-3), fine = drift(1e-4);
  EXPECT_GT(coarse / fine, 7.0);
  EXPECT_LT(coarse / fine, 13.0);
}

TEST(Pendulum, VerticalForceOnUprightPoleDoesNothing) {
  const auto p = pendulum_defaults();
  Vector s = Vector::Zero(4);
  const Vector n = pendulum::integrate(p, s, 0.0, 0.0, 5.0);
  EXPECT_EQ(n.norm(), 0.0);
}

TEST(Pendulum, AdversaryForceMatchesFiniteDifferenceOfWork) {
  // generalized forces of a point force at the center of mass: Q = J^T f
  const auto p = pendulum_defaults();
  Vector s(4);
  s << 0.1, 0.2, 0.15, -0.3;
  const double fx = 1.3, fy = -0.7;
  const Eigen::Vector2d with = pendulum::accelerations(p, s, 0.0, fx, fy);
  const Eigen::Vector2d without = pendulum::accelerations(p, s, 0.0, 0.0, 0.0);
  const double m = p.mass, l = p.pole_half_length, c = std::cos(s[2]);
  Eigen::Matrix2d mm;
  mm << p.mass_cart + m, m * l * c, m * l * c, 4.0 / 3.0 * m * l * l;
  // com position (x + l sin th, l cos th)
  const double h = 1e-6;
  auto com = [&](double x, double th) { return Eigen::Vector2d(x + l * std::sin(th), l * std::cos(th)); };
  const Eigen::Vector2d f(fx, fy);
  const double qx = f.dot((com(s[0] + h, s[2]) - com(s[0] - h, s[2])) / (2 * h));
  const double qt = f.dot((com(s[0], s[2] + h) - com(s[0], s[2] - h)) / (2 * h));
  const Eigen::Vector2d expect = mm.inverse() * Eigen::Vector2d(qx, qt);
  EXPECT_NEAR((with - without - expect).norm(), 0.0, 1e-8);
}

TEST(Pendulum, CapZeroIgnoresAdversary) {
  auto p = pendulum_defaults();
  p.adversary_force_cap = 0.0;
  InvertedPendulum a(p), b(p);
  a.reset(3);
  b.reset(3);
  Rng rng(1);
  for (int t = 0; t < 30; ++t) {
    Vector u(1), d(2);
    u << rng.normal();
    d << 10 * rng.normal(), 10 * rng.normal();
    const auto ra = a.step(u, d);
    const auto rb = b.step(u, Vector::Zero(2));
    ASSERT_EQ(ra.next_state, rb.next_state);
    if (ra.terminal) break;
  }
}

TEST(Slider, FrictionlessClosedForm) {
  auto p = slider_defaults();
  p.friction = 0.0;
  p.adversary_force_cap = 0.0;
  FrictionSlider env(p);
  const Vector s0 = env.reset(5);
  const double force = 2.5;
  Vector u(1);
  u << force;
  StepResult r;
  double x = s0[0];
  for (int n = 1; n <= 100; ++n) {
    r = env.step(u, Vector::Zero(1));
    const double v = n * p.dt * force / p.mass;
    x += p.dt * v;
    EXPECT_NEAR(r.next_state[1], v, 1e-12 * std::max(1.0, v));
    EXPECT_NEAR(r.next_state[0], x, 1e-10);
  }
}

TEST(Slider, StaticsGiveZeroReward) {
  FrictionSlider env(slider_defaults());
  env.reset(0);
  for (int t = 0; t < 50; ++t) {
    const auto r = env.step(Vector::Zero(1), Vector::Zero(1));
    EXPECT_EQ(r.reward1, 0.0);
  }
}

TEST(Slider, NeverTerminatesEarly) {
  const auto p = slider_defaults();
  FrictionSlider env(p);
  env.reset(0);
  Vector u(1);
  u << 100.0;
  int t = 0;
  StepResult r;
  do {
    r = env.step(u, -u);
    ++t;
  } while (!r.truncated && !r.terminal);
  EXPECT_EQ(t, p.horizon);
  EXPECT_FALSE(r.terminal);
}

TEST(Slider, CoulombFrictionHoldsSmallForces) {
  auto p = slider_defaults();
  p.friction = 0.5;
  Vector s = Vector::Zero(2);
  // below the static threshold mu m g the body must not move
  const double f = 0.9 * p.friction * p.mass * p.gravity;
  for (int t = 0; t < 20; ++t) s = slider::integrate(p, s, f, 0.0);
  EXPECT_EQ(s[1], 0.0);
  EXPECT_EQ(s[0], 0.0);
}

TEST(Slider, CapZeroIgnoresAdversary) {
  auto p = slider_defaults();
  p.adversary_force_cap = 0.0;
  FrictionSlider a(p), b(p);
  a.reset(2);
  b.reset(2);
  Vector u(1);
  u << 1.7;
  for (int t = 0; t < 40; ++t) {
    Vector d(1);
    d << 100.0 * std::sin(t);
    EXPECT_EQ(a.step(u, d).next_state, b.step(u, Vector::Zero(1)).next_state);
  }
}

TEST(Slider, MoreFrictionSlowerTerminalSpeed) {
  double prev = std::numeric_limits<double>::infinity();
  for (double mu : {0.0, 0.05, 0.1, 0.2, 0.4}) {
    auto p = slider_defaults();
    p.friction = mu;
    Vector s = Vector::Zero(2);
    for (int t = 0; t < 400; ++t) s = slider::integrate(p, s, 20.0, 0.0);
    EXPECT_LT(s[1], prev);
    prev = s[1];
  }
}

TEST(Physics, EqualParamsGiveEqualTrajectories) {
  auto p = slider_defaults();
  p.mass = 2.2;
  p.friction = 0.3;
  FrictionSlider a(p), b(p);
  a.reset(9);
  b.reset(9);
  for (int t = 0; t < 30; ++t) {
    Vector u(1), d(1);
    u << std::cos(t);
    d << std::sin(t);
    EXPECT_EQ(a.step(u, d).next_state, b.step(u, d).next_state);
  }
}

TEST(Physics, InvalidParamsRejected) {
  auto p = pendulum_defaults();
  p.mass = -1.0;
  EXPECT_THROW(InvertedPendulum{p}, std::invalid_argument);
  p = slider_defaults();
  p.friction = -0.1;
  EXPECT_THROW(FrictionSlider{p}, std::invalid_argument);
  p = slider_defaults();
  p.dt = 0.0;
  EXPECT_THROW(make_env("slider", p), std::invalid_argument);
  EXPECT_THROW(make_env("hopper", slider_defaults()), std::invalid_argument);
}

TEST(TabularGameGen, SameSeedSameTables) {
  const auto a = make_tabular_game(7, 5, 3, 3);
  const auto b = make_tabular_game(7, 5, 3, 3);
  for (int s = 0; s < 5; ++s) EXPECT_EQ(a.reward[s], b.reward[s]);
  for (std::size_t k = 0; k < a.transition.size(); ++k) EXPECT_EQ(a.transition[k], b.transition[k]);
  const auto c = make_tabular_game(8, 5, 3, 3);
  EXPECT_NE(a.reward[0], c.reward[0]);
}

TEST(TabularGameGen, RowsAreDistributions) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = make_tabular_game(seed, 6, 3, 2);
    for (const auto& p : g.transition) {
      EXPECT_NEAR(p.sum(), 1.0, 1e-12);
      EXPECT_GE(p.minCoeff(), 0.0);
      EXPECT_LE((p.array() > 0.0).count(), 3);
    }
    for (const auto& r : g.reward) {
      EXPECT_GE(r.minCoeff(), -1.0);
      EXPECT_LE(r.maxCoeff(), 1.0);
    }
  }
}

TEST(TabularGameGen, SwapIsAnInvolution) {
  const auto g = make_tabular_game(4, 3, 2, 4);
  const auto back = g.swapped().swapped();
  for (int s = 0; s < 3; ++s) EXPECT_EQ(back.reward[s], g.reward[s]);
  for (std::size_t k = 0; k < g.transition.size(); ++k) EXPECT_EQ(back.transition[k], g.transition[k]);
  EXPECT_EQ(g.swapped().reward[1](3, 1), -g.reward[1](1, 3));
}

TEST(TabularEnv, ObservationsAreOneHotStates) {
  const auto g = make_tabular_game(2, 5, 3, 3);
  TabularGameEnv env(g, 60);
  Vector s = env.reset(3);
  Rng rng(0);
  for (int t = 0; t < 60; ++t) {
    EXPECT_EQ(s.sum(), 1.0);
    EXPECT_EQ(s.maxCoeff(), 1.0);
    Vector a1(1), a2(1);
    a1 << static_cast<double>(rng.below(3));
    a2 << static_cast<double>(rng.below(3));
    const auto r = env.step(a1, a2);
    EXPECT_EQ(r.reward1, g.reward[TabularGameEnv::state_index(s)](static_cast<int>(a1[0]), static_cast<int>(a2[0])));
    s = r.next_state;
    if (r.truncated) break;
  }
}

TEST(TabularEnv, EmpiricalTransitionsMatchKernel) {
  const auto g = make_tabular_game(11, 3, 2, 2);
  TabularGameEnv env(g, 1);
  Vector a1(1), a2(1);
  a1 << 1.0;
  a2 << 0.0;
  Vector counts = Vector::Zero(3);
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    env.reset(static_cast<std::uint64_t>(k));
    counts[TabularGameEnv::state_index(env.step(a1, a2).next_state)] += 1.0;
  }
  const Vector& p = g.next_distribution(g.start_state, 1, 0);
  for (int s = 0; s < 3; ++s) EXPECT_NEAR(counts[s] / n, p[s], 4.0 * std::sqrt(0.25 / n));
}

TEST(Slider, PolicyInputScale) {
  FrictionSlider env(slider_defaults());
  EXPECT_EQ(env.spec().obs_scale, (Vector(2) << slider::kPositionScale, 1.0).finished());
  EXPECT_NO_THROW(env.spec().validate());
}
