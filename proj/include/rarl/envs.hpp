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

#pragma once

#include "rarl/env.hpp"

#include <memory>
#include <string>
#include <vector>

namespace rarl {

/// Physical knobs varied between training and test conditions.
struct EnvPhysicsParams {
  /// Pole mass (pendulum) or body mass (slider), kg.
  double mass = 4.89;
  /// Cart mass, kg. Pendulum only.
  double mass_cart = 1.0;
  /// Half length of the pole, m. Pendulum only.
  double pole_half_length = 0.5;
  /// Dimensionless friction coefficient. Slider only.
  double friction = 0.0;
  double gravity = 9.81;
  double dt = 0.02;
  double adversary_force_cap = 2.0;
  double protagonist_force_cap = 10.0;
  int horizon = 1000;
  double discount = 0.995;

  void validate() const;
};

EnvPhysicsParams pendulum_defaults();
EnvPhysicsParams slider_defaults();

namespace pendulum {

// Termination thresholds and the half-width of the initial-state box.
inline constexpr double kThetaLimit = 0.2;
inline constexpr double kXLimit = 2.4;
inline constexpr double kInitBox = 0.05;

/// Accelerations (x_ddot, theta_ddot) of the cart-pole with a cart force and
/// an external force (fx, fy) applied at the pole's center of mass. State
/// layout: [x, x_dot, theta, theta_dot], theta = 0 upright.
Eigen::Vector2d accelerations(const EnvPhysicsParams& p, const Vector& state, double cart_force, double fx,
                              double fy);

/// One semi-implicit Euler step of the unconstrained dynamics.
Vector integrate(const EnvPhysicsParams& p, const Vector& state, double cart_force, double fx, double fy);

/// Total mechanical energy (kinetic + gravitational, pivot height as zero).
double energy(const EnvPhysicsParams& p, const Vector& state);

}  // namespace pendulum

namespace slider {

/// Viscous drag per unit friction coefficient, N s / m.
inline constexpr double kViscousPerFriction = 10.0;
inline constexpr double kControlCost = 0.01;
inline constexpr double kInitBox = 0.05;
// Policy input scale for position, m. Velocities stay unscaled.
inline constexpr double kPositionScale = 100.0;

/// One step of m v' = F - mu (m g sign(v) + k v) with sticking Coulomb friction.
Vector integrate(const EnvPhysicsParams& p, const Vector& state, double drive_force, double adversary_force);

}  // namespace slider

/// Cart-pole whose adversary pushes on the pole's center of mass in 2D.
/// obs = [x, x_dot, theta, theta_dot]; a1 = [cart force]; a2 = [fx, fy].
/// Reward +1 for every step that ends inside |theta| < 0.2, |x| < 2.4;
/// leaving that region ends the episode with reward 0.
class InvertedPendulum final : public Environment {
 public:
  explicit InvertedPendulum(const EnvPhysicsParams& params);
  const EnvPhysicsParams& params() const { return params_; }
  std::unique_ptr<Environment> clone() const override;

 protected:
  Vector initial_state(Rng& rng) override;
  Transition transition(const Vector& state, const Vector& a1, const Vector& a2, Rng& rng) override;

 private:
  EnvPhysicsParams params_;
};

/// Point mass on a rail with Coulomb and viscous friction.
/// obs = [x, v]; a1 = [drive force]; a2 = [horizontal force].
/// Reward v - 0.01 * a1^2 on the clamped drive force; never terminates early.
class FrictionSlider final : public Environment {
 public:
  explicit FrictionSlider(const EnvPhysicsParams& params);
  const EnvPhysicsParams& params() const { return params_; }
  std::unique_ptr<Environment> clone() const override;

 protected:
  Vector initial_state(Rng& rng) override;
  Transition transition(const Vector& state, const Vector& a1, const Vector& a2, Rng& rng) override;

 private:
  EnvPhysicsParams params_;
};

/// Finite two-player zero-sum discounted Markov game.
struct TabularGame {
  int n_states = 0;
  int n_actions1 = 0;
  int n_actions2 = 0;
  /// reward[s](a1, a2), paid to the row player (protagonist).
  std::vector<Matrix> reward;
  /// transition[(s * n_actions1 + a1) * n_actions2 + a2] is a distribution over next states.
  std::vector<Vector> transition;
  int start_state = 0;
  double discount = 0.95;

  const Vector& next_distribution(int s, int a1, int a2) const {
    return transition[static_cast<std::size_t>((s * n_actions1 + a1) * n_actions2 + a2)];
  }
  double reward_range() const;
  /// Throws std::invalid_argument if shapes or probabilities are inconsistent.
  void validate() const;
  /// Same game seen from the other player: rewards negated and transposed.
  TabularGame swapped() const;
};

TabularGame make_tabular_game(std::uint64_t seed, int n_states, int n_actions1, int n_actions2,
                              double discount = 0.95);

/// Environment wrapper of a TabularGame. Observations are one-hot state
/// encodings; actions are single coordinates holding the action index, which
/// is clamped into range and rounded to the nearest integer.
class TabularGameEnv final : public Environment {
 public:
  TabularGameEnv(TabularGame game, int horizon);
  const TabularGame& game() const { return game_; }
  std::unique_ptr<Environment> clone() const override;

  static int state_index(const Vector& observation);
  Vector one_hot(int s) const;

 protected:
  Vector initial_state(Rng& rng) override;
  Transition transition(const Vector& state, const Vector& a1, const Vector& a2, Rng& rng) override;

 private:
  TabularGame game_;
};

/// Builds "pendulum" or "slider" from physics params.
std::unique_ptr<Environment> make_env(const std::string& name, const EnvPhysicsParams& params);

}  // namespace rarl
