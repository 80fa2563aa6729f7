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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rarl {

void EnvPhysicsParams::validate() const {
  if (!(mass > 0.0) || !(mass_cart > 0.0)) throw std::invalid_argument("EnvPhysicsParams: masses must be > 0");
  if (!(pole_half_length > 0.0)) throw std::invalid_argument("EnvPhysicsParams: pole length must be > 0");
  if (!(friction >= 0.0)) throw std::invalid_argument("EnvPhysicsParams: friction must be >= 0");
  if (!(dt > 0.0)) throw std::invalid_argument("EnvPhysicsParams: dt must be > 0");
  if (!(adversary_force_cap >= 0.0) || !(protagonist_force_cap > 0.0))
    throw std::invalid_argument("EnvPhysicsParams: adversary cap must be >= 0 and protagonist cap > 0");
  if (!std::isfinite(adversary_force_cap) || !std::isfinite(protagonist_force_cap) || !std::isfinite(gravity))
    throw std::invalid_argument("EnvPhysicsParams: non-finite parameter");
  if (horizon <= 0) throw std::invalid_argument("EnvPhysicsParams: horizon must be positive");
  if (!(discount > 0.0 && discount <= 1.0)) throw std::invalid_argument("EnvPhysicsParams: discount must be in (0, 1]");
}

EnvPhysicsParams pendulum_defaults() {
  EnvPhysicsParams p;
  p.mass = 4.89;
  p.mass_cart = 1.0;
  p.pole_half_length = 0.5;
  p.dt = 0.02;
  p.adversary_force_cap = 2.0;
  p.protagonist_force_cap = 10.0;
  p.horizon = 1000;
  p.discount = 0.995;
  return p;
}

EnvPhysicsParams slider_defaults() {
  EnvPhysicsParams p;
  p.mass = 3.53;
  // static friction 0.69 N, well inside the drive range, so small pushes move the block
  p.friction = 0.02;
  p.dt = 0.05;
  p.adversary_force_cap = 1.0;
  p.protagonist_force_cap = 5.0;
  p.horizon = 500;
  p.discount = 0.995;
  return p;
}

namespace {

Vector filled(Index n, double v) { return Vector::Constant(n, v); }

EnvSpec make_spec(std::string name, Index obs, Index a1, Index a2, double cap1, double cap2, int horizon,
                  double discount) {
  EnvSpec s;
  s.name = std::move(name);
  s.obs_dim = obs;
  s.act1_dim = a1;
  s.act2_dim = a2;
  s.act1_lo = filled(a1, -cap1);
  s.act1_hi = filled(a1, cap1);
  s.act2_lo = filled(a2, -cap2);
  s.act2_hi = filled(a2, cap2);
  s.horizon = horizon;
  s.discount = discount;
  return s;
}

const EnvPhysicsParams& checked(const EnvPhysicsParams& p) {
  p.validate();
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// Pendulum

namespace pendulum {

Eigen::Vector2d accelerations(const EnvPhysicsParams& p, const Vector& s, double cart_force, double fx, double fy) {
  const double m = p.mass;
  const double total = p.mass_cart + m;
  const double l = p.pole_half_length;
  const double sin_t = std::sin(s[2]);
  const double cos_t = std::cos(s[2]);
  const double wdot = s[3];

  // Lagrangian of a uniform rod (I = m l^2 / 3 about its center) on a cart.
  // The external force at the center of mass maps to generalized forces
  // (fx, l (fx cos - fy sin)); the rail absorbs the vertical component.
  Eigen::Matrix2d mass_matrix;
  mass_matrix << total, m * l * cos_t, m * l * cos_t, (4.0 / 3.0) * m * l * l;
  Eigen::Vector2d rhs(cart_force + fx + m * l * wdot * wdot * sin_t,
                      m * p.gravity * l * sin_t + l * (fx * cos_t - fy * sin_t));
  const double det = mass_matrix.determinant();
  Eigen::Vector2d acc;
  acc[0] = (mass_matrix(1, 1) * rhs[0] - mass_matrix(0, 1) * rhs[1]) / det;
  acc[1] = (mass_matrix(0, 0) * rhs[1] - mass_matrix(1, 0) * rhs[0]) / det;
  return acc;
}

Vector integrate(const EnvPhysicsParams& p, const Vector& s, double cart_force, double fx, double fy) {
  const Eigen::Vector2d acc = accelerations(p, s, cart_force, fx, fy);
  Vector n(4);
  n[1] = s[1] + p.dt * acc[0];
  n[3] = s[3] + p.dt * acc[1];
  n[0] = s[0] + p.dt * n[1];
  n[2] = s[2] + p.dt * n[3];
  return n;
}

double energy(const EnvPhysicsParams& p, const Vector& s) {
  const double m = p.mass;
  const double l = p.pole_half_length;
  const double kinetic = 0.5 * (p.mass_cart + m) * s[1] * s[1] + m * l * s[1] * s[3] * std::cos(s[2]) +
                         0.5 * (4.0 / 3.0) * m * l * l * s[3] * s[3];
  return kinetic + m * p.gravity * l * std::cos(s[2]);
}

}  // namespace pendulum

InvertedPendulum::InvertedPendulum(const EnvPhysicsParams& params)
    : Environment(make_spec("pendulum", 4, 1, 2, checked(params).protagonist_force_cap, params.adversary_force_cap,
                            params.horizon, params.discount)),
      params_(params) {
  spec_.obs_scale = Vector::Ones(4);
  spec_.obs_scale[0] = pendulum::kXLimit;
  spec_.obs_scale[2] = pendulum::kThetaLimit;
}

std::unique_ptr<Environment> InvertedPendulum::clone() const { return std::make_unique<InvertedPendulum>(*this); }

Vector InvertedPendulum::initial_state(Rng& rng) {
  Vector s(4);
  for (Index i = 0; i < 4; ++i) s[i] = rng.uniform(-pendulum::kInitBox, pendulum::kInitBox);
  return s;
}

Environment::Transition InvertedPendulum::transition(const Vector& s, const Vector& a1, const Vector& a2, Rng&) {
  Transition tr;
  tr.next_state = pendulum::integrate(params_, s, a1[0], a2[0], a2[1]);
  const bool alive = std::abs(tr.next_state[2]) < pendulum::kThetaLimit &&
                     std::abs(tr.next_state[0]) < pendulum::kXLimit && tr.next_state.allFinite();
  tr.reward = alive ? 1.0 : 0.0;
  tr.terminal = !alive;
  return tr;
}

// ---------------------------------------------------------------------------
// Slider

namespace slider {

Vector integrate(const EnvPhysicsParams& p, const Vector& s, double drive_force, double adversary_force) {
  const double m = p.mass;
  // Viscous drag is integrated implicitly, Coulomb friction as a bounded impulse.
  const double drag = p.friction * kViscousPerFriction;
  const double v_free = (s[1] + p.dt * (drive_force + adversary_force) / m) / (1.0 + p.dt * drag / m);
  const double coulomb = p.dt * p.friction * p.gravity;
  double v = 0.0;
  if (std::abs(v_free) > coulomb) v = v_free - std::copysign(coulomb, v_free);
  Vector n(2);
  n[1] = v;
  n[0] = s[0] + p.dt * v;
  return n;
}

}  // namespace slider

FrictionSlider::FrictionSlider(const EnvPhysicsParams& params)
    : Environment(make_spec("slider", 2, 1, 1, checked(params).protagonist_force_cap, params.adversary_force_cap,
                            params.horizon, params.discount)),
      params_(params) {
  spec_.obs_scale = Vector::Ones(2);
  spec_.obs_scale[0] = slider::kPositionScale;
}

std::unique_ptr<Environment> FrictionSlider::clone() const { return std::make_unique<FrictionSlider>(*this); }

Vector FrictionSlider::initial_state(Rng& rng) {
  Vector s(2);
  s[0] = rng.uniform(-slider::kInitBox, slider::kInitBox);
  s[1] = 0.0;
  return s;
}

Environment::Transition FrictionSlider::transition(const Vector& s, const Vector& a1, const Vector& a2, Rng&) {
  Transition tr;
  tr.next_state = slider::integrate(params_, s, a1[0], a2[0]);
  tr.reward = tr.next_state[1] - slider::kControlCost * a1[0] * a1[0];
  tr.terminal = false;
  return tr;
}

// ---------------------------------------------------------------------------
// Tabular games

double TabularGame::reward_range() const {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& r : reward) {
    lo = std::min(lo, r.minCoeff());
    hi = std::max(hi, r.maxCoeff());
  }
  return hi - lo;
}

void TabularGame::validate() const {
  if (n_states < 1 || n_actions1 < 1 || n_actions2 < 1) throw std::invalid_argument("TabularGame: empty dimension");
  if (static_cast<int>(reward.size()) != n_states) throw std::invalid_argument("TabularGame: reward table size");
  for (const auto& r : reward)
    if (r.rows() != n_actions1 || r.cols() != n_actions2 || !r.allFinite())
      throw std::invalid_argument("TabularGame: reward matrix shape or values");
  if (transition.size() != static_cast<std::size_t>(n_states * n_actions1 * n_actions2))
    throw std::invalid_argument("TabularGame: transition table size");
  for (const auto& p : transition) {
    if (p.size() != n_states || (p.array() < 0.0).any() || !p.allFinite())
      throw std::invalid_argument("TabularGame: transition row must be a nonnegative vector over states");
    if (std::abs(p.sum() - 1.0) > 1e-12) throw std::invalid_argument("TabularGame: transition row must sum to 1");
  }
  if (start_state < 0 || start_state >= n_states) throw std::invalid_argument("TabularGame: start state out of range");
  if (!(discount > 0.0 && discount <= 1.0)) throw std::invalid_argument("TabularGame: discount must be in (0, 1]");
}

TabularGame TabularGame::swapped() const {
  TabularGame g;
  g.n_states = n_states;
  g.n_actions1 = n_actions2;
  g.n_actions2 = n_actions1;
  g.start_state = start_state;
  g.discount = discount;
  for (const auto& r : reward) g.reward.push_back(-r.transpose());
  g.transition.resize(transition.size());
  for (int s = 0; s < n_states; ++s)
    for (int i = 0; i < n_actions1; ++i)
      for (int j = 0; j < n_actions2; ++j)
        g.transition[static_cast<std::size_t>((s * g.n_actions1 + j) * g.n_actions2 + i)] = next_distribution(s, i, j);
  return g;
}

TabularGame make_tabular_game(std::uint64_t seed, int n_states, int n_actions1, int n_actions2, double discount) {
  if (n_states < 1 || n_actions1 < 1 || n_actions2 < 1)
    throw std::invalid_argument("make_tabular_game: dimensions must be >= 1");
  Rng rng(derive_seed(seed, {0x7ab1eULL}));
  TabularGame g;
  g.n_states = n_states;
  g.n_actions1 = n_actions1;
  g.n_actions2 = n_actions2;
  g.discount = discount;
  g.start_state = 0;
  for (int s = 0; s < n_states; ++s) {
    Matrix r(n_actions1, n_actions2);
    for (Index i = 0; i < r.rows(); ++i)
      for (Index j = 0; j < r.cols(); ++j) r(i, j) = rng.uniform(-1.0, 1.0);
    g.reward.push_back(std::move(r));
  }
  // Each (s, a1, a2) reaches at most three distinct successors.
  const int fan_out = std::min(3, n_states);
  std::vector<int> order(static_cast<std::size_t>(n_states));
  for (int k = 0; k < n_states * n_actions1 * n_actions2; ++k) {
    std::iota(order.begin(), order.end(), 0);
    for (int i = 0; i < fan_out; ++i) {
      const auto pick = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_states - i)));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick)]);
    }
    Vector p = Vector::Zero(n_states);
    for (int i = 0; i < fan_out; ++i) p[order[static_cast<std::size_t>(i)]] = rng.uniform(0.1, 1.0);
    p /= p.sum();
    g.transition.push_back(std::move(p));
  }
  g.validate();
  return g;
}

namespace {

EnvSpec tabular_spec(const TabularGame& g, int horizon) {
  g.validate();
  EnvSpec s;
  s.name = "tabular";
  s.obs_dim = g.n_states;
  s.act1_dim = 1;
  s.act2_dim = 1;
  // A single-action player gets a unit box around index 0; rounding maps it back to 0.
  s.act1_lo = Vector::Constant(1, 0.0);
  s.act1_hi = Vector::Constant(1, std::max(1, g.n_actions1 - 1));
  s.act2_lo = Vector::Constant(1, 0.0);
  s.act2_hi = Vector::Constant(1, std::max(1, g.n_actions2 - 1));
  s.horizon = horizon;
  s.discount = g.discount;
  return s;
}

int to_action(double a, int n) { return std::clamp(static_cast<int>(std::lround(a)), 0, n - 1); }

}  // namespace

TabularGameEnv::TabularGameEnv(TabularGame game, int horizon) : Environment(tabular_spec(game, horizon)), game_(std::move(game)) {}

std::unique_ptr<Environment> TabularGameEnv::clone() const { return std::make_unique<TabularGameEnv>(*this); }

int TabularGameEnv::state_index(const Vector& observation) {
  Index k = 0;
  observation.maxCoeff(&k);
  return static_cast<int>(k);
}

Vector TabularGameEnv::one_hot(int s) const {
  Vector v = Vector::Zero(game_.n_states);
  v[s] = 1.0;
  return v;
}

Vector TabularGameEnv::initial_state(Rng&) { return one_hot(game_.start_state); }

Environment::Transition TabularGameEnv::transition(const Vector& state, const Vector& a1, const Vector& a2, Rng& rng) {
  const int s = state_index(state);
  const int i = to_action(a1[0], game_.n_actions1);
  const int j = to_action(a2[0], game_.n_actions2);
  const Vector& p = game_.next_distribution(s, i, j);
  const double u = rng.uniform();
  double acc = 0.0;
  int next = game_.n_states - 1;
  for (int k = 0; k < game_.n_states; ++k) {
    acc += p[k];
    if (u < acc) {
      next = k;
      break;
    }
  }
  Transition tr;
  tr.next_state = one_hot(next);
  tr.reward = game_.reward[static_cast<std::size_t>(s)](i, j);
  tr.terminal = false;
  return tr;
}

std::unique_ptr<Environment> make_env(const std::string& name, const EnvPhysicsParams& params) {
  if (name == "pendulum") return std::make_unique<InvertedPendulum>(params);
  if (name == "slider") return std::make_unique<FrictionSlider>(params);
  throw std::invalid_argument("unknown environment '" + name + "' (expected pendulum or slider)");
}

}  // namespace rarl
