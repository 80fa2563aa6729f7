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

#include "rarl/types.hpp"

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace rarl {

/// Static description of a two-player zero-sum environment.
struct EnvSpec {
  std::string name;
  Index obs_dim = 0;
  Index act1_dim = 0;
  Index act2_dim = 0;
  Vector act1_lo, act1_hi;
  Vector act2_lo, act2_hi;
  int horizon = 1;
  double discount = 1.0;
  /// Typical magnitude of each observation coordinate, used by policies to
  /// bring inputs to order one. Empty means all ones.
  Vector obs_scale;

  /// Throws std::invalid_argument when bounds are inconsistent. A zero-width
  /// adversary box (lo == hi == 0) is allowed; it encodes a disabled adversary.
  void validate() const;
};

/// One transition (s, a1, a2, r1, r2, s'). Actions are stored exactly as the
/// policies emitted them, before clamping.
struct TwoPlayerStep {
  Vector state;
  Vector action1;
  Vector action2;
  double reward1 = 0.0;
  double reward2 = 0.0;
  Vector next_state;
  bool terminal = false;
};

struct Trajectory {
  std::vector<TwoPlayerStep> steps;
  double discount = 1.0;
  int horizon = 1;

  std::size_t size() const { return steps.size(); }
  bool empty() const { return steps.empty(); }
  /// True when the last step ended the episode (as opposed to the time limit).
  bool terminated() const { return !steps.empty() && steps.back().terminal; }

  /// Checks length, terminal placement, state chaining and the zero-sum
  /// reward relation. Throws std::logic_error on the first violation.
  void validate() const;
};

/// (state, action, reward) triples seen by one player.
struct SingleAgentView {
  std::vector<Vector> states;
  std::vector<Vector> actions;
  std::vector<double> rewards;
  Vector final_state;
  bool terminated = false;
  int horizon = 1;

  std::size_t size() const { return rewards.size(); }
};

enum class Player { protagonist = 1, adversary = 2 };

SingleAgentView split(const Trajectory& trajectory, Player player);

/// sum_t gamma^t r_t
double discounted_return(const SingleAgentView& view, double gamma);
double discounted_return(const std::vector<double>& rewards, double gamma);

/// Reward-to-go R_t = sum_{k>=t} gamma^{k-t} r_k, computed backwards.
std::vector<double> rewards_to_go(const std::vector<double>& rewards, double gamma);

struct StepResult {
  Vector next_state;
  double reward1 = 0.0;
  double reward2 = 0.0;
  bool terminal = false;
  /// Time limit reached without termination.
  bool truncated = false;
};

Vector clamp_to_box(const Vector& action, const Vector& lo, const Vector& hi);

/// Base class for all environments. Owns the episode clock, action clamping
/// and the zero-sum reward split; subclasses supply the dynamics.
class Environment {
 public:
  explicit Environment(EnvSpec spec);
  virtual ~Environment() = default;

  const EnvSpec& spec() const { return spec_; }

  /// Draws a start state from the initial-state distribution. Identical seeds
  /// give identical states and identical subsequent dynamics.
  Vector reset(std::uint64_t seed);

  /// Advances one step. Actions outside the declared box are clamped
  /// coordinate-wise. Throws std::logic_error after the episode has ended.
  StepResult step(const Vector& action1, const Vector& action2);

  const Vector& state() const { return state_; }
  int clock() const { return clock_; }
  bool done() const { return done_; }

  virtual std::unique_ptr<Environment> clone() const = 0;

 protected:
  struct Transition {
    Vector next_state;
    double reward = 0.0;
    bool terminal = false;
  };

  virtual Vector initial_state(Rng& rng) = 0;
  virtual Transition transition(const Vector& state, const Vector& action1, const Vector& action2, Rng& rng) = 0;

  EnvSpec spec_;

 private:
  Vector state_;
  Rng rng_;
  int clock_ = 0;
  bool done_ = true;
};

/// Writes one step per line: `t,state...,action1...,action2...,reward1,terminal`.
/// Two leading `#` lines carry the dimensions and the final next_state so the
/// trajectory can be reconstructed exactly.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);
Trajectory read_trajectory_csv(std::istream& in);

/// Column count of a trajectory record for the given spec.
Index trajectory_csv_columns(const EnvSpec& spec);

}  // namespace rarl
