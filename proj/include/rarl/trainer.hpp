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

#include "rarl/envs.hpp"
#include "rarl/optimizer.hpp"
#include "rarl/policy.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace rarl {

/// Parameters of a generated tabular game ("tabular" environment).
struct GameConfig {
  std::uint64_t seed = 0;
  int n_states = 5;
  int n_actions1 = 3;
  int n_actions2 = 3;
  int horizon = 100;
  double discount = 0.95;
  /// When set, the game is read from this file instead of generated.
  std::string path;
};

struct TrainConfig {
  int n_iter = 100;
  int n_mu = 1;
  int n_nu = 1;
  int n_traj = 32;
  std::uint64_t seed = 0;
  std::string env_name = "pendulum";
  EnvPhysicsParams env = pendulum_defaults();
  GameConfig game;
  OptimizerConfig opt_mu;
  OptimizerConfig opt_nu;
  /// Zero-strength adversary: adversary cap forced to 0, adversary never updated.
  bool baseline_mode = false;
  std::vector<Index> hidden = {64, 64};
  double init_log_std = 0.0;
  /// Divide policy inputs by the environment's observation scale.
  bool scale_inputs = true;
  /// Checkpoint period in outer iterations (0: final checkpoint only).
  int checkpoint_every = 10;
  /// Rollout workers; results do not depend on this value.
  int threads = 1;

  void validate() const;
};

/// Environment described by the config; baseline mode zeroes the adversary cap.
std::unique_ptr<Environment> make_environment(const TrainConfig& config);
/// The tabular game described by the config (generated or loaded).
TabularGame make_game(const GameConfig& config);

/// Freshly initialized player policy, seeded from (config.seed, player).
std::unique_ptr<StochasticPolicy> make_player_policy(const TrainConfig& config, const EnvSpec& spec, Player player);

/// Root seed for the rollouts of one inner iteration of one phase.
std::uint64_t rollout_seed(std::uint64_t seed, int iteration, Player player, int inner);

/// Per-trajectory streams derived from a roll() root: reset seed and the two
/// players' action-noise streams.
struct TrajectorySeeds {
  std::uint64_t reset = 0;
  std::uint64_t protagonist = 0;
  std::uint64_t adversary = 0;
};
TrajectorySeeds trajectory_seeds(std::uint64_t rng_root, std::size_t index);

/// Samples n_traj trajectories; trajectory k uses streams derived from
/// (rng_root, k) only, so batches are identical for any thread count. A null
/// adversary plays the zero action.
std::vector<Trajectory> roll(const Environment& env, const StochasticPolicy& protagonist,
                             const StochasticPolicy* adversary, int n_traj, std::uint64_t rng_root, int threads = 1);

struct ScheduleEvent {
  int iteration = 0;
  Player player = Player::protagonist;
  int inner = 0;
  int rollouts = 0;
};

/// "i<iter>:<mu|nu><inner>x<rollouts>" tokens joined by spaces.
std::string schedule_string(const std::vector<ScheduleEvent>& events);

struct IterationStats {
  int iteration = 0;
  Player player = Player::protagonist;
  int inner = 0;
  /// Mean undiscounted returns of both players on the phase's rollout batch.
  double mean_return1 = 0.0;
  double mean_return2 = 0.0;
  double mean_length = 0.0;
  double surrogate_before = 0.0;
  double surrogate_after = 0.0;
  double kl = 0.0;
  double cg_residual = 0.0;
  int backtracks = 0;
  bool accepted = false;
  double wall_seconds = 0.0;
};

struct TrainResult {
  std::unique_ptr<StochasticPolicy> mu;
  std::unique_ptr<StochasticPolicy> nu;
  std::vector<IterationStats> history;
  std::vector<ScheduleEvent> schedule;
  int iterations_completed = 0;
};

struct TrainHooks {
  /// Called after every completed outer iteration; exceptions abort training.
  std::function<void(int iteration, const TrainResult& state)> on_iteration;
  /// Called after every optimizer update.
  std::function<void(const IterationStats&)> on_update;
  /// Sees each rollout batch before the update that consumes it.
  std::function<void(const ScheduleEvent&, const std::vector<Trajectory>&)> on_rollouts;
};

/// Alternating optimization: for each outer iteration, n_mu protagonist
/// updates against the frozen adversary, then n_nu adversary updates against
/// the frozen protagonist, each on freshly rolled trajectories. When `resume`
/// is given, training continues after its iteration with its parameters.
TrainResult train(const TrainConfig& config, const TrainHooks& hooks = {}, const Checkpoint* resume = nullptr);

/// Trains a fresh adversary against a frozen protagonist for `iterations`
/// updates; returns the adversary and its per-update stats.
struct AttackResult {
  std::unique_ptr<StochasticPolicy> nu;
  std::vector<IterationStats> history;
};
AttackResult train_adversary_only(const TrainConfig& config, const StochasticPolicy& protagonist, int iterations);

/// Checkpoint of both players after `iteration`.
Checkpoint make_checkpoint(const TrainConfig& config, const TrainResult& state);

}  // namespace rarl
