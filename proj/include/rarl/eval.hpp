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

#include "rarl/game_oracle.hpp"
#include "rarl/trainer.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace rarl {

enum class AdversaryMode { none, random, policy };

struct EvalOptions {
  int n_episodes = 100;
  /// Root of the per-episode seeds; equal roots give equal episode seed sets.
  std::uint64_t seed = 0;
  AdversaryMode adversary = AdversaryMode::none;
  const StochasticPolicy* adversary_policy = nullptr;
  /// Act with the distribution mode instead of sampling.
  bool deterministic = true;
  double alpha = 0.1;
  int threads = 1;
};

struct EvalStats {
  double mean = 0.0;
  /// Population standard deviation of the per-episode returns.
  double std = 0.0;
  int episodes = 0;
  std::vector<double> returns;
  RiskStats risk;
};

/// Summary statistics of a list of returns.
EvalStats summarize(std::vector<double> returns, double alpha);

/// Runs n_episodes episodes of the protagonist and reports undiscounted returns.
EvalStats evaluate(const Environment& env, const StochasticPolicy& protagonist, const EvalOptions& options);
EvalStats evaluate(const StochasticPolicy& protagonist, const std::string& env_name, const EnvPhysicsParams& params,
                   const EvalOptions& options);

/// Integer percentiles 0..100 of the per-seed rewards (lower interpolation).
std::vector<std::pair<int, double>> percentile_curve(const std::vector<double>& final_rewards_by_seed);

struct SweepGrid {
  std::string env_name;
  std::vector<double> masses;
  std::vector<double> frictions;
  /// Row-major over (mass, friction).
  std::vector<EvalStats> cells;
  int episodes = 0;
  std::uint64_t eval_seed = 0;

  const EvalStats& at(std::size_t mass_index, std::size_t friction_index) const {
    return cells[mass_index * frictions.size() + friction_index];
  }
};

/// Disturbance-free evaluation over pole/body masses at nominal friction.
SweepGrid mass_sweep(const StochasticPolicy& policy, const std::string& env_name, const EnvPhysicsParams& nominal,
                     const std::vector<double>& masses, const EvalOptions& options);
/// Slider only; the pendulum has no friction and is rejected.
SweepGrid friction_sweep(const StochasticPolicy& policy, const std::string& env_name, const EnvPhysicsParams& nominal,
                         const std::vector<double>& frictions, const EvalOptions& options);
/// Full Cartesian grid over mass x friction on the slider.
SweepGrid joint_sweep(const StochasticPolicy& policy, const std::string& env_name, const EnvPhysicsParams& nominal,
                      const std::vector<double>& masses, const std::vector<double>& frictions,
                      const EvalOptions& options);

/// `count` values spanning nominal * (1 - fraction) .. nominal * (1 + fraction).
std::vector<double> sweep_values(double nominal, double fraction = 0.6, int count = 9);

struct ForceRecord {
  Vector state;
  Vector force;
};

/// Mean adversary action at each state, clamped to the adversary's force box.
std::vector<ForceRecord> force_field_export(const StochasticPolicy& adversary, const EnvSpec& spec,
                                            const std::vector<Vector>& states);
/// Pendulum probe states: stationary cart with tilted pole, moving cart with vertical pole.
std::vector<Vector> pendulum_probe_states();

struct AttackReport {
  EvalStats clean;
  EvalStats attacked;
  std::vector<IterationStats> attack_history;
};

/// Trains an attack adversary against the frozen protagonist, then evaluates
/// with and without it on the same episode seeds.
AttackReport attack_evaluation(const TrainConfig& config, const StochasticPolicy& protagonist, int attack_iterations,
                               const EvalOptions& options);

// ---------------------------------------------------------------------------
// CSV

/// Leading `#` lines carry metadata (grids, seeds, episode counts).
struct CsvTable {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  bool operator==(const CsvTable&) const = default;
};

void write_csv(std::ostream& out, const CsvTable& table);
CsvTable read_csv(std::istream& in);

CsvTable percentile_table(const std::vector<std::pair<int, double>>& curve);
/// mass,friction,mean,std,cvar,episodes
CsvTable sweep_table(const SweepGrid& grid);
/// mass,friction,mean_a,mean_b,diff  (a minus b, cell by cell)
CsvTable sweep_difference_table(const SweepGrid& a, const SweepGrid& b);
/// state_0..state_k,f_0..f_m
CsvTable force_table(const std::vector<ForceRecord>& records);
/// episode,return
CsvTable returns_table(const EvalStats& stats);

/// gnuplot scripts for the CSVs above, written into `dir`.
void write_plot_scripts(const std::string& dir);

}  // namespace rarl
