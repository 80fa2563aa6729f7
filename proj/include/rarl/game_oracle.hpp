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
#include "rarl/policy.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace rarl {

struct MatrixGameSolution {
  Vector row_strategy;
  Vector col_strategy;
  /// Value to the row (maximizing) player.
  double value = 0.0;
  /// |primal objective - dual objective| of the underlying linear programs.
  double duality_gap = 0.0;
};

/// Optimal mixed strategies of the zero-sum matrix game with row-player
/// payoff M, via the standard LP pair solved by dense simplex with Bland's
/// rule. Throws std::invalid_argument on empty or non-finite input.
MatrixGameSolution matrix_game_solve(const Matrix& payoff);

/// Q(s)[a1][a2] = r(s, a1, a2) + gamma sum_s' P(s' | s, a1, a2) V(s').
Matrix stage_matrix(const TabularGame& game, const Vector& values, int state);

/// max_s |val(Q_V(s)) - V(s)|.
double bellman_saddle_residual(const TabularGame& game, const Vector& values);

struct ShapleyResult {
  Vector values;
  /// Stationary equilibrium strategies, one probability vector per state.
  std::vector<Vector> row_strategies;
  std::vector<Vector> col_strategies;
  int iterations = 0;
  /// ||V_{k+1} - V_k||_inf per iteration.
  std::vector<double> deltas;
};

/// Shapley value iteration V_{k+1}(s) = val(Q_k(s)) until the sup-norm change
/// falls below tol. Requires discount < 1.
ShapleyResult shapley_value_iteration(const TabularGame& game, double tol = 1e-10, int max_iterations = 1'000'000);

struct RiskStats {
  double alpha = 0.1;
  /// Lower order statistic of rank ceil(alpha N).
  double quantile = 0.0;
  /// Mean of the samples at or below the quantile.
  double cvar = 0.0;
};

RiskStats cvar(const std::vector<double>& samples, double alpha);

/// Exploitability breakdown at the start state.
struct GapReport {
  double value = 0.0;
  /// Best protagonist response against the fixed adversary.
  double best_response1 = 0.0;
  /// Best (lowest) adversary response against the fixed protagonist.
  double best_response2 = 0.0;
  double gap = 0.0;
};

/// Discounted value of stationary strategies (rows = states) from every state.
Vector policy_values(const TabularGame& game, const Matrix& mu, const Matrix& nu);

GapReport equilibrium_gap_report(const TabularGame& game, const Matrix& mu, const Matrix& nu);
/// max(BR1 - V, V - BR2) at the start state; zero exactly at a Nash equilibrium.
double equilibrium_gap(const TabularGame& game, const Matrix& mu, const Matrix& nu);
double equilibrium_gap(const TabularGame& game, const SoftmaxTabularPolicy& mu, const SoftmaxTabularPolicy& nu);

/// Plain-text game format:
///
///   states <n>
///   actions <n1> <n2>
///   start <s0>
///   discount <gamma>
///   reward
///   <n_states blocks of n1 lines, n2 numbers each>
///   transition
///   <one line of n_states probabilities per (s, a1, a2), a2 fastest>
///
/// Blank lines and lines starting with '#' are ignored.
void write_game(std::ostream& out, const TabularGame& game);
/// Throws std::invalid_argument with the offending line number on malformed input.
TabularGame read_game(std::istream& in);

}  // namespace rarl
