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

#include "rarl/eval.hpp"
#include "rarl/trainer.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace rarl {

/// Evaluation protocol knobs.
struct EvalConfig {
  int episodes = 100;
  std::uint64_t seed = 1000003;
  double alpha = 0.1;
  bool deterministic = true;
  /// Empty grids mean nominal * (1 +- sweep_fraction) in sweep_count steps.
  std::vector<double> masses;
  std::vector<double> frictions;
  double sweep_fraction = 0.6;
  int sweep_count = 9;
  int attack_iterations = 50;
  /// Training seeds per condition for multi-seed experiments.
  int seeds = 50;
};

struct ExperimentConfig {
  TrainConfig train;
  EvalConfig eval;

  std::vector<double> mass_grid() const;
  std::vector<double> friction_grid() const;
  EvalOptions eval_options(int threads) const;
};

/// Parse or validation failure; `line` is 0 for command-line overrides.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

/// Sectioned key-value text:
///
///   # comment
///   [train]
///   n_iter = 100
///
/// Overrides are "section.key=value" strings applied after the file. Every
/// key has a default; unknown sections or keys are errors. Physics defaults
/// and n_iter (100 pendulum, 500 slider) follow env.name before explicit
/// values are applied.
ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {},
                              const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

/// Every key with its resolved value, in the same format parse_config reads.
std::string format_config(const ExperimentConfig& config);

/// All recognised "section.key" names.
std::vector<std::string> config_keys();

}  // namespace rarl
