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

#include "rarl/mlp.hpp"
#include "rarl/types.hpp"

#include <memory>
#include <string>
#include <vector>

namespace rarl {

enum class PolicyKind : std::uint32_t { gaussian_mlp = 0, tabular_softmax = 1 };

/// Applies the Hessian of the mean KL divergence, taken at the parameters the
/// operator was built for, to a vector.
class FisherOperator {
 public:
  virtual ~FisherOperator() = default;
  virtual Vector apply(const Vector& v) const = 0;
};

/// Differentiable stochastic policy over a flat parameter vector.
///
/// Batched methods take explicit parameters so the optimizer can probe
/// candidate points without mutating the policy. States and actions are
/// stored one sample per column. All const methods are safe to call
/// concurrently.
class StochasticPolicy {
 public:
  virtual ~StochasticPolicy() = default;

  virtual PolicyKind kind() const = 0;
  virtual Index obs_dim() const = 0;
  /// Width of an action vector.
  virtual Index act_dim() const = 0;
  virtual Index num_params() const = 0;
  virtual std::unique_ptr<StochasticPolicy> clone() const = 0;

  const Vector& params() const { return params_; }
  void set_params(const Vector& params);

  virtual Vector sample_action(const Vector& state, Rng& rng) const = 0;
  /// Mode of the action distribution (Gaussian mean, or the most likely index).
  virtual Vector mean_action(const Vector& state) const = 0;

  virtual Vector log_prob_batch(const Vector& params, const Matrix& states, const Matrix& actions) const = 0;
  /// sum_i weights[i] * grad_params log pi(actions_i | states_i).
  virtual Vector grad_weighted_log_prob(const Vector& params, const Matrix& states, const Matrix& actions,
                                        const Vector& weights) const = 0;
  /// Per-state KL(pi_old(.|s) || pi_new(.|s)).
  virtual Vector kl_batch(const Vector& params_old, const Vector& params_new, const Matrix& states) const = 0;
  virtual std::unique_ptr<FisherOperator> fisher(const Vector& params, const Matrix& states) const = 0;

  double log_prob(const Vector& state, const Vector& action) const;
  Vector grad_log_prob(const Vector& state, const Vector& action) const;
  double mean_kl(const Vector& params_old, const Vector& params_new, const Matrix& states) const;

 protected:
  void check_state(const Vector& state) const;
  Vector params_;
};

/// Diagonal Gaussian with an MLP mean and a state-independent log standard
/// deviation. Parameters: the MLP block (see Mlp) followed by act_dim log_std.
class GaussianMlpPolicy final : public StochasticPolicy {
 public:
  static constexpr double kMinLogStd = -5.0;
  static constexpr double kMaxLogStd = 2.0;

  GaussianMlpPolicy(Index obs_dim, Index act_dim, std::vector<Index> hidden = {64, 64});

  /// Seeded init: mean near zero (output layer scaled by 0.01), log_std set to init_log_std.
  void initialize(std::uint64_t seed, double init_log_std = 0.0);

  PolicyKind kind() const override { return PolicyKind::gaussian_mlp; }
  Index obs_dim() const override { return obs_dim_; }
  Index act_dim() const override { return act_dim_; }
  Index num_params() const override { return net_.num_params() + act_dim_; }
  const std::vector<Index>& hidden() const { return hidden_; }
  const Mlp<double>& net() const { return net_; }

  /// Fixed, non-learned input normalization: the MLP sees state ./ scale.
  /// Defaults to all ones. Not part of the parameter vector.
  void set_input_scale(const Vector& scale);
  const Vector& input_scale() const { return input_scale_; }
  Matrix scaled(const Matrix& states) const;
  std::unique_ptr<StochasticPolicy> clone() const override;

  Vector sample_action(const Vector& state, Rng& rng) const override;
  Vector mean_action(const Vector& state) const override;
  Vector log_std() const { return params_.tail(act_dim_); }

  Vector log_prob_batch(const Vector& params, const Matrix& states, const Matrix& actions) const override;
  Vector grad_weighted_log_prob(const Vector& params, const Matrix& states, const Matrix& actions,
                                const Vector& weights) const override;
  Vector kl_batch(const Vector& params_old, const Vector& params_new, const Matrix& states) const override;
  std::unique_ptr<FisherOperator> fisher(const Vector& params, const Matrix& states) const override;

 private:
  Index obs_dim_;
  Index act_dim_;
  std::vector<Index> hidden_;
  Mlp<double> net_;
  Vector input_scale_;
  bool unit_scale_ = true;
};

/// Independent softmax over actions for every state of a tabular game.
/// Observations are one-hot state vectors; the action vector holds the index.
/// Parameters are logits, row-major over (state, action).
class SoftmaxTabularPolicy final : public StochasticPolicy {
 public:
  SoftmaxTabularPolicy(int n_states, int n_actions);

  /// Logits drawn uniformly from [-scale, scale].
  void initialize(std::uint64_t seed, double scale = 0.01);

  PolicyKind kind() const override { return PolicyKind::tabular_softmax; }
  Index obs_dim() const override { return n_states_; }
  Index act_dim() const override { return 1; }
  Index num_params() const override { return static_cast<Index>(n_states_) * n_actions_; }
  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  std::unique_ptr<StochasticPolicy> clone() const override;

  /// Action probabilities at state s under the given logits.
  Vector probabilities(const Vector& params, int s) const;
  /// n_states x n_actions matrix of action probabilities.
  Matrix strategy() const;

  Vector sample_action(const Vector& state, Rng& rng) const override;
  Vector mean_action(const Vector& state) const override;

  Vector log_prob_batch(const Vector& params, const Matrix& states, const Matrix& actions) const override;
  Vector grad_weighted_log_prob(const Vector& params, const Matrix& states, const Matrix& actions,
                                const Vector& weights) const override;
  Vector kl_batch(const Vector& params_old, const Vector& params_new, const Matrix& states) const override;
  std::unique_ptr<FisherOperator> fisher(const Vector& params, const Matrix& states) const override;

 private:
  int state_of(const Eigen::Ref<const Vector>& obs) const;
  int action_of(double a) const;

  int n_states_;
  int n_actions_;
};

// ---------------------------------------------------------------------------
// Checkpoints
//
// All integers and floats little-endian.
//   0   char[8]  "RARLCKPT"
//   8   u32      format version (2)
//   12  u32      number of policy blocks
//   16  u64      seed
//   24  u64      iteration
// then per block:
//   u32 kind (0 gaussian_mlp, 1 tabular_softmax)
//   u32 obs_dim (n_states for tabular)
//   u32 act_dim (n_actions for tabular)
//   u32 n_hidden, followed by n_hidden u32 layer widths
//   gaussian_mlp only: obs_dim f64 input scale
//   u64 n_params, followed by n_params f64

struct PolicyBlock {
  PolicyKind kind = PolicyKind::gaussian_mlp;
  std::uint32_t obs_dim = 0;
  std::uint32_t act_dim = 0;
  std::vector<std::uint32_t> hidden;
  /// Gaussian MLP input scale (obs_dim entries); empty for tabular policies.
  Vector input_scale;
  Vector params;
};

struct Checkpoint {
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;
  std::vector<PolicyBlock> policies;
};

PolicyBlock to_block(const StochasticPolicy& policy);
std::unique_ptr<StochasticPolicy> from_block(const PolicyBlock& block);

std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(const std::string& bytes);
/// Writes atomically (temporary file + rename). Throws std::runtime_error on I/O failure.
void write_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace rarl
