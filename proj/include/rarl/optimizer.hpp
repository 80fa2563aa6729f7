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
#include "rarl/policy.hpp"

#include <memory>
#include <string>
#include <vector>

namespace rarl {

enum class BaselineKind { linear, mlp };

struct OptimizerConfig {
  double kl_delta = 0.01;
  int cg_iters = 10;
  double cg_damping = 0.1;
  double backtrack_ratio = 0.5;
  int max_backtracks = 10;
  double gae_lambda = 0.97;
  BaselineKind baseline = BaselineKind::linear;
  /// Fisher-vector products use every k-th sample of the batch.
  int fisher_stride = 1;

  void validate() const;
};

/// State-value estimate V(s, t) used for variance reduction.
class Baseline {
 public:
  virtual ~Baseline() = default;
  /// `t_norm` is the timestep divided by the episode horizon.
  virtual double predict(const Vector& state, double t_norm) const = 0;
};

/// Least squares on the polynomial features [s, s^2, t, t^2, t^3, 1].
class LinearBaseline final : public Baseline {
 public:
  static constexpr double kRidge = 1e-5;

  static Vector features(const Vector& state, double t_norm);
  /// argmin_w |X w - y|^2 + ridge |w|^2 with X one sample per row. Retries with
  /// a 10x larger ridge while the solution is not finite.
  static Vector ridge_solve(const Matrix& x, const Vector& y, double ridge = kRidge);

  void fit(const std::vector<SingleAgentView>& views, double gamma);
  double predict(const Vector& state, double t_norm) const override;
  const Vector& weights() const { return weights_; }

 private:
  Vector weights_;
};

/// Two-layer tanh network on [s, t] fitted by full-batch Adam.
class MlpBaseline final : public Baseline {
 public:
  void fit(const std::vector<SingleAgentView>& views, double gamma, int steps = 100, double learning_rate = 1e-2);
  double predict(const Vector& state, double t_norm) const override;

 private:
  Mlp<double> net_;
  Vector params_;
  double scale_ = 1.0;
  double offset_ = 0.0;
};

std::unique_ptr<Baseline> fit_baseline(const std::vector<SingleAgentView>& views, double gamma,
                                       BaselineKind kind = BaselineKind::linear);

/// Pooled per-timestep samples for one player. Columns of `states` and
/// `actions` line up with entries of the vectors.
struct AdvantageBatch {
  Matrix states;
  Matrix actions;
  Vector advantages;
  Vector raw_advantages;
  Vector returns;

  Index size() const { return advantages.size(); }
};

/// GAE(gamma, lambda): delta_t = r_t + gamma V(s_{t+1}) (1 - terminal) - V(s_t),
/// A_t = sum_k (gamma lambda)^k delta_{t+k}. Truncated (non-terminal) episodes
/// bootstrap from V(final_state). With `normalize`, advantages are shifted and
/// scaled to zero mean and unit standard deviation over the batch.
AdvantageBatch compute_advantages(const std::vector<SingleAgentView>& views, const Baseline* baseline, double gamma,
                                  double lambda, bool normalize = true);

/// L(theta) = mean[exp(log pi_theta - log pi_old) A].
double surrogate(const StochasticPolicy& policy, const Vector& theta, const Vector& old_log_probs,
                 const AdvantageBatch& batch);

struct SurrogateEval {
  double loss = 0.0;
  Vector gradient;
};

SurrogateEval surrogate_and_gradient(const StochasticPolicy& policy, const Vector& theta, const Vector& theta_old,
                                     const AdvantageBatch& batch);

/// (Hessian of mean KL at theta + damping I) v.
Vector fisher_vector_product(const StochasticPolicy& policy, const Vector& theta, const Matrix& states, const Vector& v,
                             double damping);

struct CgResult {
  Vector x;
  double residual = 0.0;
  int iterations = 0;
};

/// Solves A x = b for symmetric positive definite A given as an operator.
template <typename Op>
CgResult conjugate_gradient(const Op& apply, const Vector& b, int iters, double residual_tol = 1e-10) {
  CgResult out;
  out.x = Vector::Zero(b.size());
  Vector r = b;
  Vector p = b;
  double rr = r.squaredNorm();
  for (int k = 0; k < iters && rr > residual_tol; ++k) {
    const Vector ap = apply(p);
    const double alpha = rr / p.dot(ap);
    out.x += alpha * p;
    r -= alpha * ap;
    const double rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
    out.iterations = k + 1;
  }
  out.residual = std::sqrt(rr);
  return out;
}

struct TrpoResult {
  Vector params;
  bool accepted = false;
  double kl = 0.0;
  double surrogate_before = 0.0;
  double surrogate_after = 0.0;
  double cg_residual = 0.0;
  int backtracks = 0;
  std::string diagnostic;
};

/// Natural-gradient step under a mean-KL trust region with backtracking line
/// search. A step is accepted only when KL <= kl_delta and the surrogate
/// strictly improves; otherwise the old parameters are returned.
TrpoResult trpo_step(const StochasticPolicy& policy, const Vector& theta_old, const AdvantageBatch& batch,
                     const OptimizerConfig& config);

/// Per-phase diagnostics of one policy update.
struct UpdateStats {
  double mean_return = 0.0;
  double mean_length = 0.0;
  TrpoResult step;
};

/// Baseline fit, advantage estimation and one TRPO step on the player's
/// views; updates the policy parameters in place.
UpdateStats optimize_policy(StochasticPolicy& policy, const std::vector<SingleAgentView>& views, double gamma,
                            const OptimizerConfig& config);

}  // namespace rarl
