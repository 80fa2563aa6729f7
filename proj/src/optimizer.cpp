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

#include "rarl/optimizer.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rarl {

void OptimizerConfig::validate() const {
  if (!(kl_delta > 0.0)) throw std::invalid_argument("optimizer: kl_delta must be > 0");
  if (cg_iters < 1) throw std::invalid_argument("optimizer: cg_iters must be >= 1");
  if (!(cg_damping >= 0.0)) throw std::invalid_argument("optimizer: cg_damping must be >= 0");
  if (!(backtrack_ratio > 0.0 && backtrack_ratio < 1.0))
    throw std::invalid_argument("optimizer: backtrack_ratio must be in (0, 1)");
  if (max_backtracks < 1) throw std::invalid_argument("optimizer: max_backtracks must be >= 1");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw std::invalid_argument("optimizer: gae_lambda must be in [0, 1]");
  if (fisher_stride < 1) throw std::invalid_argument("optimizer: fisher_stride must be >= 1");
}

// ---------------------------------------------------------------------------
// Baselines

namespace {

double normalized_time(std::size_t t, int horizon) { return static_cast<double>(t) / static_cast<double>(horizon); }

}  // namespace

Vector LinearBaseline::features(const Vector& state, double t) {
  const Index d = state.size();
  Vector f(2 * d + 4);
  f.head(d) = state;
  f.segment(d, d) = state.array().square();
  f[2 * d] = t;
  f[2 * d + 1] = t * t;
  f[2 * d + 2] = t * t * t;
  f[2 * d + 3] = 1.0;
  return f;
}

Vector LinearBaseline::ridge_solve(const Matrix& x, const Vector& y, double ridge) {
  const Matrix gram = x.transpose() * x;
  const Vector rhs = x.transpose() * y;
  double reg = ridge;
  for (int attempt = 0; attempt < 5; ++attempt) {
    Matrix a = gram;
    a.diagonal().array() += reg;
    Vector w = a.ldlt().solve(rhs);
    if (w.allFinite()) return w;
    reg *= 10.0;
  }
  return Vector::Zero(x.cols());
}

void LinearBaseline::fit(const std::vector<SingleAgentView>& views, double gamma) {
  if (views.empty()) throw std::invalid_argument("fit_baseline: no trajectories");
  std::size_t n = 0;
  for (const auto& v : views) n += v.size();
  const Index width = features(views.front().states.front(), 0.0).size();
  Matrix x(static_cast<Index>(n), width);
  Vector y(static_cast<Index>(n));
  Index row = 0;
  for (const auto& v : views) {
    const auto rtg = rewards_to_go(v.rewards, gamma);
    for (std::size_t t = 0; t < v.size(); ++t, ++row) {
      x.row(row) = features(v.states[t], normalized_time(t, v.horizon)).transpose();
      y[row] = rtg[t];
    }
  }
  weights_ = ridge_solve(x, y);
}

double LinearBaseline::predict(const Vector& state, double t_norm) const { return features(state, t_norm).dot(weights_); }

void MlpBaseline::fit(const std::vector<SingleAgentView>& views, double gamma, int steps, double learning_rate) {
  if (views.empty()) throw std::invalid_argument("fit_baseline: no trajectories");
  std::size_t n = 0;
  for (const auto& v : views) n += v.size();
  const Index d = views.front().states.front().size();
  Matrix x(d + 1, static_cast<Index>(n));
  Vector y(static_cast<Index>(n));
  Index col = 0;
  for (const auto& v : views) {
    const auto rtg = rewards_to_go(v.rewards, gamma);
    for (std::size_t t = 0; t < v.size(); ++t, ++col) {
      x.col(col).head(d) = v.states[t];
      x(d, col) = normalized_time(t, v.horizon);
      y[col] = rtg[t];
    }
  }
  offset_ = y.mean();
  const double sd = std::sqrt((y.array() - offset_).square().mean());
  scale_ = sd > 1e-12 ? sd : 1.0;
  const Vector target = (y.array() - offset_) / scale_;

  net_ = Mlp<double>(d + 1, {64, 64}, 1);
  params_ = Vector::Zero(net_.num_params());
  Rng rng(0xba5e1117ULL);
  net_.init(params_, rng, 1.0);

  // Full-batch Adam on the mean squared error.
  Vector m = Vector::Zero(params_.size());
  Vector v = Vector::Zero(params_.size());
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int k = 1; k <= steps; ++k) {
    Mlp<double>::Cache cache;
    const Matrix pred = net_.forward_batch(params_, x, &cache);
    const Matrix d_out = 2.0 * inv_n * (pred - target.transpose());
    Vector g = Vector::Zero(params_.size());
    net_.backward(params_, cache, d_out, g);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(b1, k);
    const double c2 = 1.0 - std::pow(b2, k);
    params_.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
}

double MlpBaseline::predict(const Vector& state, double t_norm) const {
  Vector in(state.size() + 1);
  in.head(state.size()) = state;
  in[state.size()] = t_norm;
  return offset_ + scale_ * net_.forward(params_, in)[0];
}

std::unique_ptr<Baseline> fit_baseline(const std::vector<SingleAgentView>& views, double gamma, BaselineKind kind) {
  if (kind == BaselineKind::mlp) {
    auto b = std::make_unique<MlpBaseline>();
    b->fit(views, gamma);
    return b;
  }
  auto b = std::make_unique<LinearBaseline>();
  b->fit(views, gamma);
  return b;
}

// ---------------------------------------------------------------------------
// Advantages

AdvantageBatch compute_advantages(const std::vector<SingleAgentView>& views, const Baseline* baseline, double gamma,
                                  double lambda, bool normalize) {
  if (views.empty()) throw std::invalid_argument("compute_advantages: no trajectories");
  std::size_t n = 0;
  for (const auto& v : views) n += v.size();
  const Index obs = views.front().states.front().size();
  const Index act = views.front().actions.front().size();

  AdvantageBatch batch;
  batch.states.resize(obs, static_cast<Index>(n));
  batch.actions.resize(act, static_cast<Index>(n));
  batch.raw_advantages.resize(static_cast<Index>(n));
  batch.returns.resize(static_cast<Index>(n));

  Index col = 0;
  for (const auto& v : views) {
    const std::size_t len = v.size();
    std::vector<double> values(len + 1, 0.0);
    if (baseline) {
      for (std::size_t t = 0; t < len; ++t) values[t] = baseline->predict(v.states[t], normalized_time(t, v.horizon));
      values[len] = v.terminated ? 0.0 : baseline->predict(v.final_state, normalized_time(len, v.horizon));
    }
    const auto rtg = rewards_to_go(v.rewards, gamma);
    double acc = 0.0;
    for (std::size_t t = len; t-- > 0;) {
      const double delta = v.rewards[t] + gamma * values[t + 1] - values[t];
      acc = delta + gamma * lambda * acc;
      batch.raw_advantages[col + static_cast<Index>(t)] = acc;
    }
    for (std::size_t t = 0; t < len; ++t, ++col) {
      batch.states.col(col) = v.states[t];
      batch.actions.col(col) = v.actions[t];
      batch.returns[col] = rtg[t];
    }
  }

  batch.advantages = batch.raw_advantages;
  if (normalize) {
    const double mean = batch.advantages.mean();
    batch.advantages.array() -= mean;
    const double sd = std::sqrt(batch.advantages.squaredNorm() / static_cast<double>(n));
    if (sd > 1e-12)
      batch.advantages /= sd;
    else
      batch.advantages.setZero();
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Surrogate and TRPO

double surrogate(const StochasticPolicy& policy, const Vector& theta, const Vector& old_log_probs,
                 const AdvantageBatch& batch) {
  const Vector logp = policy.log_prob_batch(theta, batch.states, batch.actions);
  return ((logp - old_log_probs).array().exp() * batch.advantages.array()).mean();
}

SurrogateEval surrogate_and_gradient(const StochasticPolicy& policy, const Vector& theta, const Vector& theta_old,
                                     const AdvantageBatch& batch) {
  if (batch.size() == 0) throw std::invalid_argument("surrogate_and_gradient: empty batch");
  const Vector old_logp = policy.log_prob_batch(theta_old, batch.states, batch.actions);
  const Vector logp = policy.log_prob_batch(theta, batch.states, batch.actions);
  const Eigen::ArrayXd ratio = (logp - old_logp).array().exp();
  SurrogateEval out;
  out.loss = (ratio * batch.advantages.array()).mean();
  const Vector weights = (ratio * batch.advantages.array() / static_cast<double>(batch.size())).matrix();
  out.gradient = policy.grad_weighted_log_prob(theta, batch.states, batch.actions, weights);
  return out;
}

Vector fisher_vector_product(const StochasticPolicy& policy, const Vector& theta, const Matrix& states, const Vector& v,
                             double damping) {
  if (v.size() != policy.num_params()) throw std::invalid_argument("fisher_vector_product: vector length mismatch");
  return policy.fisher(theta, states)->apply(v) + damping * v;
}

namespace {

Matrix strided_columns(const Matrix& m, int stride) {
  if (stride <= 1) return m;
  const Index n = (m.cols() + stride - 1) / stride;
  Matrix out(m.rows(), n);
  for (Index i = 0; i < n; ++i) out.col(i) = m.col(i * stride);
  return out;
}

}  // namespace

TrpoResult trpo_step(const StochasticPolicy& policy, const Vector& theta_old, const AdvantageBatch& batch,
                     const OptimizerConfig& config) {
  config.validate();
  if (batch.size() == 0) throw std::invalid_argument("trpo_step: empty batch");

  TrpoResult res;
  res.params = theta_old;
  const Vector old_logp = policy.log_prob_batch(theta_old, batch.states, batch.actions);
  const SurrogateEval eval = surrogate_and_gradient(policy, theta_old, theta_old, batch);
  res.surrogate_before = eval.loss;
  res.surrogate_after = eval.loss;
  if (!eval.gradient.allFinite()) {
    res.diagnostic = "non-finite policy gradient; step rejected";
    return res;
  }
  if (eval.gradient.squaredNorm() == 0.0) {
    res.diagnostic = "zero policy gradient";
    return res;
  }

  const auto fisher = policy.fisher(theta_old, strided_columns(batch.states, config.fisher_stride));
  auto apply = [&](const Vector& v) { Vector out = fisher->apply(v); out += config.cg_damping * v; return out; };
  const CgResult cg = conjugate_gradient(apply, eval.gradient, config.cg_iters);
  res.cg_residual = cg.residual;

  const double curvature = cg.x.dot(apply(cg.x));
  if (!(curvature > 0.0) || !std::isfinite(curvature)) {
    res.diagnostic = "non-positive curvature along search direction; step rejected";
    return res;
  }
  const Vector full_step = std::sqrt(2.0 * config.kl_delta / curvature) * cg.x;

  double fraction = 1.0;
  for (int k = 0; k < config.max_backtracks; ++k, fraction *= config.backtrack_ratio) {
    const Vector candidate = theta_old + fraction * full_step;
    const double loss = surrogate(policy, candidate, old_logp, batch);
    const double kl = policy.mean_kl(theta_old, candidate, batch.states);
    if (std::isfinite(loss) && std::isfinite(kl) && kl <= config.kl_delta && loss > eval.loss) {
      res.params = candidate;
      res.accepted = true;
      res.kl = kl;
      res.surrogate_after = loss;
      res.backtracks = k;
      return res;
    }
  }
  res.backtracks = config.max_backtracks;
  res.diagnostic = "line search failed; parameters unchanged";
  return res;
}

UpdateStats optimize_policy(StochasticPolicy& policy, const std::vector<SingleAgentView>& views, double gamma,
                            const OptimizerConfig& config) {
  UpdateStats stats;
  double total = 0.0;
  double length = 0.0;
  for (const auto& v : views) {
    for (double r : v.rewards) total += r;
    length += static_cast<double>(v.size());
  }
  stats.mean_return = total / static_cast<double>(views.size());
  stats.mean_length = length / static_cast<double>(views.size());

  const auto baseline = fit_baseline(views, gamma, config.baseline);
  const AdvantageBatch batch = compute_advantages(views, baseline.get(), gamma, config.gae_lambda, true);
  stats.step = trpo_step(policy, policy.params(), batch, config);
  if (stats.step.accepted) policy.set_params(stats.step.params);
  return stats;
}

}  // namespace rarl
