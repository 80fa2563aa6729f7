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

#include "rarl/policy.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rarl {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;
}

void StochasticPolicy::set_params(const Vector& params) {
  if (params.size() != num_params())
    throw std::invalid_argument("set_params: expected " + std::to_string(num_params()) + " parameters, got " +
                                std::to_string(params.size()));
  params_ = params;
}

void StochasticPolicy::check_state(const Vector& state) const {
  if (state.size() != obs_dim()) throw std::invalid_argument("policy: state dimension mismatch");
  if (!state.allFinite()) throw std::invalid_argument("policy: non-finite state");
}

double StochasticPolicy::log_prob(const Vector& state, const Vector& action) const {
  return log_prob_batch(params_, state, action)[0];
}

Vector StochasticPolicy::grad_log_prob(const Vector& state, const Vector& action) const {
  return grad_weighted_log_prob(params_, state, action, Vector::Ones(1));
}

double StochasticPolicy::mean_kl(const Vector& params_old, const Vector& params_new, const Matrix& states) const {
  if (states.cols() == 0) throw std::invalid_argument("mean_kl: empty state batch");
  return kl_batch(params_old, params_new, states).mean();
}

// ---------------------------------------------------------------------------
// Gaussian MLP

GaussianMlpPolicy::GaussianMlpPolicy(Index obs_dim, Index act_dim, std::vector<Index> hidden)
    : obs_dim_(obs_dim), act_dim_(act_dim), hidden_(std::move(hidden)), net_(obs_dim, hidden_, act_dim) {
  if (obs_dim <= 0 || act_dim <= 0) throw std::invalid_argument("GaussianMlpPolicy: dimensions must be positive");
  params_ = Vector::Zero(num_params());
  input_scale_ = Vector::Ones(obs_dim);
}

void GaussianMlpPolicy::set_input_scale(const Vector& scale) {
  if (scale.size() != obs_dim_ || !scale.allFinite() || (scale.array() <= 0.0).any())
    throw std::invalid_argument("GaussianMlpPolicy: input scale must have obs_dim positive finite entries");
  input_scale_ = scale;
  unit_scale_ = (scale.array() == 1.0).all();
}

Matrix GaussianMlpPolicy::scaled(const Matrix& states) const {
  if (unit_scale_) return states;
  return (states.array().colwise() / input_scale_.array()).matrix();
}

void GaussianMlpPolicy::initialize(std::uint64_t seed, double init_log_std) {
  Rng rng(seed);
  net_.init(params_.head(net_.num_params()), rng, 0.01);
  params_.tail(act_dim_).setConstant(init_log_std);
}

std::unique_ptr<StochasticPolicy> GaussianMlpPolicy::clone() const {
  return std::make_unique<GaussianMlpPolicy>(*this);
}

Vector GaussianMlpPolicy::mean_action(const Vector& state) const {
  check_state(state);
  return net_.forward(params_.head(net_.num_params()), Vector(scaled(state)));
}

Vector GaussianMlpPolicy::sample_action(const Vector& state, Rng& rng) const {
  Vector a = mean_action(state);
  const Vector sigma = params_.tail(act_dim_).cwiseMax(kMinLogStd).cwiseMin(kMaxLogStd).array().exp();
  for (Index d = 0; d < act_dim_; ++d) a[d] += sigma[d] * rng.normal();
  return a;
}

Vector GaussianMlpPolicy::log_prob_batch(const Vector& params, const Matrix& states, const Matrix& actions) const {
  const Matrix mean = net_.forward_batch(params.head(net_.num_params()), scaled(states));
  const Vector log_std = params.tail(act_dim_);
  const Eigen::ArrayXd inv_std = (-log_std).array().exp();
  const Matrix z = ((actions - mean).array().colwise() * inv_std).matrix();
  return (-0.5 * z.colwise().squaredNorm().array() - log_std.sum() - act_dim_ * kHalfLog2Pi).matrix().transpose();
}

Vector GaussianMlpPolicy::grad_weighted_log_prob(const Vector& params, const Matrix& states, const Matrix& actions,
                                                 const Vector& weights) const {
  const Index n_net = net_.num_params();
  Mlp<double>::Cache cache;
  const Matrix mean = net_.forward_batch(params.head(n_net), scaled(states), &cache);
  const Vector log_std = params.tail(act_dim_);
  const Eigen::ArrayXd inv_var = (-2.0 * log_std).array().exp();
  const Matrix diff = actions - mean;

  // d/dmean = (a - m) / sigma^2, d/dlog_std = (a - m)^2 / sigma^2 - 1.
  Matrix d_mean = (diff.array().colwise() * inv_var).matrix();
  d_mean.array().rowwise() *= weights.transpose().array();

  Vector grad = Vector::Zero(num_params());
  net_.backward(params.head(n_net), cache, d_mean, grad.head(n_net));
  const Matrix sq = (diff.array().square().colwise() * inv_var - 1.0).matrix();
  grad.tail(act_dim_) = sq * weights;
  return grad;
}

Vector GaussianMlpPolicy::kl_batch(const Vector& params_old, const Vector& params_new, const Matrix& states) const {
  const Index n_net = net_.num_params();
  const Matrix m_old = net_.forward_batch(params_old.head(n_net), scaled(states));
  const Matrix m_new = net_.forward_batch(params_new.head(n_net), scaled(states));
  const Eigen::ArrayXd ls_old = params_old.tail(act_dim_).array();
  const Eigen::ArrayXd ls_new = params_new.tail(act_dim_).array();
  const Eigen::ArrayXd inv_var_new = (-2.0 * ls_new).exp();
  // written in the log-ratio d so that equal parameters give exactly zero
  const Eigen::ArrayXd d = ls_new - ls_old;
  const double const_part = (d + 0.5 * (-2.0 * d).unaryExpr([](double x) { return std::expm1(x); })).sum();
  const Matrix quad = ((m_old - m_new).array().square().colwise() * (0.5 * inv_var_new)).matrix();
  return (quad.colwise().sum().array() + const_part).matrix().transpose();
}

namespace {

/// Gaussian Fisher with state-independent log_std:
///   F = mean_i J_i^T diag(1/sigma^2) J_i  on the mean block,  2 I  on log_std.
class GaussianFisher final : public FisherOperator {
 public:
  GaussianFisher(const GaussianMlpPolicy& policy, const Vector& params, const Matrix& states)
      : policy_(policy), params_(params) {
    policy.net().forward_batch(params_.head(policy.net().num_params()), policy.scaled(states), &cache_);
    inv_var_ = (-2.0 * params_.tail(policy.act_dim())).array().exp();
    n_ = static_cast<double>(states.cols());
  }

  Vector apply(const Vector& v) const override {
    const auto& net = policy_.net();
    const Index n_net = net.num_params();
    Matrix jv = net.jvp(params_.head(n_net), cache_, v.head(n_net));
    jv.array().colwise() *= inv_var_ / n_;
    Vector out = Vector::Zero(v.size());
    net.backward(params_.head(n_net), cache_, jv, out.head(n_net));
    out.tail(policy_.act_dim()) = 2.0 * v.tail(policy_.act_dim());
    return out;
  }

 private:
  const GaussianMlpPolicy& policy_;
  Vector params_;
  Mlp<double>::Cache cache_;
  Eigen::ArrayXd inv_var_;
  double n_ = 1.0;
};

}  // namespace

std::unique_ptr<FisherOperator> GaussianMlpPolicy::fisher(const Vector& params, const Matrix& states) const {
  if (states.cols() == 0) throw std::invalid_argument("fisher: empty state batch");
  return std::make_unique<GaussianFisher>(*this, params, states);
}

// ---------------------------------------------------------------------------
// Softmax tabular

SoftmaxTabularPolicy::SoftmaxTabularPolicy(int n_states, int n_actions) : n_states_(n_states), n_actions_(n_actions) {
  if (n_states < 1 || n_actions < 1) throw std::invalid_argument("SoftmaxTabularPolicy: dimensions must be >= 1");
  params_ = Vector::Zero(num_params());
}

void SoftmaxTabularPolicy::initialize(std::uint64_t seed, double scale) {
  Rng rng(seed);
  for (Index i = 0; i < params_.size(); ++i) params_[i] = rng.uniform(-scale, scale);
}

std::unique_ptr<StochasticPolicy> SoftmaxTabularPolicy::clone() const {
  return std::make_unique<SoftmaxTabularPolicy>(*this);
}

int SoftmaxTabularPolicy::state_of(const Eigen::Ref<const Vector>& obs) const {
  Index k = 0;
  obs.maxCoeff(&k);
  return static_cast<int>(k);
}

int SoftmaxTabularPolicy::action_of(double a) const {
  const auto k = static_cast<int>(std::lround(a));
  if (k < 0 || k >= n_actions_) throw std::invalid_argument("SoftmaxTabularPolicy: action index out of range");
  return k;
}

Vector SoftmaxTabularPolicy::probabilities(const Vector& params, int s) const {
  const Vector logits = params.segment(static_cast<Index>(s) * n_actions_, n_actions_);
  const Eigen::ArrayXd e = (logits.array() - logits.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

Matrix SoftmaxTabularPolicy::strategy() const {
  Matrix out(n_states_, n_actions_);
  for (int s = 0; s < n_states_; ++s) out.row(s) = probabilities(params_, s).transpose();
  return out;
}

Vector SoftmaxTabularPolicy::sample_action(const Vector& state, Rng& rng) const {
  check_state(state);
  const Vector p = probabilities(params_, state_of(state));
  const double u = rng.uniform();
  double acc = 0.0;
  int a = n_actions_ - 1;
  for (int k = 0; k < n_actions_; ++k) {
    acc += p[k];
    if (u < acc) {
      a = k;
      break;
    }
  }
  return Vector::Constant(1, a);
}

Vector SoftmaxTabularPolicy::mean_action(const Vector& state) const {
  check_state(state);
  Index k = 0;
  probabilities(params_, state_of(state)).maxCoeff(&k);
  return Vector::Constant(1, static_cast<double>(k));
}

Vector SoftmaxTabularPolicy::log_prob_batch(const Vector& params, const Matrix& states, const Matrix& actions) const {
  Vector out(states.cols());
  for (Index i = 0; i < states.cols(); ++i) {
    const int s = state_of(states.col(i));
    const Vector logits = params.segment(static_cast<Index>(s) * n_actions_, n_actions_);
    const double mx = logits.maxCoeff();
    const double lse = mx + std::log((logits.array() - mx).exp().sum());
    out[i] = logits[action_of(actions(0, i))] - lse;
  }
  return out;
}

Vector SoftmaxTabularPolicy::grad_weighted_log_prob(const Vector& params, const Matrix& states, const Matrix& actions,
                                                    const Vector& weights) const {
  Vector grad = Vector::Zero(num_params());
  for (Index i = 0; i < states.cols(); ++i) {
    const int s = state_of(states.col(i));
    auto block = grad.segment(static_cast<Index>(s) * n_actions_, n_actions_);
    block -= weights[i] * probabilities(params, s);
    block[action_of(actions(0, i))] += weights[i];
  }
  return grad;
}

Vector SoftmaxTabularPolicy::kl_batch(const Vector& params_old, const Vector& params_new, const Matrix& states) const {
  Vector per_state(n_states_);
  for (int s = 0; s < n_states_; ++s) {
    const Vector p = probabilities(params_old, s);
    const Vector q = probabilities(params_new, s);
    double kl = 0.0;
    for (int a = 0; a < n_actions_; ++a)
      if (p[a] > 0.0) kl += p[a] * (std::log(p[a]) - std::log(q[a]));
    per_state[s] = kl;
  }
  Vector out(states.cols());
  for (Index i = 0; i < states.cols(); ++i) out[i] = per_state[state_of(states.col(i))];
  return out;
}

namespace {

/// Per-state softmax Fisher blocks diag(p) - p p^T, weighted by visit frequency.
class SoftmaxFisher final : public FisherOperator {
 public:
  SoftmaxFisher(const SoftmaxTabularPolicy& policy, const Vector& params, const Vector& weights)
      : n_actions_(policy.n_actions()), weights_(weights) {
    for (int s = 0; s < policy.n_states(); ++s) probs_.push_back(policy.probabilities(params, s));
  }

  Vector apply(const Vector& v) const override {
    Vector out = Vector::Zero(v.size());
    for (std::size_t s = 0; s < probs_.size(); ++s) {
      if (weights_[static_cast<Index>(s)] == 0.0) continue;
      const auto& p = probs_[s];
      const auto vs = v.segment(static_cast<Index>(s) * n_actions_, n_actions_);
      out.segment(static_cast<Index>(s) * n_actions_, n_actions_) =
          weights_[static_cast<Index>(s)] * (p.cwiseProduct(vs) - p * p.dot(vs));
    }
    return out;
  }

 private:
  int n_actions_;
  Vector weights_;
  std::vector<Vector> probs_;
};

}  // namespace

std::unique_ptr<FisherOperator> SoftmaxTabularPolicy::fisher(const Vector& params, const Matrix& states) const {
  if (states.cols() == 0) throw std::invalid_argument("fisher: empty state batch");
  Vector freq = Vector::Zero(n_states_);
  for (Index i = 0; i < states.cols(); ++i) freq[state_of(states.col(i))] += 1.0;
  freq /= static_cast<double>(states.cols());
  return std::make_unique<SoftmaxFisher>(*this, params, freq);
}

// ---------------------------------------------------------------------------
// Checkpoints

PolicyBlock to_block(const StochasticPolicy& policy) {
  PolicyBlock b;
  b.kind = policy.kind();
  b.params = policy.params();
  if (const auto* g = dynamic_cast<const GaussianMlpPolicy*>(&policy)) {
    b.obs_dim = static_cast<std::uint32_t>(g->obs_dim());
    b.act_dim = static_cast<std::uint32_t>(g->act_dim());
    for (auto h : g->hidden()) b.hidden.push_back(static_cast<std::uint32_t>(h));
    b.input_scale = g->input_scale();
  } else if (const auto* t = dynamic_cast<const SoftmaxTabularPolicy*>(&policy)) {
    b.obs_dim = static_cast<std::uint32_t>(t->n_states());
    b.act_dim = static_cast<std::uint32_t>(t->n_actions());
  } else {
    throw std::invalid_argument("to_block: unsupported policy type");
  }
  return b;
}

std::unique_ptr<StochasticPolicy> from_block(const PolicyBlock& b) {
  std::unique_ptr<StochasticPolicy> p;
  if (b.kind == PolicyKind::gaussian_mlp) {
    std::vector<Index> hidden(b.hidden.begin(), b.hidden.end());
    auto g = std::make_unique<GaussianMlpPolicy>(b.obs_dim, b.act_dim, hidden);
    if (b.input_scale.size() > 0) g->set_input_scale(b.input_scale);
    p = std::move(g);
  } else if (b.kind == PolicyKind::tabular_softmax) {
    p = std::make_unique<SoftmaxTabularPolicy>(static_cast<int>(b.obs_dim), static_cast<int>(b.act_dim));
  } else {
    throw std::invalid_argument("from_block: unknown policy kind");
  }
  p->set_params(b.params);
  return p;
}

namespace {

constexpr char kMagic[8] = {'R', 'A', 'R', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 2;

template <typename T>
void put(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) { put(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw std::runtime_error("checkpoint truncated at byte " + std::to_string(pos_));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& c) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.policies.size()));
  put<std::uint64_t>(out, c.seed);
  put<std::uint64_t>(out, c.iteration);
  for (const auto& b : c.policies) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(b.kind));
    put<std::uint32_t>(out, b.obs_dim);
    put<std::uint32_t>(out, b.act_dim);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(b.hidden.size()));
    for (auto h : b.hidden) put<std::uint32_t>(out, h);
    if (b.kind == PolicyKind::gaussian_mlp) {
      const Vector scale = b.input_scale.size() > 0 ? b.input_scale : Vector::Ones(b.obs_dim);
      if (scale.size() != static_cast<Index>(b.obs_dim)) throw std::invalid_argument("encode_checkpoint: input scale size");
      for (Index i = 0; i < scale.size(); ++i) put_f64(out, scale[i]);
    }
    put<std::uint64_t>(out, static_cast<std::uint64_t>(b.params.size()));
    for (Index i = 0; i < b.params.size(); ++i) put_f64(out, b.params[i]);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 32 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file (bad magic)");
  Reader r(bytes);
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) r.get<std::uint8_t>();
  if (const auto v = r.get<std::uint32_t>(); v != kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(v));
  const auto n = r.get<std::uint32_t>();
  Checkpoint c;
  c.seed = r.get<std::uint64_t>();
  c.iteration = r.get<std::uint64_t>();
  for (std::uint32_t k = 0; k < n; ++k) {
    PolicyBlock b;
    b.kind = static_cast<PolicyKind>(r.get<std::uint32_t>());
    b.obs_dim = r.get<std::uint32_t>();
    b.act_dim = r.get<std::uint32_t>();
    const auto n_hidden = r.get<std::uint32_t>();
    for (std::uint32_t h = 0; h < n_hidden; ++h) b.hidden.push_back(r.get<std::uint32_t>());
    if (b.kind == PolicyKind::gaussian_mlp) {
      if (b.obs_dim > r.remaining() / 8) throw std::runtime_error("checkpoint truncated in input scale");
      b.input_scale.resize(b.obs_dim);
      for (Index i = 0; i < b.input_scale.size(); ++i) b.input_scale[i] = r.get_f64();
    }
    const auto n_params = r.get<std::uint64_t>();
    if (n_params > r.remaining() / 8) throw std::runtime_error("checkpoint truncated in parameter block");
    b.params.resize(static_cast<Index>(n_params));
    for (Index i = 0; i < b.params.size(); ++i) b.params[i] = r.get_f64();
    c.policies.push_back(std::move(b));
  }
  if (r.remaining() != 0) throw std::runtime_error("trailing bytes after checkpoint");
  return c;
}

void write_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + tmp);
    const auto bytes = encode_checkpoint(checkpoint);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing checkpoint: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("failed to move checkpoint into place: " + path + ": " + ec.message());
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace rarl
