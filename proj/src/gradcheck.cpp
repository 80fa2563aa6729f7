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

#include "rarl/gradcheck.hpp"

#include "rarl/optimizer.hpp"
#include "rarl/policy.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>

namespace rarl {

namespace {

constexpr double kGradStep = 1e-5;
constexpr double kGradTol = 1e-4;
constexpr double kHvpStep = 1e-4;
constexpr double kHvpTol = 1e-3;

double rel_error(const Vector& a, const Vector& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-8});
  return (a - b).norm() / scale;
}

Vector random_vector(Index n, Rng& rng, double scale = 1.0) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
  Vector g(x.size());
  Vector y = x;
  for (Index i = 0; i < x.size(); ++i) {
    y[i] = x[i] + h;
    const double up = f(y);
    y[i] = x[i] - h;
    const double down = f(y);
    y[i] = x[i];
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

/// F v from second differences of the mean KL, one coordinate at a time:
/// (F v)_i = (q(e_i + v) - q(e_i - v)) / 4 with q(u) = u'Fu.
Vector hvp_by_differences(const StochasticPolicy& p, const Vector& theta, const Matrix& states, const Vector& v) {
  auto q = [&](const Vector& u) {
    return (p.kl_batch(theta, theta + kHvpStep * u, states).mean() + p.kl_batch(theta, theta - kHvpStep * u, states).mean()) /
           (kHvpStep * kHvpStep);
  };
  Vector out(theta.size());
  Vector e = Vector::Zero(theta.size());
  for (Index i = 0; i < theta.size(); ++i) {
    e[i] = 1.0;
    out[i] = (q(e + v) - q(e - v)) / 4.0;
    e[i] = 0.0;
  }
  return out;
}

GaussianMlpPolicy gaussian(std::vector<Index> hidden, std::uint64_t seed, Rng& rng) {
  GaussianMlpPolicy p(4, 2, std::move(hidden));
  p.initialize(seed, rng.uniform(-1.0, 0.5));
  // a non-trivial input scale, as the pendulum uses
  p.set_input_scale((Vector(4) << 2.4, 1.0, 0.2, 1.0).finished());
  // move off the near-zero output layer of a fresh init
  p.set_params(p.params() + random_vector(p.num_params(), rng, 0.1));
  return p;
}

SoftmaxTabularPolicy softmax(Rng& rng) {
  SoftmaxTabularPolicy p(4, 3);
  p.set_params(random_vector(p.num_params(), rng));
  return p;
}

Vector one_hot(Index n, Index k) {
  Vector v = Vector::Zero(n);
  v[k] = 1.0;
  return v;
}

struct Check {
  std::string op;
  int probes;
  double tol;
  std::function<std::pair<Vector, Vector>(Rng&, int)> probe;  // (analytic, numeric)
};

std::vector<Check> checks(int n) {
  std::vector<Check> out;
  out.push_back({"gaussian_grad_log_prob", n, kGradTol, [](Rng& rng, int k) {
                   const auto p = gaussian({8, 8}, static_cast<std::uint64_t>(k), rng);
                   const Vector s = random_vector(4, rng), a = random_vector(2, rng, 1.5);
                   const Matrix S = s, A = a;
                   const Vector analytic = p.grad_weighted_log_prob(p.params(), S, A, Vector::Ones(1));
                   const Vector numeric = central_difference(
                       [&](const Vector& th) { return p.log_prob_batch(th, S, A)[0]; }, p.params(), kGradStep);
                   return std::pair{analytic, numeric};
                 }});
  // the production topology, on a random subset of coordinates
  out.push_back({"gaussian_grad_log_prob_64x64", std::max(1, n / 10), kGradTol, [](Rng& rng, int k) {
                   const auto p = gaussian({64, 64}, static_cast<std::uint64_t>(k), rng);
                   const Matrix S = random_vector(4, rng), A = random_vector(2, rng, 1.5);
                   const Vector g = p.grad_weighted_log_prob(p.params(), S, A, Vector::Ones(1));
                   Vector analytic(40), numeric(40);
                   Vector th = p.params();
                   for (Index j = 0; j < 40; ++j) {
                     const Index i = static_cast<Index>(rng.uniform(0.0, static_cast<double>(th.size()))) % th.size();
                     const double x = th[i];
                     th[i] = x + kGradStep;
                     const double up = p.log_prob_batch(th, S, A)[0];
                     th[i] = x - kGradStep;
                     const double down = p.log_prob_batch(th, S, A)[0];
                     th[i] = x;
                     analytic[j] = g[i];
                     numeric[j] = (up - down) / (2 * kGradStep);
                   }
                   return std::pair{analytic, numeric};
                 }});
  out.push_back({"surrogate_gradient", n, kGradTol, [](Rng& rng, int k) {
                   const auto p = gaussian({8, 8}, static_cast<std::uint64_t>(k), rng);
                   AdvantageBatch b;
                   b.states.resize(4, 6);
                   b.actions.resize(2, 6);
                   for (int i = 0; i < 6; ++i) {
                     b.states.col(i) = random_vector(4, rng);
                     b.actions.col(i) = p.sample_action(b.states.col(i), rng);
                   }
                   b.advantages = random_vector(6, rng);
                   b.raw_advantages = b.advantages;
                   b.returns = Vector::Zero(6);
                   const Vector theta_old = p.params();
                   const Vector theta = theta_old + random_vector(theta_old.size(), rng, 0.05);
                   const Vector old_lp = p.log_prob_batch(theta_old, b.states, b.actions);
                   const Vector analytic = surrogate_and_gradient(p, theta, theta_old, b).gradient;
                   const Vector numeric = central_difference(
                       [&](const Vector& th) { return surrogate(p, th, old_lp, b); }, theta, kGradStep);
                   return std::pair{analytic, numeric};
                 }});
  out.push_back({"fisher_vector_product", std::max(1, n / 5), kHvpTol, [](Rng& rng, int k) {
                   const auto p = gaussian({6, 6}, static_cast<std::uint64_t>(k), rng);
                   Matrix S(4, 10);
                   for (Index i = 0; i < 10; ++i) S.col(i) = random_vector(4, rng);
                   const Vector v = random_vector(p.num_params(), rng);
                   const Vector analytic = fisher_vector_product(p, p.params(), S, v, 0.0);
                   return std::pair{analytic, hvp_by_differences(p, p.params(), S, v)};
                 }});
  out.push_back({"softmax_grad_log_prob", n, kGradTol, [](Rng& rng, int) {
                   const auto p = softmax(rng);
                   const Index s = static_cast<Index>(rng.uniform(0.0, 4.0)) % 4;
                   const Matrix S = one_hot(4, s);
                   Matrix A(1, 1);
                   A(0, 0) = static_cast<double>(static_cast<int>(rng.uniform(0.0, 3.0)) % 3);
                   const Vector analytic = p.grad_weighted_log_prob(p.params(), S, A, Vector::Ones(1));
                   const Vector numeric = central_difference(
                       [&](const Vector& th) { return p.log_prob_batch(th, S, A)[0]; }, p.params(), kGradStep);
                   return std::pair{analytic, numeric};
                 }});
  out.push_back({"softmax_fisher_vector_product", std::max(1, n / 5), kHvpTol, [](Rng& rng, int) {
                   const auto p = softmax(rng);
                   Matrix S(4, 8);
                   for (Index i = 0; i < 8; ++i) S.col(i) = one_hot(4, i % 4);
                   const Vector v = random_vector(p.num_params(), rng);
                   const Vector analytic = fisher_vector_product(p, p.params(), S, v, 0.0);
                   return std::pair{analytic, hvp_by_differences(p, p.params(), S, v)};
                 }});
  return out;
}

}  // namespace

std::vector<std::string> gradcheck_ops() {
  std::vector<std::string> names;
  for (const auto& c : checks(1)) names.push_back(c.op);
  return names;
}

std::vector<ProbeResult> run_gradcheck(const GradcheckOptions& options) {
  if (options.probes < 1) throw std::invalid_argument("gradcheck: probes must be >= 1");
  const auto all = checks(options.probes);
  if (!options.perturb.empty() &&
      std::none_of(all.begin(), all.end(), [&](const Check& c) { return c.op == options.perturb; }))
    throw std::invalid_argument("gradcheck: unknown op '" + options.perturb + "'");
  std::vector<ProbeResult> out;
  std::uint64_t tag = 0;
  for (const auto& c : all) {
    Rng rng(derive_seed(options.seed, {0x9c4ec, tag++}));
    ProbeResult r;
    r.op = c.op;
    r.probes = c.probes;
    r.tolerance = c.tol;
    for (int k = 0; k < c.probes; ++k) {
      auto [analytic, numeric] = c.probe(rng, k);
      if (c.op == options.perturb) analytic[0] += 1e-2 * (1.0 + std::abs(analytic[0]));
      r.max_rel_error = std::max(r.max_rel_error, rel_error(analytic, numeric));
    }
    r.passed = r.max_rel_error < r.tolerance;
    out.push_back(r);
  }
  return out;
}

}  // namespace rarl
