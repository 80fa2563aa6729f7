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

#include "rarl/game_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rarl {

namespace {

constexpr double kPivotEps = 1e-12;

/// max c^T y  s.t.  A y <= b, y >= 0, with b >= 0 (origin feasible).
/// Returns primal y, dual x (the slack reduced costs) and the objective.
struct LpResult {
  Vector primal;
  Vector dual;
  double objective = 0.0;
};

LpResult simplex_max(const Matrix& a, const Vector& b, const Vector& c) {
  const Index m = a.rows();
  const Index n = a.cols();
  Matrix t = Matrix::Zero(m + 1, n + m + 1);
  t.topLeftCorner(m, n) = a;
  t.block(0, n, m, m).setIdentity();
  t.topRightCorner(m, 1) = b;
  t.bottomLeftCorner(1, n) = -c.transpose();
  std::vector<Index> basis(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) basis[static_cast<std::size_t>(i)] = n + i;

  const Index rhs = n + m;
  // Bland's rule: lowest-index entering column, lowest-index basic variable on ratio ties.
  for (int guard = 0; guard < 100000; ++guard) {
    Index enter = -1;
    for (Index j = 0; j < n + m; ++j)
      if (t(m, j) < -kPivotEps) {
        enter = j;
        break;
      }
    if (enter < 0) break;

    Index leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < m; ++i) {
      if (t(i, enter) <= kPivotEps) continue;
      const double ratio = t(i, rhs) / t(i, enter);
      if (ratio < best - kPivotEps ||
          (std::abs(ratio - best) <= kPivotEps && leave >= 0 &&
           basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
        best = ratio;
        leave = i;
      }
    }
    if (leave < 0) throw std::runtime_error("simplex: unbounded program");

    t.row(leave) /= t(leave, enter);
    for (Index i = 0; i <= m; ++i)
      if (i != leave && t(i, enter) != 0.0) t.row(i) -= t(i, enter) * t.row(leave);
    basis[static_cast<std::size_t>(leave)] = enter;
  }

  LpResult r;
  r.primal = Vector::Zero(n);
  for (Index i = 0; i < m; ++i)
    if (basis[static_cast<std::size_t>(i)] < n) r.primal[basis[static_cast<std::size_t>(i)]] = t(i, rhs);
  r.dual = t.block(m, n, 1, m).transpose().cwiseMax(0.0);
  r.objective = t(m, rhs);
  return r;
}

}  // namespace

MatrixGameSolution matrix_game_solve(const Matrix& payoff) {
  if (payoff.rows() < 1 || payoff.cols() < 1) throw std::invalid_argument("matrix_game_solve: empty matrix");
  if (!payoff.allFinite()) throw std::invalid_argument("matrix_game_solve: non-finite payoff");

  // Shift to a strictly positive game; the value shifts by the same amount.
  const double shift = 1.0 - payoff.minCoeff();
  const Matrix positive = payoff.array() + shift;
  const Index m = payoff.rows();
  const Index n = payoff.cols();

  // Column player: max sum y  s.t.  M y <= 1. Row player is the dual: min sum x  s.t.  M^T x >= 1.
  const LpResult lp = simplex_max(positive, Vector::Ones(m), Vector::Ones(n));
  const double primal = lp.primal.sum();
  const double dual = lp.dual.sum();

  MatrixGameSolution sol;
  sol.col_strategy = lp.primal / primal;
  sol.row_strategy = lp.dual / dual;
  sol.value = 1.0 / lp.objective - shift;
  sol.duality_gap = std::abs(primal - dual);
  return sol;
}

Matrix stage_matrix(const TabularGame& g, const Vector& values, int s) {
  Matrix q = g.reward[static_cast<std::size_t>(s)];
  for (int i = 0; i < g.n_actions1; ++i)
    for (int j = 0; j < g.n_actions2; ++j) q(i, j) += g.discount * g.next_distribution(s, i, j).dot(values);
  return q;
}

double bellman_saddle_residual(const TabularGame& g, const Vector& values) {
  double worst = 0.0;
  for (int s = 0; s < g.n_states; ++s)
    worst = std::max(worst, std::abs(matrix_game_solve(stage_matrix(g, values, s)).value - values[s]));
  return worst;
}

ShapleyResult shapley_value_iteration(const TabularGame& game, double tol, int max_iterations) {
  game.validate();
  if (!(game.discount < 1.0)) throw std::invalid_argument("shapley_value_iteration: discount must be < 1");
  if (!(tol > 0.0)) throw std::invalid_argument("shapley_value_iteration: tol must be > 0");

  ShapleyResult out;
  Vector v = Vector::Zero(game.n_states);
  for (int k = 0; k < max_iterations; ++k) {
    Vector next(game.n_states);
    for (int s = 0; s < game.n_states; ++s) next[s] = matrix_game_solve(stage_matrix(game, v, s)).value;
    const double delta = (next - v).cwiseAbs().maxCoeff();
    out.deltas.push_back(delta);
    v = std::move(next);
    out.iterations = k + 1;
    if (delta < tol) {
      out.values = v;
      for (int s = 0; s < game.n_states; ++s) {
        const auto sol = matrix_game_solve(stage_matrix(game, v, s));
        out.row_strategies.push_back(sol.row_strategy);
        out.col_strategies.push_back(sol.col_strategy);
      }
      return out;
    }
  }
  throw std::runtime_error("shapley_value_iteration: no convergence within iteration cap");
}

RiskStats cvar(const std::vector<double>& samples, double alpha) {
  if (samples.empty()) throw std::invalid_argument("cvar: no samples");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("cvar: alpha must be in (0, 1)");
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  const auto n = sorted.size();
  // Rank ceil(alpha N); the small offset keeps exact products like 0.1 * 100 at 10.
  auto rank = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, n);
  RiskStats r;
  r.alpha = alpha;
  r.quantile = sorted[rank - 1];
  double sum = 0.0;
  std::size_t count = 0;
  for (double x : sorted) {
    if (x > r.quantile) break;
    sum += x;
    ++count;
  }
  r.cvar = sum / static_cast<double>(count);
  return r;
}

namespace {

void check_strategy(const TabularGame& g, const Matrix& pi, int n_actions, const char* who) {
  if (pi.rows() != g.n_states || pi.cols() != n_actions)
    throw std::invalid_argument(std::string("equilibrium_gap: ") + who + " strategy has wrong shape");
}

/// Reward and transition matrix of the Markov chain induced by (mu, nu).
void induced_chain(const TabularGame& g, const Matrix& mu, const Matrix& nu, Vector& r, Matrix& p) {
  r = Vector::Zero(g.n_states);
  p = Matrix::Zero(g.n_states, g.n_states);
  for (int s = 0; s < g.n_states; ++s)
    for (int i = 0; i < g.n_actions1; ++i)
      for (int j = 0; j < g.n_actions2; ++j) {
        const double w = mu(s, i) * nu(s, j);
        if (w == 0.0) continue;
        r[s] += w * g.reward[static_cast<std::size_t>(s)](i, j);
        p.row(s) += w * g.next_distribution(s, i, j).transpose();
      }
}

/// Optimal value of the single-player MDP left when the opponent is fixed.
/// `maximize` selects the protagonist's view; otherwise the adversary minimizes.
Vector best_response_values(const TabularGame& g, const Matrix& fixed, bool maximize) {
  const int n_own = maximize ? g.n_actions1 : g.n_actions2;
  const int n_other = maximize ? g.n_actions2 : g.n_actions1;
  // Expected reward and successor distribution for each own action.
  std::vector<Vector> r(static_cast<std::size_t>(g.n_states), Vector::Zero(n_own));
  std::vector<Matrix> p(static_cast<std::size_t>(g.n_states), Matrix::Zero(n_own, g.n_states));
  for (int s = 0; s < g.n_states; ++s)
    for (int a = 0; a < n_own; ++a)
      for (int b = 0; b < n_other; ++b) {
        const double w = fixed(s, b);
        const int i = maximize ? a : b;
        const int j = maximize ? b : a;
        r[static_cast<std::size_t>(s)][a] += w * g.reward[static_cast<std::size_t>(s)](i, j);
        p[static_cast<std::size_t>(s)].row(a) += w * g.next_distribution(s, i, j).transpose();
      }

  const double scale = std::max(1.0, g.reward_range() / (1.0 - g.discount));
  Vector v = Vector::Zero(g.n_states);
  for (int k = 0; k < 1'000'000; ++k) {
    Vector next(g.n_states);
    for (int s = 0; s < g.n_states; ++s) {
      const Vector q = r[static_cast<std::size_t>(s)] + g.discount * p[static_cast<std::size_t>(s)] * v;
      next[s] = maximize ? q.maxCoeff() : q.minCoeff();
    }
    const double delta = (next - v).cwiseAbs().maxCoeff();
    v = std::move(next);
    if (delta < 1e-14 * scale) return v;
  }
  throw std::runtime_error("best response value iteration did not converge");
}

}  // namespace

Vector policy_values(const TabularGame& g, const Matrix& mu, const Matrix& nu) {
  check_strategy(g, mu, g.n_actions1, "protagonist");
  check_strategy(g, nu, g.n_actions2, "adversary");
  if (!(g.discount < 1.0)) throw std::invalid_argument("policy_values: discount must be < 1");
  Vector r;
  Matrix p;
  induced_chain(g, mu, nu, r, p);
  const Matrix a = Matrix::Identity(g.n_states, g.n_states) - g.discount * p;
  return a.partialPivLu().solve(r);
}

GapReport equilibrium_gap_report(const TabularGame& g, const Matrix& mu, const Matrix& nu) {
  const Vector v = policy_values(g, mu, nu);
  GapReport rep;
  rep.value = v[g.start_state];
  rep.best_response1 = best_response_values(g, nu, true)[g.start_state];
  rep.best_response2 = best_response_values(g, mu, false)[g.start_state];
  rep.gap = std::max({rep.best_response1 - rep.value, rep.value - rep.best_response2, 0.0});
  return rep;
}

double equilibrium_gap(const TabularGame& g, const Matrix& mu, const Matrix& nu) {
  return equilibrium_gap_report(g, mu, nu).gap;
}

double equilibrium_gap(const TabularGame& g, const SoftmaxTabularPolicy& mu, const SoftmaxTabularPolicy& nu) {
  return equilibrium_gap(g, mu.strategy(), nu.strategy());
}

// ---------------------------------------------------------------------------
// Text format

void write_game(std::ostream& out, const TabularGame& g) {
  g.validate();
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  out << "states " << g.n_states << "\nactions " << g.n_actions1 << ' ' << g.n_actions2 << "\nstart " << g.start_state
      << "\ndiscount " << g.discount << "\nreward\n";
  for (int s = 0; s < g.n_states; ++s) {
    out << "# state " << s << '\n';
    const auto& r = g.reward[static_cast<std::size_t>(s)];
    for (Index i = 0; i < r.rows(); ++i) {
      for (Index j = 0; j < r.cols(); ++j) out << (j ? " " : "") << r(i, j);
      out << '\n';
    }
  }
  out << "transition\n";
  for (const auto& p : g.transition) {
    for (Index k = 0; k < p.size(); ++k) out << (k ? " " : "") << p[k];
    out << '\n';
  }
  out.precision(old);
}

namespace {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  /// Next non-blank, non-comment line split into tokens. Throws at end of input.
  std::vector<std::string> next(const char* expecting) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      std::stringstream ss(line);
      std::vector<std::string> tokens;
      for (std::string tok; ss >> tok;) tokens.push_back(tok);
      return tokens;
    }
    fail(std::string("unexpected end of file, expected ") + expecting);
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw std::invalid_argument("game file line " + std::to_string(line_) + ": " + msg);
  }

  double number(const std::string& tok) const {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      fail("bad number '" + tok + "'");
    }
    if (used != tok.size()) fail("bad number '" + tok + "'");
    return v;
  }

  int integer(const std::string& tok) const {
    const double v = number(tok);
    if (v != std::floor(v)) fail("expected an integer, got '" + tok + "'");
    return static_cast<int>(v);
  }

  std::vector<std::string> keyed(const char* key, std::size_t n_values) {
    auto t = next(key);
    if (t.empty() || t[0] != key) fail(std::string("expected '") + key + "'");
    if (t.size() != n_values + 1) fail(std::string("'") + key + "' expects " + std::to_string(n_values) + " value(s)");
    return t;
  }

 private:
  std::istream& in_;
  int line_ = 0;
};

}  // namespace

TabularGame read_game(std::istream& in) {
  LineReader rd(in);
  TabularGame g;
  g.n_states = rd.integer(rd.keyed("states", 1)[1]);
  const auto acts = rd.keyed("actions", 2);
  g.n_actions1 = rd.integer(acts[1]);
  g.n_actions2 = rd.integer(acts[2]);
  if (g.n_states < 1 || g.n_actions1 < 1 || g.n_actions2 < 1) rd.fail("dimensions must be >= 1");
  g.start_state = rd.integer(rd.keyed("start", 1)[1]);
  if (g.start_state < 0 || g.start_state >= g.n_states) rd.fail("start state out of range");
  g.discount = rd.number(rd.keyed("discount", 1)[1]);
  if (!(g.discount > 0.0 && g.discount <= 1.0)) rd.fail("discount must be in (0, 1]");
  rd.keyed("reward", 0);
  for (int s = 0; s < g.n_states; ++s) {
    Matrix r(g.n_actions1, g.n_actions2);
    for (int i = 0; i < g.n_actions1; ++i) {
      const auto t = rd.next("reward row");
      if (static_cast<int>(t.size()) != g.n_actions2)
        rd.fail("reward row needs " + std::to_string(g.n_actions2) + " values");
      for (int j = 0; j < g.n_actions2; ++j) r(i, j) = rd.number(t[static_cast<std::size_t>(j)]);
    }
    g.reward.push_back(std::move(r));
  }
  rd.keyed("transition", 0);
  for (int k = 0; k < g.n_states * g.n_actions1 * g.n_actions2; ++k) {
    const auto t = rd.next("transition row");
    if (static_cast<int>(t.size()) != g.n_states) rd.fail("transition row needs " + std::to_string(g.n_states) + " values");
    Vector p(g.n_states);
    for (int s = 0; s < g.n_states; ++s) p[s] = rd.number(t[static_cast<std::size_t>(s)]);
    if ((p.array() < 0.0).any() || std::abs(p.sum() - 1.0) > 1e-9) rd.fail("transition row is not a distribution");
    if (std::abs(p.sum() - 1.0) > 1e-12) p /= p.sum();
    g.transition.push_back(std::move(p));
  }
  g.validate();
  return g;
}

}  // namespace rarl
