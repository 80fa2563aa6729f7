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

#include "rarl/env.hpp"

#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rarl {

void EnvSpec::validate() const {
  if (obs_dim <= 0 || act1_dim <= 0 || act2_dim <= 0)
    throw std::invalid_argument("EnvSpec: dimensions must be positive");
  if (act1_lo.size() != act1_dim || act1_hi.size() != act1_dim || act2_lo.size() != act2_dim ||
      act2_hi.size() != act2_dim)
    throw std::invalid_argument("EnvSpec: bound sizes do not match action dimensions");
  if (!act1_lo.allFinite() || !act1_hi.allFinite() || !act2_lo.allFinite() || !act2_hi.allFinite())
    throw std::invalid_argument("EnvSpec: bounds must be finite");
  if ((act1_lo.array() >= act1_hi.array()).any())
    throw std::invalid_argument("EnvSpec: protagonist bounds need lo < hi");
  if ((act2_lo.array() > act2_hi.array()).any())
    throw std::invalid_argument("EnvSpec: adversary bounds need lo <= hi");
  if (horizon <= 0) throw std::invalid_argument("EnvSpec: horizon must be positive");
  if (obs_scale.size() != 0 &&
      (obs_scale.size() != obs_dim || !obs_scale.allFinite() || (obs_scale.array() <= 0.0).any()))
    throw std::invalid_argument("EnvSpec: obs_scale needs obs_dim positive finite entries");
  if (!(discount > 0.0 && discount <= 1.0)) throw std::invalid_argument("EnvSpec: discount must be in (0, 1]");
}

void Trajectory::validate() const {
  if (steps.size() > static_cast<std::size_t>(horizon)) throw std::logic_error("trajectory longer than horizon");
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const auto& s = steps[t];
    if (s.terminal && t + 1 != steps.size()) throw std::logic_error("terminal step is not the last step");
    if (s.reward2 != -s.reward1) throw std::logic_error("reward2 != -reward1");
    if (t + 1 < steps.size() && s.next_state != steps[t + 1].state)
      throw std::logic_error("next_state does not chain into the following state");
  }
}

SingleAgentView split(const Trajectory& trajectory, Player player) {
  if (trajectory.empty()) throw std::invalid_argument("split: empty trajectory");
  SingleAgentView view;
  const auto n = trajectory.size();
  view.states.reserve(n);
  view.actions.reserve(n);
  view.rewards.reserve(n);
  const bool first = player == Player::protagonist;
  for (const auto& s : trajectory.steps) {
    view.states.push_back(s.state);
    view.actions.push_back(first ? s.action1 : s.action2);
    view.rewards.push_back(first ? s.reward1 : s.reward2);
  }
  view.final_state = trajectory.steps.back().next_state;
  view.terminated = trajectory.terminated();
  view.horizon = trajectory.horizon;
  return view;
}

double discounted_return(const std::vector<double>& rewards, double gamma) {
  // Horner form: r0 + g(r1 + g(r2 + ...)).
  double acc = 0.0;
  for (auto it = rewards.rbegin(); it != rewards.rend(); ++it) acc = *it + gamma * acc;
  return acc;
}

double discounted_return(const SingleAgentView& view, double gamma) { return discounted_return(view.rewards, gamma); }

std::vector<double> rewards_to_go(const std::vector<double>& rewards, double gamma) {
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    out[i] = acc;
  }
  return out;
}

Vector clamp_to_box(const Vector& action, const Vector& lo, const Vector& hi) {
  return action.cwiseMax(lo).cwiseMin(hi);
}

Environment::Environment(EnvSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

Vector Environment::reset(std::uint64_t seed) {
  rng_ = Rng(derive_seed(seed, {0x5eedULL}));
  Rng init(derive_seed(seed, {0x1417ULL}));
  state_ = initial_state(init);
  clock_ = 0;
  done_ = false;
  return state_;
}

StepResult Environment::step(const Vector& action1, const Vector& action2) {
  if (done_) throw std::logic_error("step() called on a finished episode; call reset() first");
  if (action1.size() != spec_.act1_dim || action2.size() != spec_.act2_dim)
    throw std::invalid_argument("step: action dimension mismatch");
  if (!action1.allFinite() || !action2.allFinite()) throw std::invalid_argument("step: non-finite action");

  const Vector a1 = clamp_to_box(action1, spec_.act1_lo, spec_.act1_hi);
  const Vector a2 = clamp_to_box(action2, spec_.act2_lo, spec_.act2_hi);
  Transition tr = transition(state_, a1, a2, rng_);

  StepResult out;
  out.reward1 = tr.reward;
  out.reward2 = -tr.reward;
  out.terminal = tr.terminal;
  ++clock_;
  out.truncated = !tr.terminal && clock_ >= spec_.horizon;
  done_ = out.terminal || out.truncated;
  state_ = tr.next_state;
  out.next_state = state_;
  return out;
}

Index trajectory_csv_columns(const EnvSpec& spec) { return 1 + spec.obs_dim + spec.act1_dim + spec.act2_dim + 2; }

namespace {

void write_row(std::ostream& out, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) out << ',' << v[i];
}

std::vector<double> parse_doubles(const std::string& line) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    out.push_back(std::stod(cell, &used));
    if (used != cell.size()) throw std::invalid_argument("bad number '" + cell + "'");
  }
  return out;
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  if (trajectory.empty()) throw std::invalid_argument("write_trajectory_csv: empty trajectory");
  const auto& first = trajectory.steps.front();
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  out << "# obs_dim=" << first.state.size() << " act1_dim=" << first.action1.size()
      << " act2_dim=" << first.action2.size() << " discount=" << trajectory.discount
      << " horizon=" << trajectory.horizon << '\n';
  out << "# final_state";
  write_row(out, trajectory.steps.back().next_state);
  out << '\n';
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    const auto& s = trajectory.steps[t];
    out << t;
    write_row(out, s.state);
    write_row(out, s.action1);
    write_row(out, s.action2);
    out << ',' << s.reward1 << ',' << (s.terminal ? 1 : 0) << '\n';
  }
  out.precision(old_precision);
}

Trajectory read_trajectory_csv(std::istream& in) {
  std::string line;
  Index obs = 0, a1 = 0, a2 = 0;
  Trajectory traj;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw std::invalid_argument("trajectory csv: missing header");
  {
    std::stringstream ss(line.substr(2));
    std::string kv;
    while (ss >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("trajectory csv: bad header field " + kv);
      const auto key = kv.substr(0, eq);
      const auto val = kv.substr(eq + 1);
      if (key == "obs_dim") obs = std::stol(val);
      else if (key == "act1_dim") a1 = std::stol(val);
      else if (key == "act2_dim") a2 = std::stol(val);
      else if (key == "discount") traj.discount = std::stod(val);
      else if (key == "horizon") traj.horizon = std::stoi(val);
      else throw std::invalid_argument("trajectory csv: unknown header field " + key);
    }
  }
  if (!std::getline(in, line) || line.rfind("# final_state", 0) != 0)
    throw std::invalid_argument("trajectory csv: missing final_state line");
  const auto fin = parse_doubles(line.substr(std::string("# final_state,").size()));
  if (static_cast<Index>(fin.size()) != obs) throw std::invalid_argument("trajectory csv: final_state has wrong width");

  const auto cols = static_cast<std::size_t>(1 + obs + a1 + a2 + 2);
  int lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto v = parse_doubles(line);
    if (v.size() != cols)
      throw std::invalid_argument("trajectory csv line " + std::to_string(lineno) + ": expected " +
                                  std::to_string(cols) + " columns, got " + std::to_string(v.size()));
    TwoPlayerStep s;
    std::size_t k = 1;
    auto take = [&](Index n) {
      Vector out(n);
      for (Index i = 0; i < n; ++i) out[i] = v[k++];
      return out;
    };
    s.state = take(obs);
    s.action1 = take(a1);
    s.action2 = take(a2);
    s.reward1 = v[k++];
    s.reward2 = -s.reward1;
    s.terminal = v[k] != 0.0;
    traj.steps.push_back(std::move(s));
  }
  for (std::size_t t = 0; t + 1 < traj.size(); ++t) traj.steps[t].next_state = traj.steps[t + 1].state;
  if (!traj.empty()) traj.steps.back().next_state = Eigen::Map<const Vector>(fin.data(), obs);
  return traj;
}

}  // namespace rarl
