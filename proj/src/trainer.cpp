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

#include "rarl/trainer.hpp"

#include "rarl/parallel.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rarl/game_oracle.hpp"

namespace rarl {

namespace {

constexpr std::uint64_t kInitTag = 0x1417;
constexpr std::uint64_t kRollTag = 0x4011;
constexpr std::uint64_t kAttackTag = 0xa77ac;

}  // namespace

void TrainConfig::validate() const {
  if (n_iter < 0) throw std::invalid_argument("train: n_iter must be >= 0");
  if (n_mu < 1 || n_nu < 1 || n_traj < 1) throw std::invalid_argument("train: n_mu, n_nu, n_traj must be >= 1");
  if (checkpoint_every < 0) throw std::invalid_argument("train: checkpoint_every must be >= 0");
  if (threads < 1) throw std::invalid_argument("train: threads must be >= 1");
  if (hidden.empty()) throw std::invalid_argument("train: policy needs at least one hidden layer");
  opt_mu.validate();
  opt_nu.validate();
  if (env_name != "tabular") env.validate();
}

TabularGame make_game(const GameConfig& c) {
  if (!c.path.empty()) {
    std::ifstream in(c.path);
    if (!in) throw std::runtime_error("cannot open game file: " + c.path);
    return read_game(in);
  }
  return make_tabular_game(c.seed, c.n_states, c.n_actions1, c.n_actions2, c.discount);
}

std::unique_ptr<Environment> make_environment(const TrainConfig& config) {
  if (config.env_name == "tabular") return std::make_unique<TabularGameEnv>(make_game(config.game), config.game.horizon);
  EnvPhysicsParams p = config.env;
  if (config.baseline_mode) p.adversary_force_cap = 0.0;
  return make_env(config.env_name, p);
}

std::unique_ptr<StochasticPolicy> make_player_policy(const TrainConfig& config, const EnvSpec& spec, Player player) {
  const std::uint64_t seed = derive_seed(config.seed, {kInitTag, static_cast<std::uint64_t>(player)});
  if (spec.name == "tabular") {
    const int n_actions = static_cast<int>(std::lround((player == Player::protagonist ? spec.act1_hi : spec.act2_hi)[0])) + 1;
    auto p = std::make_unique<SoftmaxTabularPolicy>(static_cast<int>(spec.obs_dim), n_actions);
    p->initialize(seed);
    return p;
  }
  const Index act = player == Player::protagonist ? spec.act1_dim : spec.act2_dim;
  auto p = std::make_unique<GaussianMlpPolicy>(spec.obs_dim, act, config.hidden);
  p->initialize(seed, config.init_log_std);
  if (config.scale_inputs && spec.obs_scale.size() == spec.obs_dim) p->set_input_scale(spec.obs_scale);
  return p;
}

std::uint64_t rollout_seed(std::uint64_t seed, int iteration, Player player, int inner) {
  return derive_seed(seed, {kRollTag, static_cast<std::uint64_t>(iteration), static_cast<std::uint64_t>(player),
                            static_cast<std::uint64_t>(inner)});
}

TrajectorySeeds trajectory_seeds(std::uint64_t rng_root, std::size_t index) {
  return {derive_seed(rng_root, {index, 0}), derive_seed(rng_root, {index, 1}), derive_seed(rng_root, {index, 2})};
}

std::vector<Trajectory> roll(const Environment& env, const StochasticPolicy& protagonist,
                             const StochasticPolicy* adversary, int n_traj, std::uint64_t rng_root, int threads) {
  const auto& spec = env.spec();
  if (protagonist.obs_dim() != spec.obs_dim || protagonist.act_dim() != spec.act1_dim)
    throw std::invalid_argument("roll: protagonist does not match environment dimensions");
  if (adversary && (adversary->obs_dim() != spec.obs_dim || adversary->act_dim() != spec.act2_dim))
    throw std::invalid_argument("roll: adversary does not match environment dimensions");
  if (n_traj < 1) throw std::invalid_argument("roll: n_traj must be >= 1");

  std::vector<Trajectory> out(static_cast<std::size_t>(n_traj));
  parallel_for(out.size(), threads, [&](std::size_t k) {
    const auto seeds = trajectory_seeds(rng_root, k);
    auto e = env.clone();
    Rng rng1(seeds.protagonist);
    Rng rng2(seeds.adversary);
    Trajectory traj;
    traj.discount = spec.discount;
    traj.horizon = spec.horizon;
    traj.steps.reserve(static_cast<std::size_t>(std::min(spec.horizon, 4096)));
    Vector state = e->reset(seeds.reset);
    const Vector zero2 = Vector::Zero(spec.act2_dim);
    while (true) {
      TwoPlayerStep step;
      step.state = state;
      step.action1 = protagonist.sample_action(state, rng1);
      step.action2 = adversary ? adversary->sample_action(state, rng2) : zero2;
      const StepResult r = e->step(step.action1, step.action2);
      step.reward1 = r.reward1;
      step.reward2 = r.reward2;
      step.next_state = r.next_state;
      step.terminal = r.terminal;
      state = r.next_state;
      traj.steps.push_back(std::move(step));
      if (r.terminal || r.truncated) break;
    }
    out[k] = std::move(traj);
  });
  return out;
}

std::string schedule_string(const std::vector<ScheduleEvent>& events) {
  std::ostringstream ss;
  for (std::size_t k = 0; k < events.size(); ++k) {
    const auto& e = events[k];
    if (k) ss << ' ';
    ss << 'i' << e.iteration << ':' << (e.player == Player::protagonist ? "mu" : "nu") << e.inner << 'x' << e.rollouts;
  }
  return ss.str();
}

namespace {

std::vector<SingleAgentView> split_all(const std::vector<Trajectory>& trajs, Player player) {
  std::vector<SingleAgentView> views;
  views.reserve(trajs.size());
  for (const auto& t : trajs) views.push_back(split(t, player));
  return views;
}

double mean_undiscounted(const std::vector<Trajectory>& trajs, Player player) {
  double total = 0.0;
  for (const auto& t : trajs)
    for (const auto& s : t.steps) total += player == Player::protagonist ? s.reward1 : s.reward2;
  return total / static_cast<double>(trajs.size());
}

/// Roll, split for `player`, and take one optimizer step on that player.
IterationStats update_phase(const Environment& env, StochasticPolicy& mu, StochasticPolicy& nu, bool adversary_active,
                            const OptimizerConfig& opt, const ScheduleEvent& event, std::uint64_t root, int threads,
                            const TrainHooks& hooks) {
  const Player player = event.player;
  const auto start = std::chrono::steady_clock::now();
  const auto trajs = roll(env, mu, adversary_active ? &nu : nullptr, event.rollouts, root, threads);
  if (hooks.on_rollouts) hooks.on_rollouts(event, trajs);
  StochasticPolicy& learner = player == Player::protagonist ? mu : nu;
  const UpdateStats u = optimize_policy(learner, split_all(trajs, player), env.spec().discount, opt);

  IterationStats s;
  s.player = player;
  s.mean_return1 = mean_undiscounted(trajs, Player::protagonist);
  s.mean_return2 = mean_undiscounted(trajs, Player::adversary);
  s.mean_length = u.mean_length;
  s.surrogate_before = u.step.surrogate_before;
  s.surrogate_after = u.step.surrogate_after;
  s.kl = u.step.kl;
  s.cg_residual = u.step.cg_residual;
  s.backtracks = u.step.backtracks;
  s.accepted = u.step.accepted;
  s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return s;
}

}  // namespace

TrainResult train(const TrainConfig& config, const TrainHooks& hooks, const Checkpoint* resume) {
  config.validate();
  const auto env = make_environment(config);
  TrainResult res;
  res.mu = make_player_policy(config, env->spec(), Player::protagonist);
  res.nu = make_player_policy(config, env->spec(), Player::adversary);

  int first = 1;
  if (resume) {
    if (resume->policies.size() != 2) throw std::invalid_argument("train: resume checkpoint must hold two policies");
    if (resume->seed != config.seed) throw std::invalid_argument("train: resume checkpoint seed differs from config");
    res.mu->set_params(resume->policies[0].params);
    res.nu->set_params(resume->policies[1].params);
    first = static_cast<int>(resume->iteration) + 1;
    res.iterations_completed = static_cast<int>(resume->iteration);
  }

  for (int i = first; i <= config.n_iter; ++i) {
    for (int j = 1; j <= config.n_mu; ++j) {
      const ScheduleEvent ev{i, Player::protagonist, j, config.n_traj};
      IterationStats s = update_phase(*env, *res.mu, *res.nu, !config.baseline_mode, config.opt_mu, ev,
                                      rollout_seed(config.seed, i, Player::protagonist, j), config.threads, hooks);
      s.iteration = i;
      s.inner = j;
      res.schedule.push_back(ev);
      res.history.push_back(s);
      if (hooks.on_update) hooks.on_update(s);
    }
    if (!config.baseline_mode) {
      for (int j = 1; j <= config.n_nu; ++j) {
        const ScheduleEvent ev{i, Player::adversary, j, config.n_traj};
        IterationStats s = update_phase(*env, *res.mu, *res.nu, true, config.opt_nu, ev,
                                        rollout_seed(config.seed, i, Player::adversary, j), config.threads, hooks);
        s.iteration = i;
        s.inner = j;
        res.schedule.push_back(ev);
        res.history.push_back(s);
        if (hooks.on_update) hooks.on_update(s);
      }
    }
    res.iterations_completed = i;
    if (hooks.on_iteration) hooks.on_iteration(i, res);
  }
  return res;
}

AttackResult train_adversary_only(const TrainConfig& config, const StochasticPolicy& protagonist, int iterations) {
  TrainConfig attack = config;
  attack.baseline_mode = false;
  attack.seed = derive_seed(config.seed, {kAttackTag});
  attack.validate();
  const auto env = make_environment(attack);
  AttackResult out;
  out.nu = make_player_policy(attack, env->spec(), Player::adversary);
  auto mu = protagonist.clone();
  for (int i = 1; i <= iterations; ++i) {
    IterationStats s = update_phase(*env, *mu, *out.nu, true, attack.opt_nu, {i, Player::adversary, 1, attack.n_traj},
                                    rollout_seed(attack.seed, i, Player::adversary, 1), attack.threads, {});
    s.iteration = i;
    s.inner = 1;
    out.history.push_back(s);
  }
  return out;
}

Checkpoint make_checkpoint(const TrainConfig& config, const TrainResult& state) {
  Checkpoint c;
  c.seed = config.seed;
  c.iteration = static_cast<std::uint64_t>(state.iterations_completed);
  c.policies.push_back(to_block(*state.mu));
  c.policies.push_back(to_block(*state.nu));
  return c;
}

}  // namespace rarl
