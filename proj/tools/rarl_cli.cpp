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

// rarl: train, evaluate and inspect adversarial policies.
//
// Exit codes: 0 success, 1 usage, config or input-file error, 2 runtime failure.

#include "rarl/config.hpp"
#include "rarl/eval.hpp"
#include "rarl/game_oracle.hpp"
#include "rarl/gradcheck.hpp"
#include "rarl/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#ifndef RARL_CODE_VERSION
#define RARL_CODE_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace rarl;

namespace {

/// Bad command line or unreadable/malformed input; exit code 1.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void write_table(const fs::path& path, const CsvTable& table) {
  std::ostringstream ss;
  write_csv(ss, table);
  write_file(path, ss.str());
}

std::string checkpoint_name(int iteration) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "iter_%06d.bin", iteration);
  return std::string("checkpoints/") + buf;
}

TabularGame load_game(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read game file " + path);
  try {
    return read_game(in);
  } catch (const std::invalid_argument& e) {
    throw InputError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string config;
  std::vector<std::string> sets;
  bool baseline = false;
  std::optional<std::uint64_t> seed;
  bool force = false;
  int threads = 1;
  std::string out;
  bool quiet = false;
};

fs::path default_run_dir(const ExperimentConfig& cfg) {
  const char* root = std::getenv("RARL_RUN_ROOT");
  const fs::path base = root && *root ? root : "runs";
  return base / (cfg.train.env_name + (cfg.train.baseline_mode ? "_baseline" : "_rarl") + "_seed" +
                 std::to_string(cfg.train.seed));
}

CsvTable stats_table(const std::vector<IterationStats>& history) {
  CsvTable t;
  t.comments = {"player: 1 protagonist, 2 adversary"};
  t.header = {"iteration",  "player",           "inner",           "mean_return1", "mean_return2",
              "mean_length", "surrogate_before", "surrogate_after", "kl",           "cg_residual",
              "backtracks", "accepted"};
  for (const auto& s : history)
    t.rows.push_back({double(s.iteration), double(static_cast<int>(s.player)), double(s.inner), s.mean_return1,
                      s.mean_return2, s.mean_length, s.surrogate_before, s.surrogate_after, s.kl, s.cg_residual,
                      double(s.backtracks), s.accepted ? 1.0 : 0.0});
  return t;
}

CsvTable timing_table(const std::vector<IterationStats>& history) {
  CsvTable t;
  t.header = {"iteration", "player", "inner", "wall_seconds"};
  for (const auto& s : history)
    t.rows.push_back({double(s.iteration), double(static_cast<int>(s.player)), double(s.inner), s.wall_seconds});
  return t;
}

int cmd_train(const TrainArgs& a) {
  std::vector<std::string> sets = a.sets;
  if (a.baseline) sets.push_back("train.baseline_mode=true");
  if (a.seed) sets.push_back("train.seed=" + std::to_string(*a.seed));
  ExperimentConfig cfg = a.config.empty() ? parse_config("", sets, "<defaults>") : load_config(a.config, sets);
  cfg.train.threads = a.threads;

  const fs::path dir = a.out.empty() ? default_run_dir(cfg) : fs::path(a.out);
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!a.force) throw InputError("run directory " + dir.string() + " exists; pass --force to overwrite");
    fs::remove_all(dir);
  }
  fs::create_directories(dir / "checkpoints");

  const std::string resolved = format_config(cfg);
  write_file(dir / "config.resolved", resolved);

  json manifest;
  manifest["format"] = 1;
  manifest["command"] = "train";
  manifest["code_version"] = RARL_CODE_VERSION;
  manifest["config"] = "config.resolved";
  manifest["config_fnv1a64"] = fnv1a64(resolved);
  manifest["reproduce"] = "rarl train --config config.resolved --out <dir>";
  manifest["env"] = cfg.train.env_name;
  manifest["mode"] = cfg.train.baseline_mode ? "baseline" : "rarl";
  manifest["seed"] = cfg.train.seed;
  manifest["status"] = "running";
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");

  std::vector<std::string> checkpoints;
  auto save = [&](int iteration, const TrainResult& state) {
    const std::string name = checkpoint_name(iteration);
    write_checkpoint((dir / name).string(), make_checkpoint(cfg.train, state));
    if (checkpoints.empty() || checkpoints.back() != name) checkpoints.push_back(name);
  };

  TrainHooks hooks;
  const int every = cfg.train.checkpoint_every;
  hooks.on_iteration = [&](int i, const TrainResult& state) {
    if (every > 0 && i % every == 0) save(i, state);
    if (!a.quiet && !state.history.empty()) {
      const auto& s = state.history.back();
      std::fprintf(stderr, "iter %d/%d  return %.3f  length %.1f\n", i, cfg.train.n_iter, s.mean_return1,
                   s.mean_length);
    }
  };
  TrainResult result = train(cfg.train, hooks);
  save(result.iterations_completed, result);

  write_table(dir / "stats.csv", stats_table(result.history));
  write_table(dir / "timing.csv", timing_table(result.history));

  manifest["status"] = "complete";
  manifest["iterations_completed"] = result.iterations_completed;
  manifest["checkpoints"] = checkpoints;
  manifest["final_checkpoint"] = checkpoints.back();
  manifest["stats"] = "stats.csv";
  manifest["timing"] = "timing.csv";
  if (cfg.train.env_name == "tabular") {
    const TabularGame game = make_game(cfg.train.game);
    const auto& mu = dynamic_cast<const SoftmaxTabularPolicy&>(*result.mu);
    const auto& nu = dynamic_cast<const SoftmaxTabularPolicy&>(*result.nu);
    manifest["equilibrium_gap"] = equilibrium_gap(game, mu, nu);
    manifest["shapley_value"] = shapley_value_iteration(game).values[game.start_state];
  }
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  std::cout << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string run_dir;
  std::vector<std::string> sets;
  std::string sweep;
  std::string against;
  std::string adversary = "none";
  bool attack = false;
  bool force_field = false;
  bool percentiles = false;
  std::vector<std::string> runs;
  std::string out;
  std::optional<int> episodes;
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

struct LoadedRun {
  ExperimentConfig cfg;
  std::unique_ptr<StochasticPolicy> mu;
  std::unique_ptr<StochasticPolicy> nu;
};

LoadedRun load_run(const fs::path& dir, const std::vector<std::string>& sets) {
  const fs::path cfg_path = dir / "config.resolved";
  if (!fs::exists(cfg_path)) throw InputError(dir.string() + " is not a run directory (no config.resolved)");
  LoadedRun run;
  run.cfg = load_config(cfg_path.string(), sets);
  fs::path ck = dir / checkpoint_name(run.cfg.train.n_iter);
  if (fs::exists(dir / "manifest.json")) {
    const json m = json::parse(read_file(dir / "manifest.json"), nullptr, false);
    if (!m.is_discarded() && m.contains("final_checkpoint")) ck = dir / m["final_checkpoint"].get<std::string>();
  }
  if (!fs::exists(ck)) throw std::runtime_error("missing checkpoint: expected " + ck.string());
  const Checkpoint c = read_checkpoint(ck.string());
  if (c.policies.size() != 2) throw std::runtime_error(ck.string() + ": expected two policies");
  run.mu = from_block(c.policies[0]);
  run.nu = from_block(c.policies[1]);
  return run;
}

EvalOptions eval_options(const ExperimentConfig& cfg, const EvalArgs& a) {
  EvalOptions o = cfg.eval_options(a.threads);
  if (a.episodes) o.n_episodes = *a.episodes;
  if (a.seed) o.seed = *a.seed;
  return o;
}

/// The nominal environment with the adversary enabled, whatever mode trained it.
TrainConfig disturbed(TrainConfig t) {
  t.baseline_mode = false;
  return t;
}

json stats_json(const EvalStats& s) {
  return json{{"mean", s.mean}, {"std", s.std}, {"cvar", s.risk.cvar}, {"alpha", s.risk.alpha},
              {"episodes", s.episodes}};
}

SweepGrid run_sweep(const std::string& kind, const StochasticPolicy& mu, const ExperimentConfig& cfg,
                    const EvalOptions& o) {
  const auto& t = cfg.train;
  if (kind == "mass") return mass_sweep(mu, t.env_name, t.env, cfg.mass_grid(), o);
  if (kind == "friction") return friction_sweep(mu, t.env_name, t.env, cfg.friction_grid(), o);
  return joint_sweep(mu, t.env_name, t.env, cfg.mass_grid(), cfg.friction_grid(), o);
}

std::vector<Vector> probe_states(const EnvSpec& spec, const std::string& env_name) {
  if (env_name == "pendulum") return pendulum_probe_states();
  std::vector<Vector> out{Vector::Zero(spec.obs_dim)};
  for (Index i = 0; i < spec.obs_dim; ++i)
    for (double sign : {1.0, -1.0}) {
      Vector s = Vector::Zero(spec.obs_dim);
      s[i] = sign;
      out.push_back(s);
    }
  return out;
}

int cmd_percentiles(const EvalArgs& a) {
  if (a.runs.empty()) throw InputError("--percentiles needs --runs DIR...");
  const fs::path out = a.out.empty() ? fs::path("percentiles") : fs::path(a.out);
  std::vector<double> finals;
  CsvTable finals_table;
  finals_table.header = {"run", "final_reward"};
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    const LoadedRun run = load_run(a.runs[i], a.sets);
    const EvalOptions o = eval_options(run.cfg, a);
    const EvalStats s = evaluate(*make_environment(run.cfg.train), *run.mu, o);
    finals.push_back(s.mean);
    finals_table.comments.push_back("run " + std::to_string(i) + " " + fs::path(a.runs[i]).filename().string());
    finals_table.rows.push_back({double(i), s.mean});
  }
  fs::create_directories(out);
  write_table(out / "percentiles.csv", percentile_table(percentile_curve(finals)));
  write_table(out / "final_rewards.csv", finals_table);
  write_plot_scripts(out.string());
  std::cout << (out / "percentiles.csv").string() << "\n";
  return 0;
}

int cmd_eval(const EvalArgs& a) {
  if (a.percentiles) return cmd_percentiles(a);
  if (a.run_dir.empty()) throw InputError("eval needs RUN_DIR (or --percentiles --runs ...)");
  if (!a.against.empty() && a.sweep.empty()) throw InputError("--against needs --sweep");

  const LoadedRun run = load_run(a.run_dir, a.sets);
  const ExperimentConfig& cfg = run.cfg;
  EvalOptions o = eval_options(cfg, a);
  const fs::path out = a.out.empty() ? fs::path(a.run_dir) / "eval" : fs::path(a.out);
  fs::create_directories(out);
  json report;
  report["run"] = fs::path(a.run_dir).filename().string();
  report["episodes"] = o.n_episodes;
  report["seed"] = o.seed;

  const bool nominal = a.sweep.empty() && !a.attack && !a.force_field;
  if (nominal) {
    if (a.adversary == "random")
      o.adversary = AdversaryMode::random;
    else if (a.adversary == "policy")
      o.adversary = AdversaryMode::policy, o.adversary_policy = run.nu.get();
    const auto env = make_environment(a.adversary == "none" ? cfg.train : disturbed(cfg.train));
    const EvalStats s = evaluate(*env, *run.mu, o);
    write_table(out / "returns.csv", returns_table(s));
    report["adversary"] = a.adversary;
    report["returns"] = stats_json(s);
  }
  if (!a.sweep.empty()) {
    const SweepGrid grid = run_sweep(a.sweep, *run.mu, cfg, o);
    write_table(out / (a.sweep + "_sweep.csv"), sweep_table(grid));
    report["sweep"] = a.sweep + "_sweep.csv";
    if (!a.against.empty()) {
      const LoadedRun other = load_run(a.against, a.sets);
      const SweepGrid b = run_sweep(a.sweep, *other.mu, cfg, o);
      write_table(out / (a.sweep + "_sweep_diff.csv"), sweep_difference_table(grid, b));
      report["sweep_diff"] = a.sweep + "_sweep_diff.csv";
    }
  }
  if (a.attack) {
    TrainConfig t = disturbed(cfg.train);
    t.threads = a.threads;
    const AttackReport r = attack_evaluation(t, *run.mu, cfg.eval.attack_iterations, o);
    CsvTable table;
    table.header = {"episode", "clean_return", "attacked_return"};
    for (std::size_t i = 0; i < r.clean.returns.size(); ++i)
      table.rows.push_back({double(i), r.clean.returns[i], r.attacked.returns[i]});
    write_table(out / "attack.csv", table);
    CsvTable history;
    history.header = {"iteration", "mean_return1", "mean_return2", "kl", "accepted"};
    for (const auto& s : r.attack_history)
      history.rows.push_back({double(s.iteration), s.mean_return1, s.mean_return2, s.kl, s.accepted ? 1.0 : 0.0});
    write_table(out / "attack_training.csv", history);
    report["attack"] = {{"clean", stats_json(r.clean)}, {"attacked", stats_json(r.attacked)}};
  }
  if (a.force_field) {
    if (cfg.train.env_name == "tabular") throw InputError("--force-field needs a continuous environment");
    const auto env = make_environment(disturbed(cfg.train));
    const EnvSpec spec = env->spec();
    write_table(out / "force_field.csv",
                force_table(force_field_export(*run.nu, spec, probe_states(spec, cfg.train.env_name))));
    report["force_field"] = "force_field.csv";
  }
  write_plot_scripts(out.string());
  std::cout << report.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// oracle, gen-game, gradcheck

int cmd_oracle(const std::string& path, double tol) {
  const TabularGame game = load_game(path);
  if (game.discount >= 1.0) throw InputError(path + ": discount must be < 1");
  const ShapleyResult r = shapley_value_iteration(game, tol);
  auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  json strategies1 = json::array(), strategies2 = json::array();
  for (const auto& s : r.row_strategies) strategies1.push_back(vec(s));
  for (const auto& s : r.col_strategies) strategies2.push_back(vec(s));
  json out;
  out["value"] = r.values[game.start_state];
  out["start_state"] = game.start_state;
  out["values"] = vec(r.values);
  out["protagonist_strategies"] = strategies1;
  out["adversary_strategies"] = strategies2;
  out["iterations"] = r.iterations;
  out["bellman_residual"] = bellman_saddle_residual(game, r.values);
  std::cout << out.dump(2) << "\n";
  return 0;
}

struct GenGameArgs {
  std::uint64_t seed = 0;
  int states = 5;
  int actions1 = 3;
  int actions2 = 3;
  double discount = 0.95;
  bool swap = false;
  std::string from;
  std::string out;
};

int cmd_gen_game(const GenGameArgs& a) {
  TabularGame game;
  if (!a.from.empty()) {
    game = load_game(a.from);
  } else {
    try {
      game = make_tabular_game(a.seed, a.states, a.actions1, a.actions2, a.discount);
    } catch (const std::invalid_argument& e) {
      throw InputError(e.what());
    }
  }
  if (a.swap) game = game.swapped();
  std::ostringstream ss;
  write_game(ss, game);
  if (a.out.empty())
    std::cout << ss.str();
  else
    write_file(a.out, ss.str());
  return 0;
}

int cmd_gradcheck(const GradcheckOptions& o) {
  std::vector<ProbeResult> results;
  try {
    results = run_gradcheck(o);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  bool ok = true;
  std::printf("%-32s %6s %14s %10s\n", "op", "probes", "max_rel_err", "tolerance");
  for (const auto& r : results) {
    std::printf("%-32s %6d %14.3e %10.1e %s\n", r.op.c_str(), r.probes, r.max_rel_error, r.tolerance,
                r.passed ? "PASS" : "FAIL");
    ok = ok && r.passed;
  }
  if (!ok) {
    for (const auto& r : results)
      if (!r.passed) std::fprintf(stderr, "gradcheck failed: %s\n", r.op.c_str());
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial policy training: train, eval, oracle, gradcheck, gen-game"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train protagonist and adversary (or a baseline)");
  train_cmd->add_option("--config", ta.config, "Experiment config file")->check(CLI::ExistingFile);
  train_cmd->add_option("--set", ta.sets, "Override section.key=value (repeatable)");
  train_cmd->add_flag("--baseline", ta.baseline, "Zero-strength adversary");
  train_cmd->add_option("--seed", ta.seed, "Training seed");
  train_cmd->add_flag("--force", ta.force, "Overwrite an existing run directory");
  train_cmd->add_option("--threads", ta.threads, "Rollout workers")->check(CLI::PositiveNumber);
  train_cmd->add_option("--out", ta.out, "Run directory (default $RARL_RUN_ROOT/<env>_<mode>_seed<N>)");
  train_cmd->add_flag("--quiet", ta.quiet, "No per-iteration progress on stderr");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a trained run");
  eval_cmd->add_option("run_dir", ea.run_dir, "Run directory");
  eval_cmd->add_option("--set", ea.sets, "Override section.key=value (repeatable)");
  eval_cmd->add_option("--sweep", ea.sweep, "Parameter sweep")->check(CLI::IsMember({"mass", "friction", "joint"}));
  eval_cmd->add_option("--against", ea.against, "Second run dir for a sweep difference table");
  eval_cmd->add_option("--adversary", ea.adversary, "Disturbance for nominal evaluation")
      ->check(CLI::IsMember({"none", "random", "policy"}));
  eval_cmd->add_flag("--attack", ea.attack, "Train an attack adversary against the frozen protagonist");
  eval_cmd->add_flag("--force-field", ea.force_field, "Export adversary forces at probe states");
  eval_cmd->add_flag("--percentiles", ea.percentiles, "Aggregate final rewards over --runs");
  eval_cmd->add_option("--runs", ea.runs, "Run directories for --percentiles");
  eval_cmd->add_option("--out", ea.out, "Output directory (default RUN_DIR/eval)");
  eval_cmd->add_option("--episodes", ea.episodes, "Episodes per evaluation")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--seed", ea.seed, "Evaluation seed");
  eval_cmd->add_option("--threads", ea.threads, "Evaluation workers")->check(CLI::PositiveNumber);

  std::string game_path;
  double tol = 1e-10;
  auto* oracle_cmd = app.add_subcommand("oracle", "Solve a tabular game by Shapley value iteration");
  oracle_cmd->add_option("game_file", game_path, "Game file")->required();
  oracle_cmd->add_option("--tol", tol, "Sup-norm stopping tolerance")->check(CLI::PositiveNumber);

  GenGameArgs ga;
  auto* gen_cmd = app.add_subcommand("gen-game", "Write a random tabular game");
  gen_cmd->add_option("--seed", ga.seed);
  gen_cmd->add_option("--states", ga.states)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--actions1", ga.actions1)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--actions2", ga.actions2)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--discount", ga.discount);
  gen_cmd->add_flag("--swap", ga.swap, "Exchange the players' roles");
  gen_cmd->add_option("--from", ga.from, "Read this game instead of generating one");
  gen_cmd->add_option("--out", ga.out, "Output file (default stdout)");

  GradcheckOptions go;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference checks of gradients and Fisher products");
  grad_cmd->add_option("--seed", go.seed);
  grad_cmd->add_option("--probes", go.probes)->check(CLI::PositiveNumber);
  grad_cmd->add_option("--perturb", go.perturb, "Corrupt this op's analytic result (negative control)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*train_cmd) return cmd_train(ta);
    if (*eval_cmd) return cmd_eval(ea);
    if (*oracle_cmd) return cmd_oracle(game_path, tol);
    if (*gen_cmd) return cmd_gen_game(ga);
    if (*grad_cmd) return cmd_gradcheck(go);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
