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

#include "rarl/eval.hpp"

#include "rarl/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rarl {

namespace {

constexpr std::uint64_t kEvalTag = 0xe7a1;

std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return ss.str();
}

std::string join_values(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i]);
  return s;
}

}  // namespace

EvalStats summarize(std::vector<double> returns, double alpha) {
  if (returns.empty()) throw std::invalid_argument("summarize: no returns");
  EvalStats s;
  s.episodes = static_cast<int>(returns.size());
  double sum = 0.0;
  for (double r : returns) sum += r;
  s.mean = sum / static_cast<double>(returns.size());
  double ss = 0.0;
  for (double r : returns) ss += (r - s.mean) * (r - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(returns.size()));
  s.risk = cvar(returns, alpha);
  s.returns = std::move(returns);
  return s;
}

EvalStats evaluate(const Environment& env, const StochasticPolicy& protagonist, const EvalOptions& options) {
  const auto& spec = env.spec();
  if (options.n_episodes < 1) throw std::invalid_argument("evaluate: n_episodes must be >= 1");
  if (protagonist.obs_dim() != spec.obs_dim || protagonist.act_dim() != spec.act1_dim)
    throw std::invalid_argument("evaluate: protagonist does not match environment dimensions");
  const StochasticPolicy* adversary = nullptr;
  if (options.adversary == AdversaryMode::policy) {
    adversary = options.adversary_policy;
    if (!adversary) throw std::invalid_argument("evaluate: adversary=policy needs an adversary policy");
    if (adversary->obs_dim() != spec.obs_dim || adversary->act_dim() != spec.act2_dim)
      throw std::invalid_argument("evaluate: adversary does not match environment dimensions");
  }

  const std::uint64_t root = derive_seed(options.seed, {kEvalTag});
  std::vector<double> returns(static_cast<std::size_t>(options.n_episodes));
  parallel_for(returns.size(), options.threads, [&](std::size_t k) {
    const auto seeds = trajectory_seeds(root, k);
    auto e = env.clone();
    Rng rng1(seeds.protagonist);
    Rng rng2(seeds.adversary);
    Vector state = e->reset(seeds.reset);
    Vector a2 = Vector::Zero(spec.act2_dim);
    double total = 0.0;
    while (true) {
      const Vector a1 = options.deterministic ? protagonist.mean_action(state) : protagonist.sample_action(state, rng1);
      if (options.adversary == AdversaryMode::random) {
        for (Index d = 0; d < spec.act2_dim; ++d) a2[d] = rng2.uniform(spec.act2_lo[d], spec.act2_hi[d]);
      } else if (adversary) {
        a2 = options.deterministic ? adversary->mean_action(state) : adversary->sample_action(state, rng2);
      }
      const StepResult r = e->step(a1, a2);
      total += r.reward1;
      state = r.next_state;
      if (r.terminal || r.truncated) break;
    }
    returns[k] = total;
  });
  return summarize(std::move(returns), options.alpha);
}

EvalStats evaluate(const StochasticPolicy& protagonist, const std::string& env_name, const EnvPhysicsParams& params,
                   const EvalOptions& options) {
  return evaluate(*make_env(env_name, params), protagonist, options);
}

std::vector<std::pair<int, double>> percentile_curve(const std::vector<double>& final_rewards_by_seed) {
  if (final_rewards_by_seed.size() < 2) throw std::invalid_argument("percentile_curve: need at least two seeds");
  std::vector<double> sorted = final_rewards_by_seed;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t last = sorted.size() - 1;
  std::vector<std::pair<int, double>> curve;
  curve.reserve(101);
  for (int p = 0; p <= 100; ++p) curve.emplace_back(p, sorted[static_cast<std::size_t>(p) * last / 100]);
  return curve;
}

namespace {

SweepGrid run_grid(const StochasticPolicy& policy, const std::string& env_name, const EnvPhysicsParams& nominal,
                   const std::vector<double>& masses, const std::vector<double>& frictions,
                   const EvalOptions& options) {
  if (masses.empty() || frictions.empty()) throw std::invalid_argument("sweep: empty grid axis");
  for (double m : masses)
    if (!(m > 0.0) || !std::isfinite(m)) throw std::invalid_argument("sweep: masses must be positive");
  for (double f : frictions)
    if (!(f >= 0.0) || !std::isfinite(f)) throw std::invalid_argument("sweep: frictions must be >= 0");
  EvalOptions opt = options;
  opt.adversary = AdversaryMode::none;
  opt.adversary_policy = nullptr;

  SweepGrid g;
  g.env_name = env_name;
  g.masses = masses;
  g.frictions = frictions;
  g.episodes = options.n_episodes;
  g.eval_seed = options.seed;
  g.cells.reserve(masses.size() * frictions.size());
  for (double m : masses) {
    for (double f : frictions) {
      EnvPhysicsParams p = nominal;
      p.mass = m;
      p.friction = f;
      g.cells.push_back(evaluate(policy, env_name, p, opt));
    }
  }
  return g;
}

void require_slider(const std::string& env_name, const char* what) {
  if (env_name != "slider")
    throw std::invalid_argument(std::string(what) + ": friction is only varied on the slider environment (got '" +
                                env_name + "')");
}

}  // namespace

SweepGrid mass_sweep(const StochasticPolicy& policy, const std::string& env_name, const EnvPhysicsParams& nominal,
                     const std::vector<double>& masses, const EvalOptions& options) {
  return run_grid(policy, env_name, nominal, masses, {nominal.friction}, options);
}

SweepGrid friction_sweep(const StochasticPolicy& policy, const std::string& env_name, const EnvPhysicsParams& nominal,
                         const std::vector<double>& frictions, const EvalOptions& options) {
  require_slider(env_name, "friction_sweep");
  return run_grid(policy, env_name, nominal, {nominal.mass}, frictions, options);
}

SweepGrid joint_sweep(const StochasticPolicy& policy, const std::string& env_name, const EnvPhysicsParams& nominal,
                      const std::vector<double>& masses, const std::vector<double>& frictions,
                      const EvalOptions& options) {
  require_slider(env_name, "joint_sweep");
  return run_grid(policy, env_name, nominal, masses, frictions, options);
}

std::vector<double> sweep_values(double nominal, double fraction, int count) {
  if (count < 1) throw std::invalid_argument("sweep_values: count must be >= 1");
  if (count == 1) return {nominal};
  std::vector<double> v(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double u = -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(count - 1);
    v[static_cast<std::size_t>(k)] = nominal * (1.0 + fraction * u);
  }
  // keep the nominal value exact in the middle of odd grids
  if (count % 2 == 1) v[static_cast<std::size_t>(count / 2)] = nominal;
  return v;
}

std::vector<ForceRecord> force_field_export(const StochasticPolicy& adversary, const EnvSpec& spec,
                                            const std::vector<Vector>& states) {
  if (adversary.obs_dim() != spec.obs_dim || adversary.act_dim() != spec.act2_dim)
    throw std::invalid_argument("force_field_export: adversary does not match environment dimensions");
  std::vector<ForceRecord> out;
  out.reserve(states.size());
  for (const auto& s : states) {
    if (s.size() != spec.obs_dim) throw std::invalid_argument("force_field_export: state has wrong dimension");
    out.push_back({s, clamp_to_box(adversary.mean_action(s), spec.act2_lo, spec.act2_hi)});
  }
  return out;
}

std::vector<Vector> pendulum_probe_states() {
  std::vector<Vector> out;
  auto add = [&](double x, double xd, double th, double thd) {
    Vector s(4);
    s << x, xd, th, thd;
    out.push_back(s);
  };
  // stationary cart, pole tilted either way
  add(0.0, 0.0, 0.1, 0.0);
  add(0.0, 0.0, -0.1, 0.0);
  // moving cart, pole vertical
  add(0.0, 1.0, 0.0, 0.0);
  add(0.0, -1.0, 0.0, 0.0);
  return out;
}

AttackReport attack_evaluation(const TrainConfig& config, const StochasticPolicy& protagonist, int attack_iterations,
                               const EvalOptions& options) {
  if (attack_iterations < 1) throw std::invalid_argument("attack_evaluation: attack_iterations must be >= 1");
  AttackResult attack = train_adversary_only(config, protagonist, attack_iterations);
  TrainConfig live = config;
  live.baseline_mode = false;
  const auto env = make_environment(live);

  AttackReport rep;
  EvalOptions clean = options;
  clean.adversary = AdversaryMode::none;
  clean.adversary_policy = nullptr;
  rep.clean = evaluate(*env, protagonist, clean);
  EvalOptions attacked = options;
  attacked.adversary = AdversaryMode::policy;
  attacked.adversary_policy = attack.nu.get();
  rep.attacked = evaluate(*env, protagonist, attacked);
  rep.attack_history = std::move(attack.history);
  return rep;
}

// ---------------------------------------------------------------------------

void write_csv(std::ostream& out, const CsvTable& table) {
  for (const auto& c : table.comments) {
    if (c.find('\n') != std::string::npos) throw std::invalid_argument("write_csv: comment contains a newline");
    out << "# " << c << '\n';
  }
  for (std::size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
  out << '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw std::invalid_argument("write_csv: row width differs from header");
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << fmt(row[i]);
    out << '\n';
  }
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  bool have_header = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header && line.rfind("# ", 0) == 0) {
      t.comments.push_back(line.substr(2));
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw std::runtime_error("csv line " + std::to_string(line_no) + ": expected " +
                               std::to_string(t.header.size()) + " fields");
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& field : fields) {
      char* end = nullptr;
      const double v = std::strtod(field.c_str(), &end);
      if (field.empty() || end != field.c_str() + field.size())
        throw std::runtime_error("csv line " + std::to_string(line_no) + ": bad number '" + field + "'");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (!have_header) throw std::runtime_error("csv: missing header row");
  return t;
}

CsvTable percentile_table(const std::vector<std::pair<int, double>>& curve) {
  CsvTable t;
  t.header = {"percentile", "reward"};
  for (const auto& [p, r] : curve) t.rows.push_back({static_cast<double>(p), r});
  return t;
}

namespace {

std::vector<std::string> grid_comments(const SweepGrid& g) {
  return {"env=" + g.env_name, "masses=" + join_values(g.masses), "frictions=" + join_values(g.frictions),
          "episodes=" + std::to_string(g.episodes), "eval_seed=" + std::to_string(g.eval_seed)};
}

}  // namespace

CsvTable sweep_table(const SweepGrid& grid) {
  CsvTable t;
  t.comments = grid_comments(grid);
  t.header = {"mass", "friction", "mean", "std", "cvar", "episodes"};
  for (std::size_t i = 0; i < grid.masses.size(); ++i)
    for (std::size_t j = 0; j < grid.frictions.size(); ++j) {
      const auto& c = grid.at(i, j);
      t.rows.push_back({grid.masses[i], grid.frictions[j], c.mean, c.std, c.risk.cvar, static_cast<double>(c.episodes)});
    }
  return t;
}

CsvTable sweep_difference_table(const SweepGrid& a, const SweepGrid& b) {
  if (a.masses != b.masses || a.frictions != b.frictions)
    throw std::invalid_argument("sweep_difference_table: grids have different axes");
  if (a.episodes != b.episodes || a.eval_seed != b.eval_seed)
    throw std::invalid_argument("sweep_difference_table: grids use different evaluation seeds");
  CsvTable t;
  t.comments = grid_comments(a);
  t.header = {"mass", "friction", "mean_a", "mean_b", "diff"};
  for (std::size_t i = 0; i < a.masses.size(); ++i)
    for (std::size_t j = 0; j < a.frictions.size(); ++j) {
      const double ma = a.at(i, j).mean, mb = b.at(i, j).mean;
      t.rows.push_back({a.masses[i], a.frictions[j], ma, mb, ma - mb});
    }
  return t;
}

CsvTable force_table(const std::vector<ForceRecord>& records) {
  CsvTable t;
  if (records.empty()) return t;
  const Index ns = records.front().state.size(), nf = records.front().force.size();
  for (Index k = 0; k < ns; ++k) t.header.push_back("state_" + std::to_string(k));
  for (Index k = 0; k < nf; ++k) t.header.push_back("f_" + std::to_string(k));
  for (const auto& r : records) {
    if (r.state.size() != ns || r.force.size() != nf) throw std::invalid_argument("force_table: ragged records");
    std::vector<double> row(r.state.data(), r.state.data() + ns);
    row.insert(row.end(), r.force.data(), r.force.data() + nf);
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable returns_table(const EvalStats& stats) {
  CsvTable t;
  t.comments = {"mean=" + fmt(stats.mean), "std=" + fmt(stats.std), "cvar_alpha=" + fmt(stats.risk.alpha),
                "cvar=" + fmt(stats.risk.cvar)};
  t.header = {"episode", "return"};
  for (std::size_t k = 0; k < stats.returns.size(); ++k)
    t.rows.push_back({static_cast<double>(k), stats.returns[k]});
  return t;
}

void write_plot_scripts(const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto put = [&](const std::string& name, const std::string& body) {
    std::ofstream out(fs::path(dir) / name);
    if (!out) throw std::runtime_error("cannot write " + (fs::path(dir) / name).string());
    out << body;
  };
  const std::string common =
      "set datafile separator ','\n"
      "set datafile commentschars '#'\n"
      "set key autotitle columnhead\n"
      "set terminal pngcairo size 800,600\n";
  put("percentiles.gp", common +
                            "set output 'percentiles.png'\n"
                            "set xlabel 'percentile'\nset ylabel 'final reward'\n"
                            "plot 'percentiles.csv' using 1:2 with lines lw 2\n");
  put("mass_sweep.gp", common +
                           "set output 'mass_sweep.png'\n"
                           "set xlabel 'mass'\nset ylabel 'return'\n"
                           "plot 'mass_sweep.csv' using 1:3:4 with yerrorlines\n");
  put("friction_sweep.gp", common +
                               "set output 'friction_sweep.png'\n"
                               "set xlabel 'friction coefficient'\nset ylabel 'return'\n"
                               "plot 'friction_sweep.csv' using 2:3:4 with yerrorlines\n");
  put("joint_sweep.gp", common +
                            "set output 'joint_sweep.png'\n"
                            "set xlabel 'mass'\nset ylabel 'friction'\n"
                            "set view map\n"
                            "plot 'joint_sweep.csv' using 1:2:3 with points pt 5 ps 4 palette\n");
  put("force_field.gp", common +
                            "set output 'force_field.png'\n"
                            "set xlabel 'theta'\nset ylabel 'x_dot'\n"
                            "plot 'force_field.csv' using 3:2:5:6 with vectors head filled\n");
}

}  // namespace rarl
