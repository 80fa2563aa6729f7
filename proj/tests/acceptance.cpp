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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.
//
// Trained runs and their evaluations are produced with the rarl CLI and kept
// under the work directory, keyed by the CLI binary's hash and the exact
// command, so a rerun with an unchanged build reuses them.
//
//   acceptance [--only 1,4,9] [--work DIR]

#include "rarl/config.hpp"
#include "rarl/eval.hpp"
#include "rarl/game_oracle.hpp"
#include "rarl/gradcheck.hpp"
#include "rarl/trainer.hpp"
#include "support/reference_loop.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <cstdarg>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace rarl;

namespace {

// ---------------------------------------------------------------------------
// Pinned thresholds

constexpr double kGradTol = 1e-4;
constexpr double kFvpTol = 1e-3;
constexpr int kGradProbes = 100;
constexpr double kBellmanTol = 1e-7;
constexpr double kSwapTol = 1e-8;
constexpr int kGames = 20;
constexpr double kGapFraction = 0.05;
constexpr int kTabularIterations = 2000;
constexpr int kTabularSeeds = 5;
constexpr double kPendulumTarget = 950.0;
constexpr int kPendulumIterations = 100;
constexpr int kPendulumSeeds = 10;
constexpr int kPendulumRequired = 8;
constexpr int kSliderSeeds = 10;
constexpr double kCvarAlpha = 0.05;
constexpr int kCvarSamples = 100000;
constexpr double kCvarTol = 0.05;

constexpr double kBudgetGrad = 60, kBudgetGames = 60, kBudgetTabular = 600, kBudgetZero = 300;
constexpr double kBudgetPendulum = 1800, kBudgetSweep = 7200, kBudgetAttack = 7200, kBudgetCvar = 1;

const std::string kCli = RARL_CLI_PATH;
const fs::path kConfigs = RARL_CONFIG_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return fmt("%016llx", static_cast<unsigned long long>(h));
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

CsvTable load_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("missing " + p.string());
  return read_csv(in);
}

// ---------------------------------------------------------------------------
// CLI runs with a reuse cache

class Workspace {
 public:
  explicit Workspace(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_);
    cli_hash_ = fnv1a64(slurp(kCli));
  }

  const fs::path& root() const { return root_; }

  static void run(const std::string& args) {
    const std::string cmd = "'" + kCli + "' " + args;
    const int status = std::system(cmd.c_str());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) throw std::runtime_error("command failed: " + cmd);
  }

  /// Runs `args` unless `dir` holds a stamp for the same binary and command.
  /// Returns the command's wall time, recorded at the time it ran.
  double cached(const fs::path& dir, const std::string& args) const {
    const std::string key = cli_hash_ + "\n" + args + "\n";
    if (slurp(dir / ".stamp") == key) return std::stod(slurp(dir / ".seconds"));
    std::fprintf(stderr, "  running: rarl %s\n", args.c_str());
    const auto t0 = std::chrono::steady_clock::now();
    run(args);
    const double s = seconds_since(t0);
    fs::create_directories(dir);
    std::ofstream(dir / ".seconds") << fmt("%.17g", s);
    std::ofstream(dir / ".stamp") << key;
    return s;
  }

  fs::path train(const std::string& env, bool baseline, int seed, double* seconds = nullptr) const {
    const std::string name = env + (baseline ? "_baseline" : "_rarl") + "_seed" + std::to_string(seed);
    const fs::path dir = root_ / "runs" / name;
    const std::string args = "train --config '" + (kConfigs / (env + ".cfg")).string() + "'" +
                             (baseline ? " --baseline" : "") + " --seed " + std::to_string(seed) + " --out '" +
                             dir.string() + "' --force --quiet";
    const double s = cached(dir, args);
    if (seconds) *seconds = s;
    return dir;
  }

  fs::path eval(const fs::path& run, const std::string& what, const std::string& extra, double* seconds) const {
    const fs::path out = run / ("eval_" + what);
    *seconds = cached(out, "eval '" + run.string() + "' " + extra + " --out '" + out.string() + "'");
    return out;
  }

 private:
  fs::path root_;
  std::string cli_hash_;
};

/// Trains every seed of one condition; returns run dirs and total wall time.
struct RunSet {
  std::vector<fs::path> dirs;
  double seconds = 0.0;
};

RunSet train_set(const Workspace& ws, const std::string& env, bool baseline, int seeds) {
  RunSet r;
  for (int s = 1; s <= seeds; ++s) {
    double t = 0.0;
    r.dirs.push_back(ws.train(env, baseline, s, &t));
    r.seconds += t;
  }
  return r;
}

// ---------------------------------------------------------------------------
// 1. gradient correctness

Outcome gradients() {
  GradcheckOptions o;
  o.probes = kGradProbes;
  const auto results = run_gradcheck(o);
  bool ok = true;
  double grad_err = 0.0, fvp_err = 0.0;
  for (const auto& r : results) {
    const bool fvp = r.op.find("fisher") != std::string::npos;
    const double tol = fvp ? kFvpTol : kGradTol;
    ok = ok && r.max_rel_error < tol;
    (fvp ? fvp_err : grad_err) = std::max(fvp ? fvp_err : grad_err, r.max_rel_error);
  }
  // the harness must notice a corrupted result in every op
  int caught = 0;
  for (const auto& op : gradcheck_ops()) {
    o.perturb = op;
    o.probes = 5;
    for (const auto& r : run_gradcheck(o))
      if (r.op == op && !r.passed) ++caught;
  }
  const int n_ops = static_cast<int>(gradcheck_ops().size());
  return {ok && caught == n_ops,
          fmt("grad max rel err %.2e (< %.0e), FVP %.2e (< %.0e), %d ops, %d/%d corruptions caught", grad_err,
              kGradTol, fvp_err, kFvpTol, n_ops, caught, n_ops)};
}

// ---------------------------------------------------------------------------
// 2. minimax oracle

Outcome minimax() {
  double worst_residual = 0.0, worst_swap = 0.0;
  for (int k = 0; k < kGames; ++k) {
    const TabularGame g = make_tabular_game(1000 + k, 2 + k % 5, 2 + k % 3, 2 + (k / 3) % 3, k % 2 ? 0.9 : 0.95);
    const ShapleyResult a = shapley_value_iteration(g);
    const ShapleyResult b = shapley_value_iteration(g.swapped());
    worst_residual = std::max(worst_residual, bellman_saddle_residual(g, a.values));
    worst_swap = std::max(worst_swap, (a.values + b.values).cwiseAbs().maxCoeff());
  }
  return {worst_residual < kBellmanTol && worst_swap < kSwapTol,
          fmt("%d games: max Bellman-saddle residual %.2e (< %.0e), max |V + V_swapped| %.2e (< %.0e)", kGames,
              worst_residual, kBellmanTol, worst_swap, kSwapTol)};
}

// ---------------------------------------------------------------------------
// 3. tabular alternating play

Outcome tabular() {
  std::vector<double> first_hits;
  std::string per_seed;
  const ExperimentConfig base = load_config((kConfigs / "tabular.cfg").string());
  const TabularGame game = make_game(base.train.game);
  const double threshold = kGapFraction * game.reward_range() / (1.0 - game.discount);
  for (int seed = 1; seed <= kTabularSeeds; ++seed) {
    TrainConfig c = base.train;
    c.seed = static_cast<std::uint64_t>(seed);
    c.n_iter = kTabularIterations;
    int first = -1;
    double last = 0.0, min_gap = 1e300;
    TrainHooks h;
    h.on_iteration = [&](int i, const TrainResult& r) {
      last = equilibrium_gap(game, dynamic_cast<const SoftmaxTabularPolicy&>(*r.mu),
                             dynamic_cast<const SoftmaxTabularPolicy&>(*r.nu));
      min_gap = std::min(min_gap, last);
      if (first < 0 && last < threshold) first = i;
    };
    train(c, h);
    first_hits.push_back(first > 0 ? first : HUGE_VAL);
    per_seed += fmt(" %d(min %.3f, end %.3f)", first, min_gap, last);
  }
  const double med = median(first_hits);
  return {med <= kTabularIterations,
          fmt("threshold %.3f; median first iteration below it %s; per seed first/min/end gap:%s", threshold,
              std::isfinite(med) ? fmt("%.0f", med).c_str() : "never", per_seed.c_str())};
}

// ---------------------------------------------------------------------------
// 4. zero-strength equivalence

bool same(const SingleAgentView& a, const SingleAgentView& b) {
  return a.states == b.states && a.actions == b.actions && a.rewards == b.rewards && a.final_state == b.final_state &&
         a.terminated == b.terminated;
}

Outcome zero_strength() {
  int configs = 0, mismatches = 0;
  std::size_t trajectories = 0;
  for (const char* env : {"pendulum", "slider"})
    for (int n_mu : {1, 2}) {
      TrainConfig c =
          load_config((kConfigs / (std::string(env) + ".cfg")).string(),
                      {"train.baseline_mode=true", "train.n_iter=4", "train.n_traj=6", "train.seed=" +
                       std::to_string(40 + n_mu), "train.n_mu=" + std::to_string(n_mu), "policy.hidden=16,16"})
              .train;
      c.threads = 2;
      std::vector<std::vector<Trajectory>> batches;
      std::vector<Vector> params;
      TrainHooks h;
      h.on_rollouts = [&](const ScheduleEvent&, const std::vector<Trajectory>& t) { batches.push_back(t); };
      h.on_iteration = [&](int, const TrainResult& r) { params.push_back(r.mu->params()); };
      train(c, h);
      const auto ref = rarl::testing::single_agent_reference(c);
      ++configs;
      if (batches.size() != ref.batches.size() || params != ref.params) {
        ++mismatches;
        continue;
      }
      for (std::size_t b = 0; b < batches.size(); ++b) {
        if (batches[b].size() != ref.batches[b].size()) {
          ++mismatches;
          continue;
        }
        for (std::size_t k = 0; k < batches[b].size(); ++k, ++trajectories)
          if (!same(split(batches[b][k], Player::protagonist), ref.batches[b][k])) ++mismatches;
      }
    }
  return {mismatches == 0, fmt("%d configs, %zu trajectories and every parameter vector compared exactly; %d "
                               "mismatches",
                               configs, trajectories, mismatches)};
}

// ---------------------------------------------------------------------------
// 5-7. pendulum

int first_reaching(const fs::path& run, double target) {
  for (const auto& row : load_csv(run / "stats.csv").rows)
    if (row[1] == 1.0 && row[3] >= target) return static_cast<int>(row[0]);
  return -1;
}

Outcome pendulum_trainability(const Workspace& ws, double* runtime) {
  const RunSet base = train_set(ws, "pendulum", true, kPendulumSeeds);
  *runtime = base.seconds;
  int ok = 0;
  std::string firsts;
  for (const auto& d : base.dirs) {
    const int f = first_reaching(d, kPendulumTarget);
    ok += f > 0 && f <= kPendulumIterations;
    firsts += " " + std::to_string(f);
  }
  return {ok >= kPendulumRequired && base.seconds < kBudgetPendulum,
          fmt("%d/%d seeds reach mean training return >= %.0f within %d iterations (need %d); first iteration per "
              "seed:%s; training %.0f s (< %.0f)",
              ok, kPendulumSeeds, kPendulumTarget, kPendulumIterations, kPendulumRequired, firsts.c_str(),
              base.seconds, kBudgetPendulum)};
}

Outcome mass_robustness(const Workspace& ws) {
  double seconds = 0.0;
  std::vector<double> masses;
  std::vector<std::vector<double>> med(2);  // [baseline, rarl][cell]
  for (int mode = 0; mode < 2; ++mode) {
    const RunSet runs = train_set(ws, "pendulum", mode == 0, kPendulumSeeds);
    seconds += runs.seconds;
    std::vector<std::vector<double>> cells;
    for (const auto& d : runs.dirs) {
      double t = 0.0;
      const CsvTable sweep = load_csv(ws.eval(d, "mass", "--sweep mass", &t) / "mass_sweep.csv");
      seconds += t;
      cells.resize(sweep.rows.size());
      masses.clear();
      for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
        cells[i].push_back(sweep.rows[i][2]);
        masses.push_back(sweep.rows[i][0]);
      }
    }
    for (const auto& c : cells) med[mode].push_back(median(c));
  }
  const double nominal = load_config((kConfigs / "pendulum.cfg").string()).train.env.mass;
  const auto nominal_it = std::find(masses.begin(), masses.end(), nominal);
  if (nominal_it == masses.end()) return {false, "mass grid does not contain the nominal mass"};
  const std::size_t nom = static_cast<std::size_t>(nominal_it - masses.begin());
  bool dominates = true;
  double worst[2] = {0.0, 0.0};
  std::string cells;
  for (std::size_t i = 0; i < masses.size(); ++i) {
    dominates = dominates && med[1][i] >= med[0][i];
    for (int m = 0; m < 2; ++m) worst[m] = std::max(worst[m], (med[m][nom] - med[m][i]) / med[m][nom]);
    cells += fmt(" m=%.3g:%.1f/%.1f", masses[i], med[1][i], med[0][i]);
  }
  return {dominates && worst[1] < worst[0] && seconds < kBudgetSweep,
          fmt("median return rarl/baseline per mass:%s; worst degradation rarl %.2e vs baseline %.2e; %.0f s (< %.0f)",
              cells.c_str(), worst[1], worst[0], seconds, kBudgetSweep)};
}

Outcome attack_robustness(const Workspace& ws) {
  double seconds = 0.0;
  std::vector<double> attacked[2], clean[2];
  for (int mode = 0; mode < 2; ++mode) {
    const RunSet runs = train_set(ws, "pendulum", mode == 0, kPendulumSeeds);
    seconds += runs.seconds;
    for (const auto& d : runs.dirs) {
      double t = 0.0;
      const CsvTable a = load_csv(ws.eval(d, "attack", "--attack", &t) / "attack.csv");
      seconds += t;
      double sc = 0.0, sa = 0.0;
      for (const auto& row : a.rows) sc += row[1], sa += row[2];
      clean[mode].push_back(sc / a.rows.size());
      attacked[mode].push_back(sa / a.rows.size());
    }
  }
  const double r = median(attacked[1]), b = median(attacked[0]);
  return {r > b && seconds < kBudgetAttack,
          fmt("median attacked return rarl %.1f vs baseline %.1f (clean %.1f vs %.1f); %.0f s (< %.0f)", r, b,
              median(clean[1]), median(clean[0]), seconds, kBudgetAttack)};
}

// ---------------------------------------------------------------------------
// 8. slider percentiles

bool monotone(const CsvTable& t) {
  for (std::size_t i = 1; i < t.rows.size(); ++i)
    if (t.rows[i][1] < t.rows[i - 1][1]) return false;
  return t.rows.size() == 101;
}

double at_percentile(const CsvTable& t, int p) {
  for (const auto& row : t.rows)
    if (static_cast<int>(row[0]) == p) return row[1];
  throw std::runtime_error("percentile missing");
}

Outcome slider_percentiles(const Workspace& ws) {
  CsvTable curves[2];
  double seconds = 0.0;
  for (int mode = 0; mode < 2; ++mode) {
    const RunSet runs = train_set(ws, "slider", mode == 0, kSliderSeeds);
    seconds += runs.seconds;
    std::string args = "eval --percentiles --runs";
    for (const auto& d : runs.dirs) args += " '" + d.string() + "'";
    const fs::path out = ws.root() / (mode == 0 ? "slider_percentiles_baseline" : "slider_percentiles_rarl");
    seconds += ws.cached(out, args + " --out '" + out.string() + "'");
    curves[mode] = load_csv(out / "percentiles.csv");
  }
  const double r25 = at_percentile(curves[1], 25), b25 = at_percentile(curves[0], 25);
  const double r50 = at_percentile(curves[1], 50), b50 = at_percentile(curves[0], 50);
  const bool mono = monotone(curves[0]) && monotone(curves[1]);
  return {r25 >= b25 && r50 >= b50 && mono,
          fmt("p25 rarl %.1f vs baseline %.1f, p50 rarl %.1f vs baseline %.1f, curves monotone: %s; %.0f s", r25, b25,
              r50, b50, mono ? "yes" : "no", seconds)};
}

// ---------------------------------------------------------------------------
// 9. CVaR

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

Outcome cvar_metric() {
  // analytic lower-tail CVaR of N(0,1): -phi(z_alpha) / alpha
  double lo = -10, hi = 0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < kCvarAlpha ? lo : hi) = mid;
  }
  const double z = 0.5 * (lo + hi);
  const double analytic = -std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI) / kCvarAlpha;
  Rng rng(derive_seed(9, {kCvarSamples}));
  std::vector<double> x(kCvarSamples);
  for (auto& v : x) v = rng.normal();
  const double empirical = cvar(x, kCvarAlpha).cvar;
  return {std::abs(empirical - analytic) < kCvarTol,
          fmt("empirical %.4f vs analytic %.4f (|diff| %.4f < %.2f)", empirical, analytic,
              std::abs(empirical - analytic), kCvarTol)};
}

// ---------------------------------------------------------------------------
// 10. determinism across thread counts

Outcome determinism(const Workspace& ws) {
  const fs::path root = ws.root() / "determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
  std::vector<std::string> compared;
  int differing = 0;
  for (const char* env : {"pendulum", "slider"}) {
    const std::string train_args = std::string("train --config ") + q(kConfigs / (std::string(env) + ".cfg")) +
                                   " --set train.n_iter=3 --set train.n_traj=6 --set train.checkpoint_every=1"
                                   " --set eval.attack_iterations=2 --set eval.episodes=8 --quiet --seed 5";
    std::vector<fs::path> runs;
    for (int threads : {1, 8}) {
      // same basename for both, since percentile outputs name their runs
      const fs::path run = root / fmt("t%d", threads) / env;
      Workspace::run(train_args + " --threads " + std::to_string(threads) + " --out " + q(run));
      const std::string t = " --threads " + std::to_string(threads);
      Workspace::run("eval " + q(run) + t + " --adversary random");
      Workspace::run("eval " + q(run) + t + (env == std::string("slider") ? " --sweep joint" : " --sweep mass"));
      Workspace::run("eval " + q(run) + t + " --attack --force-field");
      Workspace::run("eval " + q(run) + t + " --sweep mass --against " + q(run));
      Workspace::run("eval --percentiles --runs " + q(run) + " " + q(run) + t + " --episodes 4 --out " +
                     q(run / "pct"));
      runs.push_back(run);
    }
    for (const auto& entry : fs::recursive_directory_iterator(runs[0])) {
      if (!entry.is_regular_file()) continue;
      const fs::path rel = fs::relative(entry.path(), runs[0]);
      if (rel.filename() == "timing.csv") continue;  // wall-clock seconds
      compared.push_back(rel.string());
      if (slurp(entry.path()) != slurp(runs[1] / rel)) {
        ++differing;
        std::fprintf(stderr, "  differs: %s/%s\n", env, rel.string().c_str());
      }
    }
  }
  int csvs = 0;
  for (const auto& c : compared) csvs += c.ends_with(".csv");
  return {differing == 0 && csvs > 0, fmt("--threads 1 vs 8: %zu files compared (%d CSV, plus checkpoints and "
                                          "manifests) for train and every eval mode; %d differ",
                                          compared.size(), csvs, differing)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string only;
  std::string work = "acceptance_work";
  app.add_option("--only", only, "Comma-separated criterion numbers");
  app.add_option("--work", work, "Directory for trained runs and evaluations");
  CLI11_PARSE(app, argc, argv);

  std::set<int> selected;
  std::stringstream ss(only);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) selected.insert(std::stoi(item));

  const Workspace ws(work);
  double pendulum_seconds = 0.0;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradients},
      {"minimax oracle", minimax},
      {"tabular play reaches equilibrium", tabular},
      {"zero-strength equivalence", zero_strength},
      {"pendulum trainability", [&] { return pendulum_trainability(ws, &pendulum_seconds); }},
      {"mass-sweep robustness ordering", [&] { return mass_robustness(ws); }},
      {"attack robustness", [&] { return attack_robustness(ws); }},
      {"slider percentile dominance", [&] { return slider_percentiles(ws); }},
      {"CVaR metric", cvar_metric},
      {"determinism across thread counts", [&] { return determinism(ws); }},
  };
  const double budgets[] = {kBudgetGrad, kBudgetGames, kBudgetTabular, kBudgetZero, 0, 0, 0, 0, kBudgetCvar, 0};

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double s = seconds_since(t0);
    if (budgets[i] > 0 && s >= budgets[i]) {
      o.pass = false;
      o.detail += fmt("; over the %.0f s budget", budgets[i]);
    }
    failures += !o.pass;
    std::printf("criterion %2d %s  %s: %s [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str(), s);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
