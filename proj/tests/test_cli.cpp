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
#include "rarl/game_oracle.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("rarl_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result rarl(const std::string& args, const std::string& env = "") const {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" + RARL_CLI_PATH + "' " + args + " >'" +
                            out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  fs::path path(const std::string& name) const { return dir_ / name; }

  void write(const std::string& name, const std::string& text) const { std::ofstream(dir_ / name) << text; }

  // Tiny pendulum run: a couple of iterations on short episodes.
  static constexpr const char* kTiny =
      "--set train.n_iter=2 --set train.n_traj=3 --set env.horizon=40 --set policy.hidden=4 --quiet";

  fs::path dir_;
};

const char* kPennies = R"(states 1
actions 2 2
start 0
discount 0.5
reward
1 -1
-1 1
transition
1
1
1
1
)";

}  // namespace

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(rarl("").code, 1);
  EXPECT_EQ(rarl("frobnicate").code, 1);
  EXPECT_EQ(rarl("train --no-such-flag").code, 1);
  EXPECT_EQ(rarl("eval --sweep volume x").code, 1);
  EXPECT_EQ(rarl("--help").code, 0);
}

TEST_F(Cli, GradcheckPassesAndReportsEveryOp) {
  const Result r = rarl("gradcheck --seed 3");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("max_rel_err"), std::string::npos);
  for (const char* op : {"gaussian_grad_log_prob", "surrogate_gradient", "fisher_vector_product",
                         "softmax_grad_log_prob", "softmax_fisher_vector_product"})
    EXPECT_NE(r.out.find(op), std::string::npos) << op;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST_F(Cli, GradcheckPerturbationFailsWithNamedOp) {
  const Result r = rarl("gradcheck --perturb surrogate_gradient");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("surrogate_gradient"), std::string::npos) << r.err;
  EXPECT_EQ(rarl("gradcheck --perturb no_such_op").code, 1);
}

TEST_F(Cli, OracleMatchingPennies) {
  write("pennies.txt", kPennies);
  const Result r = rarl("oracle pennies.txt");
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_NEAR(j["value"].get<double>(), 0.0, 1e-12);
  EXPECT_NEAR(j["protagonist_strategies"][0][0].get<double>(), 0.5, 1e-9);
  EXPECT_NEAR(j["adversary_strategies"][0][1].get<double>(), 0.5, 1e-9);
}

TEST_F(Cli, OracleSwapNegatesAndMatchesLibrary) {
  ASSERT_EQ(rarl("gen-game --seed 11 --states 4 --actions1 3 --actions2 2 --discount 0.9 --out g.txt").code, 0);
  ASSERT_EQ(rarl("gen-game --from g.txt --swap --out s.txt").code, 0);
  const Result a = rarl("oracle g.txt"), b = rarl("oracle s.txt");
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  const double va = json::parse(a.out)["value"], vb = json::parse(b.out)["value"];
  EXPECT_NEAR(va, -vb, 1e-8);

  std::ifstream in(path("g.txt"));
  const rarl::TabularGame game = rarl::read_game(in);
  const rarl::ShapleyResult lib = rarl::shapley_value_iteration(game);
  const auto values = json::parse(a.out)["values"];
  ASSERT_EQ(values.size(), 4u);
  for (int s = 0; s < 4; ++s) EXPECT_NEAR(values[s].get<double>(), lib.values[s], 1e-8);
}

TEST_F(Cli, MalformedGameNamesTheLine) {
  write("bad.txt", "states 1\nactions 2 2\nstart 0\ndiscount 0.5\nreward\n1 -1\n-1 x\n");
  const Result r = rarl("oracle bad.txt");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("bad.txt"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("line 7"), std::string::npos) << r.err;
  EXPECT_EQ(rarl("oracle missing.txt").code, 1);
}

TEST_F(Cli, GenGameToStdoutIsReadable) {
  const Result r = rarl("gen-game --seed 2 --states 3");
  ASSERT_EQ(r.code, 0);
  std::istringstream in(r.out);
  EXPECT_EQ(rarl::read_game(in).n_states, 3);
  EXPECT_EQ(rarl("gen-game --states 0").code, 1);
}

TEST_F(Cli, TrainWritesSelfDescribingRunDir) {
  const Result r = rarl(std::string("train --baseline --seed 7 ") + kTiny, "RARL_RUN_ROOT=out");
  ASSERT_EQ(r.code, 0) << r.err;
  const fs::path run = path("out/pendulum_baseline_seed7");
  for (const char* f : {"manifest.json", "config.resolved", "stats.csv", "timing.csv", "checkpoints/iter_000002.bin"})
    EXPECT_TRUE(fs::exists(run / f)) << f;
  const json m = json::parse(slurp(run / "manifest.json"));
  EXPECT_EQ(m["mode"], "baseline");
  EXPECT_EQ(m["seed"], 7);
  EXPECT_EQ(m["final_checkpoint"], "checkpoints/iter_000002.bin");
  EXPECT_EQ(m["status"], "complete");
  const std::string cfg = slurp(run / "config.resolved");
  EXPECT_NE(cfg.find("baseline_mode = true"), std::string::npos);
  EXPECT_NE(cfg.find("n_iter = 2\n"), std::string::npos);
  // stats carry no wall-clock columns
  EXPECT_EQ(slurp(run / "stats.csv").find("wall"), std::string::npos);
  // baseline: only protagonist rows
  std::ifstream in(run / "stats.csv");
  const rarl::CsvTable t = rarl::read_csv(in);
  ASSERT_EQ(t.rows.size(), 2u);
  for (const auto& row : t.rows) EXPECT_EQ(row[1], 1.0);
}

TEST_F(Cli, ExistingRunDirNeedsForceAndRerunIsIdentical) {
  const std::string cmd = std::string("train --seed 3 --out r ") + kTiny;
  ASSERT_EQ(rarl(cmd).code, 0);
  const std::string first = slurp(path("r/stats.csv"));
  const std::string ck = slurp(path("r/checkpoints/iter_000002.bin"));
  const Result again = rarl(cmd);
  EXPECT_EQ(again.code, 1);
  EXPECT_NE(again.err.find("--force"), std::string::npos);
  ASSERT_EQ(rarl(cmd + " --force").code, 0);
  EXPECT_EQ(slurp(path("r/stats.csv")), first);
  EXPECT_EQ(slurp(path("r/checkpoints/iter_000002.bin")), ck);
}

TEST_F(Cli, ConfigErrorsReportLines) {
  write("exp.cfg", "[train]\nn_iter = 2\nn_itre = 3\n");
  const Result r = rarl("train --config exp.cfg --out r");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("exp.cfg:3:"), std::string::npos) << r.err;
  EXPECT_EQ(rarl("train --set train.n_traj=zero --out r").code, 1);
}

TEST_F(Cli, ConfigFileAndOverridesAreEchoed) {
  write("exp.cfg", "[train]\nn_iter = 5\n[env]\nhorizon = 30\n[policy]\nhidden = 4\n");
  ASSERT_EQ(rarl("train --config exp.cfg --set train.n_iter=2 --set train.n_traj=2 --out r --quiet").code, 0);
  const std::string cfg = slurp(path("r/config.resolved"));
  EXPECT_NE(cfg.find("n_iter = 2\n"), std::string::npos);
  EXPECT_NE(cfg.find("horizon = 30\n"), std::string::npos);
  // the echo alone reproduces the run
  ASSERT_EQ(rarl("train --config r/config.resolved --out r2 --quiet").code, 0);
  EXPECT_EQ(slurp(path("r/stats.csv")), slurp(path("r2/stats.csv")));
  EXPECT_EQ(slurp(path("r/config.resolved")), slurp(path("r2/config.resolved")));
  EXPECT_EQ(slurp(path("r/manifest.json")), slurp(path("r2/manifest.json")));
}

TEST_F(Cli, ThreadCountDoesNotChangeOutputs) {
  ASSERT_EQ(rarl(std::string("train --seed 5 --out t1 --threads 1 ") + kTiny).code, 0);
  ASSERT_EQ(rarl(std::string("train --seed 5 --out t8 --threads 8 ") + kTiny).code, 0);
  EXPECT_EQ(slurp(path("t1/stats.csv")), slurp(path("t8/stats.csv")));
  EXPECT_EQ(slurp(path("t1/manifest.json")), slurp(path("t8/manifest.json")));
  ASSERT_EQ(rarl("eval t1 --sweep mass --episodes 4 --threads 1 --out e1").code, 0);
  ASSERT_EQ(rarl("eval t1 --sweep mass --episodes 4 --threads 8 --out e8").code, 0);
  EXPECT_EQ(slurp(path("e1/mass_sweep.csv")), slurp(path("e8/mass_sweep.csv")));
}

TEST_F(Cli, EvalOutputs) {
  ASSERT_EQ(rarl(std::string("train --seed 1 --out r ") + kTiny).code, 0);
  const Result nominal = rarl("eval r --episodes 6");
  ASSERT_EQ(nominal.code, 0) << nominal.err;
  EXPECT_EQ(json::parse(nominal.out)["returns"]["episodes"], 6);
  {
    std::ifstream in(path("r/eval/returns.csv"));
    EXPECT_EQ(rarl::read_csv(in).rows.size(), 6u);
  }
  ASSERT_EQ(rarl("eval r --sweep mass --against r --episodes 2 --set eval.sweep_count=3").code, 0);
  std::ifstream in(path("r/eval/mass_sweep.csv"));
  const rarl::CsvTable sweep = rarl::read_csv(in);
  EXPECT_EQ(sweep.header, (std::vector<std::string>{"mass", "friction", "mean", "std", "cvar", "episodes"}));
  EXPECT_EQ(sweep.rows.size(), 3u);
  std::ifstream din(path("r/eval/mass_sweep_diff.csv"));
  for (const auto& row : rarl::read_csv(din).rows) EXPECT_EQ(row.back(), 0.0);
  EXPECT_TRUE(fs::exists(path("r/eval/mass_sweep.gp")));

  ASSERT_EQ(rarl("eval r --attack --episodes 3 --set eval.attack_iterations=1").code, 0);
  EXPECT_TRUE(fs::exists(path("r/eval/attack.csv")));
  ASSERT_EQ(rarl("eval r --force-field").code, 0);
  EXPECT_TRUE(fs::exists(path("r/eval/force_field.csv")));
  EXPECT_EQ(rarl("eval r --sweep friction").code, 2);  // pendulum has no friction
}

TEST_F(Cli, MissingCheckpointNamesExpectedPath) {
  ASSERT_EQ(rarl(std::string("train --out r ") + kTiny).code, 0);
  fs::remove(path("r/checkpoints/iter_000002.bin"));
  const Result r = rarl("eval r");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("iter_000002.bin"), std::string::npos) << r.err;
  EXPECT_EQ(rarl("eval not_a_run").code, 1);
}

TEST_F(Cli, PercentilesOverRuns) {
  for (int s : {1, 2, 3}) ASSERT_EQ(rarl("train --seed " + std::to_string(s) + " --out r" + std::to_string(s) + " " + kTiny).code, 0);
  const Result r = rarl("eval --percentiles --runs r1 r2 r3 --episodes 3 --out pct");
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(path("pct/percentiles.csv"));
  const rarl::CsvTable t = rarl::read_csv(in);
  ASSERT_EQ(t.rows.size(), 101u);
  for (std::size_t i = 1; i < t.rows.size(); ++i) EXPECT_GE(t.rows[i][1], t.rows[i - 1][1]);
  std::ifstream fin(path("pct/final_rewards.csv"));
  EXPECT_EQ(rarl::read_csv(fin).rows.size(), 3u);
  EXPECT_EQ(rarl("eval --percentiles").code, 1);
}

TEST_F(Cli, TabularRunReportsGap) {
  const Result r = rarl("train --set env.name=tabular --set train.n_iter=3 --set train.n_traj=4 --out g --quiet");
  ASSERT_EQ(r.code, 0) << r.err;
  const json m = json::parse(slurp(path("g/manifest.json")));
  EXPECT_GE(m["equilibrium_gap"].get<double>(), 0.0);
  EXPECT_TRUE(m.contains("shapley_value"));
}
