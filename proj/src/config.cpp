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

#include "rarl/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace rarl {

ConfigError::ConfigError(const std::string& source, int line, const std::string& message)
    : std::runtime_error(line > 0 ? source + ":" + std::to_string(line) + ": " + message : source + ": " + message),
      line_(line) {}

std::vector<double> ExperimentConfig::mass_grid() const {
  if (!eval.masses.empty()) return eval.masses;
  return sweep_values(train.env.mass, eval.sweep_fraction, eval.sweep_count);
}

std::vector<double> ExperimentConfig::friction_grid() const {
  if (!eval.frictions.empty()) return eval.frictions;
  return sweep_values(train.env.friction, eval.sweep_fraction, eval.sweep_count);
}

EvalOptions ExperimentConfig::eval_options(int threads) const {
  EvalOptions o;
  o.n_episodes = eval.episodes;
  o.seed = eval.seed;
  o.alpha = eval.alpha;
  o.deterministic = eval.deterministic;
  o.threads = threads;
  return o;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& v) {
  T out{};
  const char* first = v.data();
  const char* last = v.data() + v.size();
  if (!v.empty() && v[0] == '+') ++first;
  const auto [p, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || p != last || v.empty()) throw std::invalid_argument("invalid number '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("invalid boolean '" + v + "'");
}

template <typename T>
std::vector<T> parse_list(const std::string& v) {
  std::vector<T> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(trim(item)));
  return out;
}

template <typename T>
std::string show(T v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string show(bool v) { return v ? "true" : "false"; }

template <typename T>
std::string show_list(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + show(v[i]);
  return s;
}

BaselineKind parse_baseline(const std::string& v) {
  if (v == "linear") return BaselineKind::linear;
  if (v == "mlp") return BaselineKind::mlp;
  throw std::invalid_argument("baseline must be 'linear' or 'mlp', got '" + v + "'");
}

struct Key {
  std::string section;
  std::string name;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define RARL_NUM(sec, key, field, T)                                                           \
  Key {                                                                                        \
    sec, key, [](ExperimentConfig& c, const std::string& v) { c.field = parse_number<T>(v); }, \
        [](const ExperimentConfig& c) { return show(c.field); }                                \
  }
#define RARL_BOOL(sec, key, field)                                                   \
  Key {                                                                              \
    sec, key, [](ExperimentConfig& c, const std::string& v) { c.field = parse_bool(v); }, \
        [](const ExperimentConfig& c) { return show(c.field); }                      \
  }
#define RARL_STR(sec, key, field)                                           \
  Key {                                                                     \
    sec, key, [](ExperimentConfig& c, const std::string& v) { c.field = v; }, \
        [](const ExperimentConfig& c) { return c.field; }                   \
  }

void add_optimizer_keys(std::vector<Key>& keys, const std::string& sec, OptimizerConfig TrainConfig::*member) {
  auto num = [&](const std::string& name, auto field) {
    using T = std::remove_reference_t<decltype(OptimizerConfig{}.*field)>;
    keys.push_back({sec, name,
                    [member, field](ExperimentConfig& c, const std::string& v) {
                      (c.train.*member).*field = parse_number<T>(v);
                    },
                    [member, field](const ExperimentConfig& c) { return show((c.train.*member).*field); }});
  };
  num("kl_delta", &OptimizerConfig::kl_delta);
  num("cg_iters", &OptimizerConfig::cg_iters);
  num("cg_damping", &OptimizerConfig::cg_damping);
  num("backtrack_ratio", &OptimizerConfig::backtrack_ratio);
  num("max_backtracks", &OptimizerConfig::max_backtracks);
  num("gae_lambda", &OptimizerConfig::gae_lambda);
  num("fisher_stride", &OptimizerConfig::fisher_stride);
  keys.push_back({sec, "baseline",
                  [member](ExperimentConfig& c, const std::string& v) { (c.train.*member).baseline = parse_baseline(v); },
                  [member](const ExperimentConfig& c) {
                    return std::string((c.train.*member).baseline == BaselineKind::linear ? "linear" : "mlp");
                  }});
}

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = [] {
    std::vector<Key> k = {
        RARL_NUM("train", "n_iter", train.n_iter, int),
        RARL_NUM("train", "n_mu", train.n_mu, int),
        RARL_NUM("train", "n_nu", train.n_nu, int),
        RARL_NUM("train", "n_traj", train.n_traj, int),
        RARL_NUM("train", "seed", train.seed, std::uint64_t),
        RARL_BOOL("train", "baseline_mode", train.baseline_mode),
        RARL_NUM("train", "checkpoint_every", train.checkpoint_every, int),

        RARL_STR("env", "name", train.env_name),
        RARL_NUM("env", "mass", train.env.mass, double),
        RARL_NUM("env", "mass_cart", train.env.mass_cart, double),
        RARL_NUM("env", "pole_half_length", train.env.pole_half_length, double),
        RARL_NUM("env", "friction", train.env.friction, double),
        RARL_NUM("env", "gravity", train.env.gravity, double),
        RARL_NUM("env", "dt", train.env.dt, double),
        RARL_NUM("env", "adv_force_cap", train.env.adversary_force_cap, double),
        RARL_NUM("env", "prot_force_cap", train.env.protagonist_force_cap, double),
        RARL_NUM("env", "horizon", train.env.horizon, int),
        RARL_NUM("env", "discount", train.env.discount, double),

        RARL_NUM("game", "seed", train.game.seed, std::uint64_t),
        RARL_NUM("game", "n_states", train.game.n_states, int),
        RARL_NUM("game", "n_actions1", train.game.n_actions1, int),
        RARL_NUM("game", "n_actions2", train.game.n_actions2, int),
        RARL_NUM("game", "horizon", train.game.horizon, int),
        RARL_NUM("game", "discount", train.game.discount, double),
        RARL_STR("game", "path", train.game.path),

        Key{"policy", "hidden",
            [](ExperimentConfig& c, const std::string& v) { c.train.hidden = parse_list<Index>(v); },
            [](const ExperimentConfig& c) { return show_list(c.train.hidden); }},
        RARL_NUM("policy", "init_log_std", train.init_log_std, double),
        RARL_BOOL("policy", "scale_inputs", train.scale_inputs),

        RARL_NUM("eval", "episodes", eval.episodes, int),
        RARL_NUM("eval", "seed", eval.seed, std::uint64_t),
        RARL_NUM("eval", "alpha", eval.alpha, double),
        RARL_BOOL("eval", "deterministic", eval.deterministic),
        Key{"eval", "masses", [](ExperimentConfig& c, const std::string& v) { c.eval.masses = parse_list<double>(v); },
            [](const ExperimentConfig& c) { return show_list(c.eval.masses); }},
        Key{"eval", "frictions",
            [](ExperimentConfig& c, const std::string& v) { c.eval.frictions = parse_list<double>(v); },
            [](const ExperimentConfig& c) { return show_list(c.eval.frictions); }},
        RARL_NUM("eval", "sweep_fraction", eval.sweep_fraction, double),
        RARL_NUM("eval", "sweep_count", eval.sweep_count, int),
        RARL_NUM("eval", "attack_iterations", eval.attack_iterations, int),
        RARL_NUM("eval", "seeds", eval.seeds, int),
    };
    add_optimizer_keys(k, "opt_mu", &TrainConfig::opt_mu);
    add_optimizer_keys(k, "opt_nu", &TrainConfig::opt_nu);
    return k;
  }();
  return keys;
}

#undef RARL_NUM
#undef RARL_BOOL
#undef RARL_STR

const Key* find_key(const std::string& dotted) {
  for (const auto& k : registry())
    if (k.section + "." + k.name == dotted) return &k;
  return nullptr;
}

struct Assignment {
  std::string key;
  std::string value;
  int line;
  std::string source;
};

void validate(const ExperimentConfig& c) {
  const auto& n = c.train.env_name;
  if (n != "pendulum" && n != "slider" && n != "tabular")
    throw std::invalid_argument("env.name must be pendulum, slider or tabular, got '" + n + "'");
  c.train.validate();
  if (n == "tabular") {
    const auto& g = c.train.game;
    if (g.n_states < 1 || g.n_actions1 < 1 || g.n_actions2 < 1) throw std::invalid_argument("game sizes must be >= 1");
    if (g.horizon < 1) throw std::invalid_argument("game.horizon must be >= 1");
    if (!(g.discount > 0.0 && g.discount < 1.0)) throw std::invalid_argument("game.discount must be in (0, 1)");
  }
  const auto& e = c.eval;
  if (e.episodes < 1) throw std::invalid_argument("eval.episodes must be >= 1");
  if (!(e.alpha > 0.0 && e.alpha <= 1.0)) throw std::invalid_argument("eval.alpha must be in (0, 1]");
  if (e.sweep_count < 1) throw std::invalid_argument("eval.sweep_count must be >= 1");
  if (!(e.sweep_fraction >= 0.0 && e.sweep_fraction < 1.0))
    throw std::invalid_argument("eval.sweep_fraction must be in [0, 1)");
  if (e.attack_iterations < 1) throw std::invalid_argument("eval.attack_iterations must be >= 1");
  if (e.seeds < 1) throw std::invalid_argument("eval.seeds must be >= 1");
  for (double m : e.masses)
    if (!(m > 0.0)) throw std::invalid_argument("eval.masses must be positive");
  for (double f : e.frictions)
    if (!(f >= 0.0)) throw std::invalid_argument("eval.frictions must be >= 0");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides,
                              const std::string& source) {
  std::vector<Assignment> assigns;
  std::istringstream in(text);
  std::string raw, section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(source, line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const auto& k : registry()) known = known || k.section == section;
      if (!known) throw ConfigError(source, line_no, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(source, line_no, "expected 'key = value'");
    if (section.empty()) throw ConfigError(source, line_no, "key outside of any [section]");
    const std::string key = section + "." + trim(line.substr(0, eq));
    if (!find_key(key)) throw ConfigError(source, line_no, "unknown key '" + key + "'");
    assigns.push_back({key, trim(line.substr(eq + 1)), line_no, source});
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set", 0, "expected section.key=value, got '" + o + "'");
    const std::string key = trim(o.substr(0, eq));
    if (!find_key(key)) throw ConfigError("--set", 0, "unknown key '" + key + "'");
    assigns.push_back({key, trim(o.substr(eq + 1)), 0, "--set"});
  }

  // physics and iteration defaults depend on the environment, so settle env.name first
  ExperimentConfig cfg;
  for (const auto& a : assigns)
    if (a.key == "env.name") cfg.train.env_name = a.value;
  if (cfg.train.env_name == "slider") {
    cfg.train.env = slider_defaults();
    cfg.train.n_iter = 500;
  }

  for (const auto& a : assigns) {
    try {
      find_key(a.key)->set(cfg, a.value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(a.source, a.line, a.key + ": " + e.what());
    }
  }
  try {
    validate(cfg);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source, 0, e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, 0, "cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides, path);
}

std::string format_config(const ExperimentConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& k : registry()) {
    if (k.section != section) {
      if (!section.empty()) out << '\n';
      section = k.section;
      out << '[' << section << "]\n";
    }
    out << k.name << " = " << k.get(config) << '\n';
  }
  return out.str();
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : registry()) out.push_back(k.section + "." + k.name);
  return out;
}

}  // namespace rarl
