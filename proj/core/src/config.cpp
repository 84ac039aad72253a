#include "robust_collect/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "robust_collect/errors.hpp"

namespace robust_collect {

namespace {

void check_keys(const YAML::Node& node, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!node.IsMap()) throw ConfigError(fmt::format("{}: expected a mapping", where));
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(fmt::format("{}: unknown key '{}'", where, key));
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out, std::string_view where) {
  const YAML::Node v = node[key];
  if (!v) return;
  try {
    out = v.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(fmt::format("{}.{}: invalid value", where, key));
  }
}

template <typename T>
void read_optional(const YAML::Node& node, const char* key, std::optional<T>& out, std::string_view where) {
  if (!node[key]) return;
  T v{};
  read(node, key, v, where);
  out = v;
}

EnvSpec parse_env(const YAML::Node& n) {
  check_keys(n, "env", {"domain", "gamma", "max_steps", "reward_mean_factor", "reward_scale_factor",
                        "bandit_arms", "bandit_means", "bandit_scales", "bandit_seed", "reward_normalizer"});
  if (!n["domain"]) throw ConfigError("env.domain is required");
  EnvSpec spec = EnvSpec::defaults(parse_env_kind(n["domain"].as<std::string>()));
  read(n, "gamma", spec.gamma, "env");
  read(n, "max_steps", spec.max_steps, "env");
  read(n, "reward_mean_factor", spec.reward_mean_factor, "env");
  read(n, "reward_scale_factor", spec.reward_scale_factor, "env");
  read(n, "bandit_arms", spec.bandit_arms, "env");
  read(n, "bandit_means", spec.bandit_means, "env");
  read(n, "bandit_scales", spec.bandit_scales, "env");
  read_optional(n, "reward_normalizer", spec.reward_normalizer, "env");
  if (n["bandit_seed"]) {
    if (n["bandit_means"] || n["bandit_scales"]) {
      throw ConfigError("env: bandit_seed conflicts with explicit bandit_means/bandit_scales");
    }
    draw_default_bandit(spec, n["bandit_seed"].as<std::uint64_t>());
  }
  try {
    validate(spec);
  } catch (const InvalidArgument& e) {
    throw ConfigError(fmt::format("env: {}", e.what()));
  }
  return spec;
}

TrainingConfig parse_training(const YAML::Node& n) {
  check_keys(n, "training", {"learning_rate", "adam", "threshold", "window", "max_episodes", "seed", "hidden"});
  TrainingConfig t;
  read(n, "learning_rate", t.learning_rate, "training");
  read(n, "adam", t.adam, "training");
  if (!n["threshold"]) throw ConfigError("training.threshold is required");
  read(n, "threshold", t.threshold, "training");
  read(n, "window", t.window, "training");
  read(n, "max_episodes", t.max_episodes, "training");
  read(n, "seed", t.seed, "training");
  read(n, "hidden", t.hidden, "training");
  return t;
}

TrueValue parse_true_value(const YAML::Node& n) {
  check_keys(n, "true_value", {"mu_g", "sigma_g", "sigma_mu", "mean_episode_steps", "n"});
  TrueValue tv;
  for (const char* k : {"mu_g", "mean_episode_steps"}) {
    if (!n[k]) throw ConfigError(fmt::format("true_value.{} is required", k));
  }
  read(n, "mu_g", tv.mu_g, "true_value");
  read(n, "sigma_g", tv.sigma_g, "true_value");
  read(n, "sigma_mu", tv.sigma_mu, "true_value");
  read(n, "mean_episode_steps", tv.mean_episode_steps, "true_value");
  read(n, "n", tv.n, "true_value");
  return tv;
}

StrategySpec parse_strategy(const YAML::Node& n, bool with_initial_data) {
  check_keys(n, "strategies[]", {"name", "kind", "alpha", "rho", "m", "k", "estimators"});
  if (!n["kind"]) throw ConfigError("strategies[]: kind is required");
  StrategySpec s;
  try {
    s.config.kind = parse_strategy_kind(n["kind"].as<std::string>());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  s.config.name = std::string(to_string(s.config.kind));
  read(n, "name", s.config.name, "strategies[]");
  read(n, "alpha", s.config.alpha, "strategies[]");
  read(n, "rho", s.config.rho, "strategies[]");
  read(n, "m", s.config.m, "strategies[]");
  read(n, "k", s.config.k, "strategies[]");
  s.estimators = default_estimators(s.config.kind, with_initial_data);
  read(n, "estimators", s.estimators, "strategies[]");
  return s;
}

SweepConfig parse_sweep(const YAML::Node& n) {
  check_keys(n, "sweep", {"axis", "values", "budget_multiplier", "trials", "ros_alpha", "roa_rho",
                          "true_value_rollouts"});
  if (!n["axis"] || !n["values"]) throw ConfigError("sweep: axis and values are required");
  SweepConfig s;
  s.axis = parse_sweep_axis(n["axis"].as<std::string>());
  read(n, "values", s.values, "sweep");
  read(n, "budget_multiplier", s.budget_multiplier, "sweep");
  read(n, "trials", s.trials, "sweep");
  read(n, "ros_alpha", s.ros_alpha, "sweep");
  read(n, "roa_rho", s.roa_rho, "sweep");
  read(n, "true_value_rollouts", s.true_value_rollouts, "sweep");
  if (s.values.empty()) throw ConfigError("sweep.values must not be empty");
  for (double v : s.values) {
    if (s.axis == SweepAxis::Epsilon && !(v > 0.0 && v <= 1.0)) {
      throw ConfigError(fmt::format("sweep: epsilon {} outside (0, 1]", v));
    }
    if (s.axis != SweepAxis::Epsilon && !(v >= 0.0)) {
      throw ConfigError(fmt::format("sweep: factor {} must be >= 0", v));
    }
  }
  return s;
}

}  // namespace

ConfigFile parse_config(std::string_view yaml, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml));
  } catch (const YAML::Exception& e) {
    throw ConfigError(fmt::format("yaml: {}", e.what()));
  }
  check_keys(root, "config", {"name", "env", "policy", "training", "true_value", "true_value_rollouts",
                              "strategies", "budget_multiplier", "trials", "initial_data", "base_seed",
                              "continuous_kl", "fit", "sweep"});
  ConfigFile file;
  ExperimentConfig& c = file.experiment;
  read(root, "name", c.name, "config");
  if (!root["env"]) throw ConfigError("env is required");
  c.env = parse_env(root["env"]);
  if (root["policy"]) c.policy_path = base_dir / root["policy"].as<std::string>();
  if (root["training"]) c.training = parse_training(root["training"]);
  if (root["true_value"]) c.true_value = parse_true_value(root["true_value"]);
  read(root, "true_value_rollouts", c.true_value_rollouts, "config");
  read(root, "budget_multiplier", c.budget_multiplier, "config");
  read(root, "trials", c.trials, "config");
  read(root, "base_seed", c.base_seed, "config");
  read(root, "continuous_kl", c.continuous_kl, "config");
  if (const YAML::Node opd = root["initial_data"]) {
    check_keys(opd, "initial_data", {"delta", "trajectories"});
    InitialDataConfig i;
    read(opd, "delta", i.delta, "initial_data");
    read(opd, "trajectories", i.trajectories, "initial_data");
    c.initial_data = i;
  }
  if (const YAML::Node fit = root["fit"]) {
    check_keys(fit, "fit", {"iterations", "step_size"});
    read(fit, "iterations", c.fit.iterations, "fit");
    read(fit, "step_size", c.fit.step_size, "fit");
  }
  if (const YAML::Node ss = root["strategies"]) {
    if (!ss.IsSequence()) throw ConfigError("strategies: expected a list");
    for (const auto& s : ss) c.strategies.push_back(parse_strategy(s, c.initial_data.has_value()));
  }
  if (root["sweep"]) file.sweep = parse_sweep(root["sweep"]);
  if (c.trials < 1) throw ConfigError("trials must be >= 1");
  return file;
}

ConfigFile load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_true_value(std::ostream& os, const TrueValue& tv) {
  os << "mu_g: " << fmt::format("{:.17g}", tv.mu_g) << '\n'
     << "sigma_g: " << fmt::format("{:.17g}", tv.sigma_g) << '\n'
     << "sigma_mu: " << fmt::format("{:.17g}", tv.sigma_mu) << '\n'
     << "mean_episode_steps: " << fmt::format("{:.17g}", tv.mean_episode_steps) << '\n'
     << "n: " << tv.n << '\n';
}

TrueValue read_true_value(std::istream& is) {
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return parse_true_value(YAML::Load(ss.str()));
  } catch (const YAML::Exception& e) {
    throw ConfigError(fmt::format("true value record: {}", e.what()));
  }
}

}  // namespace robust_collect
