#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "robust_collect/acceptance.hpp"
#include "robust_collect/config.hpp"
#include "robust_collect/errors.hpp"
#include "robust_collect/experiments.hpp"

namespace fs = std::filesystem;
using namespace robust_collect;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitDivergence = 2;
constexpr int kExitVerify = 3;

struct Options {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  int parallel = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::string> strategies;
  std::optional<std::size_t> rollouts;
  bool drop_diverged = false;
  bool quick = false;
};

ConfigFile load(const Options& o) {
  ConfigFile file = load_config(o.config);
  if (o.seed) file.experiment.base_seed = *o.seed;
  if (o.trials) {
    if (*o.trials < 1) throw ConfigError("--trials must be >= 1");
    file.experiment.trials = *o.trials;
    if (file.sweep) file.sweep->trials = *o.trials;
  }
  return file;
}

fs::path out_dir(const Options& o) {
  fs::path dir(o.out);
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw Error(fmt::format("cannot write '{}'", path.string()));
  return f;
}

int cmd_train(const Options& o) {
  ConfigFile file = load(o);
  ExperimentConfig& cfg = file.experiment;
  if (!cfg.training) throw ConfigError(fmt::format("{}: no training section", o.config));
  TrainingConfig training = *cfg.training;
  if (o.seed) training.seed = *o.seed;
  const Environment env(cfg.env);
  const TrainingResult res = train_reinforce(env.with_normalizer(std::nullopt), training);

  const fs::path dir = out_dir(o);
  save_policy(dir / (cfg.name + ".policy"), res.policy);
  std::ofstream log = open_out(dir / (cfg.name + "_training.csv"));
  log << "episode,return\n";
  for (std::size_t i = 0; i < res.returns.size(); ++i) log << i << ',' << fmt::format("{:.17g}", res.returns[i]) << '\n';
  fmt::print("trained {} in {} episodes, window mean {:.6g}\n", cfg.name, res.episodes, res.window_mean);
  return 0;
}

int cmd_true_value(const Options& o) {
  ConfigFile file = load(o);
  ExperimentConfig& cfg = file.experiment;
  const Policy policy = load_policy(cfg.policy_path);
  const Environment env(cfg.env);
  const std::size_t n = o.rollouts.value_or(cfg.true_value_rollouts);
  Rng rng = make_rng(cfg.base_seed, {0x7a1eULL});
  const TrueValue tv = estimate_true_value(env.with_normalizer(std::nullopt), policy, n, rng);

  const fs::path dir = out_dir(o);
  std::ofstream f = open_out(dir / (cfg.name + "_true_value.yaml"));
  write_true_value(f, tv);
  fmt::print("{}: T {:.4f}  mu_g {:.6g} +- {:.3g}  (n = {})\n", cfg.name, tv.mean_episode_steps, tv.mu_g,
             tv.sigma_mu, tv.n);
  if (cfg.env.reward_normalizer) {
    Rng rng2 = make_rng(cfg.base_seed, {0x7a1fULL});
    const TrueValue norm = estimate_true_value(env, policy, n, rng2);
    fmt::print("{}: normalized mu_g {:.6g} +- {:.3g}\n", cfg.name, norm.mu_g, norm.sigma_mu);
  }
  return 0;
}

int cmd_run(const Options& o) {
  ConfigFile file = load(o);
  const ExperimentContext ctx = make_context(std::move(file.experiment));
  const ExperimentResult res = run_experiment(ctx, o.parallel, o.strategies);

  const fs::path dir = out_dir(o);
  bool diverged = false;
  for (const auto& per : res.trials) {
    if (per.empty()) continue;
    std::ofstream f = open_out(dir / fmt::format("{}_{}.csv", ctx.config.name, per.front().strategy));
    write_trial_csv(f, per);
    const auto n = std::count_if(per.begin(), per.end(), [](const TrialResult& t) { return t.diverged; });
    if (n > 0) {
      diverged = true;
      fmt::print(stderr, "{}: {} of {} trials diverged\n", per.front().strategy, n, per.size());
    }
  }
  std::vector<AggregateRow> rows = res.aggregate;
  if (o.drop_diverged) {
    std::vector<TrialResult> all;
    for (const auto& per : res.trials) all.insert(all.end(), per.begin(), per.end());
    rows = aggregate(all, ctx.config.target_value(), true);
  }
  std::ofstream f = open_out(dir / fmt::format("{}_aggregate.csv", ctx.config.name));
  write_aggregate_csv(f, rows);

  const std::int64_t final_cp = ctx.config.step_budget();
  for (const auto& r : rows) {
    if (r.checkpoint_steps == final_cp) {
      fmt::print("{:>10} {:>8}  mse {:.4e} +- {:.2e}\n", r.strategy, r.estimator, r.mse, r.mse_stderr);
    }
  }
  return diverged ? kExitDivergence : 0;
}

int cmd_sweep(const Options& o) {
  ConfigFile file = load(o);
  if (!file.sweep) throw ConfigError(fmt::format("{}: no sweep section", o.config));
  const ExperimentContext ctx = make_context(std::move(file.experiment));
  const auto rows = run_sweep(ctx, *file.sweep, o.parallel);
  const fs::path dir = out_dir(o);
  std::ofstream f = open_out(dir / fmt::format("{}_sweep_{}.csv", ctx.config.name, to_string(file.sweep->axis)));
  write_sweep_csv(f, file.sweep->axis, rows);
  for (const auto& r : rows) fmt::print("{:>8g} {:>4} relative mse {:.4f}\n", r.axis_value, r.strategy, r.relative_mse);
  return 0;
}

int cmd_verify(const Options& o) {
  AcceptanceOptions opts;
  opts.config_dir = o.config.empty() ? std::string(ROBUST_COLLECT_DEFAULT_CONFIG_DIR) : o.config;
  opts.parallel = o.parallel;
  const auto results = run_acceptance(opts, std::cout);
  return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; }) ? 0 : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust on-policy data collection experiments"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Experiment config (YAML)")->required();
    sub->add_option("--out", o.out, "Output directory (created if absent)");
    sub->add_option("--seed", o.seed, "Override the base seed");
  };

  CLI::App* train = app.add_subcommand("train-policy", "Pretrain an evaluation policy with REINFORCE");
  add_common(train);

  CLI::App* tv = app.add_subcommand("true-value", "Monte Carlo ground truth for the configured policy");
  add_common(tv);
  tv->add_option("--rollouts", o.rollouts, "Rollout count (default from config)");

  CLI::App* run = app.add_subcommand("run", "Run every configured strategy and write CSVs");
  add_common(run);
  run->add_option("--trials", o.trials, "Override the trial count");
  run->add_option("--parallel", o.parallel, "Worker threads")->check(CLI::PositiveNumber);
  run->add_option("--strategy", o.strategies, "Only run the named strategy (repeatable)");
  run->add_flag("--drop-diverged", o.drop_diverged, "Exclude diverged trials from the aggregate");

  CLI::App* sweep = app.add_subcommand("sweep", "Relative-MSE sensitivity sweep");
  add_common(sweep);
  sweep->add_option("--trials", o.trials, "Override the per-point trial count");
  sweep->add_option("--parallel", o.parallel, "Worker threads")->check(CLI::PositiveNumber);

  CLI::App* verify = app.add_subcommand("verify", "Run the acceptance suite");
  verify->add_option("--config", o.config, "Directory holding the shipped configs (default: the source tree's configs/)");
  verify->add_option("--parallel", o.parallel, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train) return cmd_train(o);
    if (*tv) return cmd_true_value(o);
    if (*run) return cmd_run(o);
    if (*sweep) return cmd_sweep(o);
    if (*verify) return cmd_verify(o);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 4;
  }
  return 0;
}
