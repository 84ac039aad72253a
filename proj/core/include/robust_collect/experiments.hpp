#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "robust_collect/collectors.hpp"
#include "robust_collect/dataset.hpp"
#include "robust_collect/envs.hpp"
#include "robust_collect/metrics.hpp"
#include "robust_collect/policies.hpp"

namespace robust_collect {

// ---------------------------------------------------------------------------
// Evaluation-policy preparation

struct TrainingConfig {
  double learning_rate = 0.01;
  bool adam = true;
  // Training stops once the mean return over the last `window` episodes
  // first exceeds this value.
  double threshold = 0.0;
  int window = 100;
  int max_episodes = 100000;
  std::uint64_t seed = 0;
  std::vector<int> hidden{64, 64};
};

struct TrainingResult {
  Policy policy;
  int episodes = 0;
  double window_mean = 0.0;
  std::vector<double> returns;  // per-episode discounted return, in order
};

// Episodic REINFORCE with a running-mean baseline. The MLP input normalizer
// accumulates statistics during training and is frozen in the snapshot.
// Throws Error if the threshold is not reached within max_episodes.
TrainingResult train_reinforce(const Environment& env, const TrainingConfig& config);

struct TrueValue {
  double mu_g = 0.0;
  double sigma_g = 0.0;
  double sigma_mu = 0.0;  // sigma_g / sqrt(n)
  double mean_episode_steps = 0.0;
  std::size_t n = 0;
};

TrueValue estimate_true_value(const Environment& env, const Policy& policy, std::size_t n, Rng& rng);
// Exact value of a MultiBandit policy: sum_a pi(a) mean_a (normalizer applied).
double exact_bandit_value(const Environment& env, const Policy& policy);

// Episodes sampled from the delta-perturbed evaluation policy, tagged
// InitialOffPolicy, with behavior log-probs under the perturbed policy.
Dataset prepare_offpolicy_data(const Environment& env, const Policy& eval_policy, double delta,
                               int num_trajectories, Rng& env_rng, Rng& action_rng);

// ---------------------------------------------------------------------------
// Experiment configuration

struct InitialDataConfig {
  double delta = 0.1;
  int trajectories = 100;
};

// Estimators a strategy reports:
//   MC       mean return over all data (initial + collected)
//   MC_NEW   mean return over collected episodes only
//   OIS/WIS  importance sampling over all data
//   WIS+MC   WIS on initial data combined with MC on collected data,
//            weighted by episode counts
struct StrategySpec {
  StrategyConfig config;
  std::vector<std::string> estimators;
};

std::vector<std::string> default_estimators(StrategyKind kind, bool with_initial_data);

struct ExperimentConfig {
  std::string name = "experiment";
  EnvSpec env;
  std::filesystem::path policy_path;
  std::optional<TrainingConfig> training;
  std::optional<TrueValue> true_value;
  std::size_t true_value_rollouts = 1000000;
  std::vector<StrategySpec> strategies;
  double budget_multiplier = 8192.0;  // in units of mean episode steps
  int trials = 200;
  std::optional<InitialDataConfig> initial_data;
  std::uint64_t base_seed = 0;
  bool continuous_kl = false;
  FitOptions fit;

  // Ground-truth value in emitted (normalized) reward units.
  double target_value() const;
  double mean_episode_steps() const;
  std::int64_t step_budget() const;
  // ceil(2^k T) for k = 0.. below the budget, then the budget itself; a
  // leading 0 when initial data is configured.
  std::vector<std::int64_t> checkpoints() const;
  // Throws ConfigError if invariants fail.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Trials and aggregation

struct TrialRow {
  std::uint64_t seed = 0;
  std::int64_t checkpoint_steps = 0;
  std::string estimator;
  double estimate = 0.0;
  double squared_error = 0.0;
  std::optional<double> kl;
  double grad_norm = 0.0;
  std::optional<std::size_t> unique_pairs;
  bool diverged = false;
};

struct TrialResult {
  std::uint64_t seed = 0;
  std::string strategy;
  std::vector<TrialRow> rows;
  bool diverged = false;
};

// Everything a trial needs that is shared across strategies and seeds.
struct ExperimentContext {
  ExperimentConfig config;
  Environment env;
  Policy eval_policy;
};

ExperimentContext make_context(ExperimentConfig config);
ExperimentContext make_context(ExperimentConfig config, Policy eval_policy);

// Trial seed i uses seed = base_seed + i. Within a seed every strategy sees the
// same initial data and the same environment/action random streams.
TrialResult run_trial(const ExperimentContext& ctx, const StrategySpec& strategy, std::uint64_t seed);

struct AggregateRow {
  std::int64_t checkpoint_steps = 0;
  std::string strategy;
  std::string estimator;
  double mse = 0.0;
  double mse_stderr = 0.0;
  double se_median = 0.0;
  double se_q25 = 0.0;
  double se_q75 = 0.0;
  std::size_t trials = 0;
};

// Linear-interpolation quantile (position q * (n - 1) in sorted order).
double quantile_linear(std::vector<double> values, double q);

// Squared errors are recomputed against `target`. Trials flagged as diverged
// are kept unless `drop_diverged` is set.
std::vector<AggregateRow> aggregate(const std::vector<TrialResult>& trials, double target,
                                    bool drop_diverged = false);

struct ExperimentResult {
  // One entry per strategy, trials in seed order.
  std::vector<std::vector<TrialResult>> trials;
  std::vector<AggregateRow> aggregate;
};

// Runs every strategy (optionally filtered by name) for config.trials seeds
// on `parallel` worker threads. Output is independent of `parallel`.
ExperimentResult run_experiment(const ExperimentContext& ctx, int parallel,
                                const std::vector<std::string>& strategy_filter = {});

void write_trial_csv(std::ostream& os, const std::vector<TrialResult>& trials);
void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows);
std::vector<TrialResult> read_trial_csv(std::istream& is, const std::string& strategy);

// ---------------------------------------------------------------------------
// Sensitivity sweeps

enum class SweepAxis { RewardMeanFactor, RewardScaleFactor, Epsilon };

std::string_view to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view name);

struct SweepConfig {
  SweepAxis axis = SweepAxis::RewardMeanFactor;
  std::vector<double> values;
  double budget_multiplier = 1000.0;
  int trials = 500;
  double ros_alpha = 1000.0;
  double roa_rho = 1.0;
  std::size_t true_value_rollouts = 100000;
};

struct SweepRow {
  double axis_value = 0.0;
  std::string strategy;
  double mse = 0.0;
  double mse_stderr = 0.0;
  double relative_mse = 0.0;  // MSE(strategy) / MSE(OS); 1 when both are 0
};

// The base context supplies environment, snapshot policy and seeds; each axis
// value rebuilds environment or policy and runs OS, ROS and ROA.
std::vector<SweepRow> run_sweep(const ExperimentContext& base, const SweepConfig& sweep, int parallel);
void write_sweep_csv(std::ostream& os, SweepAxis axis, const std::vector<SweepRow>& rows);

}  // namespace robust_collect
