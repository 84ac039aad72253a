#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "robust_collect/dataset.hpp"
#include "robust_collect/envs.hpp"
#include "robust_collect/policies.hpp"
#include "robust_collect/rng.hpp"

namespace robust_collect {

// Running mean of per-step log-likelihood gradients evaluated at theta_e.
class GradientAccumulator {
 public:
  GradientAccumulator() = default;
  explicit GradientAccumulator(Eigen::Index dim) : mean_(ParamVector::Zero(dim)) {}

  const ParamVector& mean_grad() const { return mean_; }
  std::size_t count() const { return count_; }

  // mean <- i/(i+1) mean + 1/(i+1) g, i <- i + 1.
  void absorb(const ParamVector& g);
  // The mean absorb(g) would produce, without changing the accumulator.
  ParamVector preview(const ParamVector& g) const;

 private:
  void check(const ParamVector& g) const;

  ParamVector mean_;
  std::size_t count_ = 0;
};

// Absorbs the score of (state, action) under the evaluation policy.
void absorb_step(GradientAccumulator& acc, const Policy& eval_policy, const State& state,
                 const Action& action);

enum class StrategyKind { OS, ROS, ROA, BPG };

std::string_view to_string(StrategyKind kind);
StrategyKind parse_strategy_kind(std::string_view name);

struct StrategyConfig {
  std::string name;
  StrategyKind kind = StrategyKind::OS;
  double alpha = 0.0;  // ROS and BPG step size
  double rho = 1.0;    // ROA correction probability
  int m = 9;           // ROA candidate count for continuous actions
  int k = 10;          // BPG batch size (episodes)
};

struct ChosenAction {
  Action action;
  double behavior_log_prob = 0.0;
  bool deterministic = false;
};

// Stateful action chooser. One instance belongs to a single trial.
class CollectionStrategy {
 public:
  explicit CollectionStrategy(Policy eval_policy) : eval_(std::move(eval_policy)) {}
  virtual ~CollectionStrategy() = default;

  virtual StrategyKind kind() const = 0;
  // Throws DivergenceError when the behavior policy becomes ill-conditioned.
  virtual ChosenAction next_action(const State& state, Rng& rng) = 0;
  // Reports the action actually executed in `state`.
  virtual void observe(const State& state, const Action& action);
  virtual void end_episode(const Episode& episode);
  // Treat `initial` as already-collected history.
  virtual void seed_with_data(const Dataset& initial);

  const Policy& eval_policy() const { return eval_; }

 protected:
  Policy eval_;
};

class OnPolicySampler final : public CollectionStrategy {
 public:
  using CollectionStrategy::CollectionStrategy;
  StrategyKind kind() const override { return StrategyKind::OS; }
  ChosenAction next_action(const State& state, Rng& rng) override;
};

// Samples from theta_b = theta_e - alpha * mean_grad, recomputed every step.
class RobustOnPolicySampler final : public CollectionStrategy {
 public:
  RobustOnPolicySampler(Policy eval_policy, double alpha);
  StrategyKind kind() const override { return StrategyKind::ROS; }
  ChosenAction next_action(const State& state, Rng& rng) override;
  void observe(const State& state, const Action& action) override;
  void seed_with_data(const Dataset& initial) override;

  const GradientAccumulator& accumulator() const { return acc_; }
  ParamVector behavior_params() const;

 private:
  double alpha_;
  GradientAccumulator acc_;
};

// With probability rho takes the candidate action that minimizes the norm of
// the updated mean score; otherwise samples the evaluation policy.
class RobustOnPolicyActor final : public CollectionStrategy {
 public:
  RobustOnPolicyActor(Policy eval_policy, double rho, int m, std::uint64_t seed);
  StrategyKind kind() const override { return StrategyKind::ROA; }
  ChosenAction next_action(const State& state, Rng& rng) override;
  void observe(const State& state, const Action& action) override;
  void seed_with_data(const Dataset& initial) override;

  const GradientAccumulator& accumulator() const { return acc_; }
  // Deterministic argmin over candidates. Ties go to the action taken least
  // often in this state (tabular discrete policies), then to the lowest
  // index/value.
  Action correction_action(const State& state) const;

 private:
  void record(const State& state, const Action& action);

  double rho_;
  int m_;
  Rng coin_;  // separate stream so rho = 0 leaves the action stream untouched
  GradientAccumulator acc_;
  bool count_ties_;
  std::map<std::pair<int, int>, std::size_t> taken_;
};

// Behavior policy gradient: descends the variance of the ordinary importance
// sampling estimator after every k completed episodes.
class BehaviorPolicyGradient final : public CollectionStrategy {
 public:
  BehaviorPolicyGradient(Policy eval_policy, int k, double alpha, double gamma);
  StrategyKind kind() const override { return StrategyKind::BPG; }
  ChosenAction next_action(const State& state, Rng& rng) override;
  void end_episode(const Episode& episode) override;

  const ParamVector& behavior_params() const { return theta_b_; }
  // theta_b <- theta_b - alpha * mean_i[-g_i^2 w_i^2 sum_t score_t(theta_b)].
  // Returns false (and leaves theta_b unchanged) when a weight is non-finite.
  bool bpg_update(std::span<const Episode> batch);
  std::size_t skipped_updates() const { return skipped_; }
  std::size_t pending() const { return batch_.size(); }

 private:
  int k_;
  double alpha_;
  double gamma_;
  ParamVector theta_b_;
  std::vector<Episode> batch_;
  std::size_t skipped_ = 0;
};

std::unique_ptr<CollectionStrategy> make_strategy(const StrategyConfig& config,
                                                  const Policy& eval_policy, double gamma,
                                                  std::uint64_t seed);

struct CheckpointSnapshot {
  std::int64_t checkpoint = 0;      // requested collected-step count
  std::size_t episodes = 0;         // dataset prefix length (initial episodes included)
  std::size_t collected_steps = 0;  // collected steps inside that prefix
};

struct CollectionResult {
  Dataset dataset;
  std::vector<CheckpointSnapshot> snapshots;
  bool diverged = false;
  std::string divergence_reason;
};

// Seeds the strategy with `initial`, then runs whole episodes until at least
// `step_budget` collected steps exist. Each checkpoint is snapshotted at the
// first episode boundary at or after it. Environment noise and action
// sampling draw from separate streams.
CollectionResult collect(CollectionStrategy& strategy, const Environment& env,
                         std::int64_t step_budget, const Dataset& initial, Rng& env_rng,
                         Rng& action_rng, std::span<const std::int64_t> checkpoints = {});

}  // namespace robust_collect
