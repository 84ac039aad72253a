#include "robust_collect/collectors.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "robust_collect/errors.hpp"

namespace robust_collect {
namespace {

constexpr double kTieTolerance = 1e-12;

}  // namespace

// ---------------------------------------------------------------------------
// GradientAccumulator

void GradientAccumulator::check(const ParamVector& g) const {
  if (g.size() != mean_.size()) {
    throw InvalidArgument(fmt::format("gradient has {} entries, accumulator expects {}", g.size(),
                                      mean_.size()));
  }
}

void GradientAccumulator::absorb(const ParamVector& g) {
  check(g);
  const double i = static_cast<double>(count_);
  mean_ = (i / (i + 1.0)) * mean_ + (1.0 / (i + 1.0)) * g;
  ++count_;
}

ParamVector GradientAccumulator::preview(const ParamVector& g) const {
  check(g);
  const double i = static_cast<double>(count_);
  return (i / (i + 1.0)) * mean_ + (1.0 / (i + 1.0)) * g;
}

void absorb_step(GradientAccumulator& acc, const Policy& eval_policy, const State& state,
                 const Action& action) {
  acc.absorb(eval_policy.log_prob_grad(state, action));
}

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::OS: return "OS";
    case StrategyKind::ROS: return "ROS";
    case StrategyKind::ROA: return "ROA";
    case StrategyKind::BPG: return "BPG";
  }
  return "?";
}

StrategyKind parse_strategy_kind(std::string_view name) {
  for (StrategyKind k : {StrategyKind::OS, StrategyKind::ROS, StrategyKind::ROA, StrategyKind::BPG}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError(fmt::format("unknown strategy kind '{}'", name));
}

// ---------------------------------------------------------------------------
// Strategies

void CollectionStrategy::observe(const State&, const Action&) {}
void CollectionStrategy::end_episode(const Episode&) {}
void CollectionStrategy::seed_with_data(const Dataset&) {}

ChosenAction OnPolicySampler::next_action(const State& state, Rng& rng) {
  const ActionDistribution d = eval_.distribution(state);
  const Action a = d.sample(rng);
  return {a, d.log_prob(a), false};
}

RobustOnPolicySampler::RobustOnPolicySampler(Policy eval_policy, double alpha)
    : CollectionStrategy(std::move(eval_policy)), alpha_(alpha), acc_(eval_.num_params()) {
  if (!(alpha_ >= 0.0) || !std::isfinite(alpha_)) throw InvalidArgument("ROS alpha must be >= 0");
}

ParamVector RobustOnPolicySampler::behavior_params() const {
  return eval_.params() - alpha_ * acc_.mean_grad();
}

ChosenAction RobustOnPolicySampler::next_action(const State& state, Rng& rng) {
  const ParamVector theta_b = behavior_params();
  if (!eval_.well_conditioned(state, theta_b)) {
    throw DivergenceError(fmt::format("ROS behavior policy diverged after {} steps", acc_.count()));
  }
  const ActionDistribution d = eval_.distribution(state, theta_b);
  const Action a = d.sample(rng);
  return {a, d.log_prob(a), false};
}

void RobustOnPolicySampler::observe(const State& state, const Action& action) {
  absorb_step(acc_, eval_, state, action);
}

void RobustOnPolicySampler::seed_with_data(const Dataset& initial) {
  for (const auto& ep : initial.episodes) {
    for (const auto& s : ep.steps) absorb_step(acc_, eval_, s.state, s.action);
  }
}

RobustOnPolicyActor::RobustOnPolicyActor(Policy eval_policy, double rho, int m, std::uint64_t seed)
    : CollectionStrategy(std::move(eval_policy)), rho_(rho), m_(m), coin_(seed),
      acc_(eval_.num_params()), count_ties_(eval_.tabular_features() && eval_.discrete()) {
  if (!(rho_ >= 0.0 && rho_ <= 1.0)) throw InvalidArgument("ROA rho must lie in [0, 1]");
  if (m_ < 1) throw InvalidArgument("ROA m must be positive");
}

Action RobustOnPolicyActor::correction_action(const State& state) const {
  const double i = static_cast<double>(acc_.count());
  const ParamVector scaled = (i / (i + 1.0)) * acc_.mean_grad();
  const double w = 1.0 / (i + 1.0);

  auto taken = [&](const Action& a) -> std::size_t {
    if (!count_ties_) return 0;
    const auto it = taken_.find({state_index(state), a.index()});
    return it == taken_.end() ? 0 : it->second;
  };
  auto pick = [&](const std::vector<Action>& candidates, auto&& score_of) {
    std::vector<double> norms(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c) norms[c] = (scaled + w * score_of(c)).norm();
    const double lowest = *std::min_element(norms.begin(), norms.end());
    const double cutoff = lowest + kTieTolerance * std::max(1.0, lowest);
    std::size_t best = candidates.size();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (norms[c] > cutoff) continue;
      if (best == candidates.size() || taken(candidates[c]) < taken(candidates[best])) best = c;
    }
    return candidates[best];
  };

  const std::vector<Action> candidates = eval_.candidate_actions(state, m_);
  if (eval_.discrete()) {
    const Eigen::MatrixXd scores = eval_.log_prob_grads_all(state);
    return pick(candidates, [&](std::size_t c) { return scores.col(static_cast<Eigen::Index>(c)); });
  }
  return pick(candidates, [&](std::size_t c) { return eval_.log_prob_grad(state, candidates[c]); });
}

ChosenAction RobustOnPolicyActor::next_action(const State& state, Rng& rng) {
  const double u = uniform01(coin_);
  if (u < rho_) {
    const Action a = correction_action(state);
    return {a, eval_.log_prob(state, a), true};
  }
  const ActionDistribution d = eval_.distribution(state);
  const Action a = d.sample(rng);
  return {a, d.log_prob(a), false};
}

void RobustOnPolicyActor::record(const State& state, const Action& action) {
  absorb_step(acc_, eval_, state, action);
  if (count_ties_) ++taken_[{state_index(state), action.index()}];
}

void RobustOnPolicyActor::observe(const State& state, const Action& action) {
  record(state, action);
}

void RobustOnPolicyActor::seed_with_data(const Dataset& initial) {
  for (const auto& ep : initial.episodes) {
    for (const auto& s : ep.steps) record(s.state, s.action);
  }
}

BehaviorPolicyGradient::BehaviorPolicyGradient(Policy eval_policy, int k, double alpha, double gamma)
    : CollectionStrategy(std::move(eval_policy)), k_(k), alpha_(alpha), gamma_(gamma),
      theta_b_(eval_.params()) {
  if (k_ < 1) throw InvalidArgument("BPG batch size must be positive");
  if (!(alpha_ >= 0.0) || !std::isfinite(alpha_)) throw InvalidArgument("BPG alpha must be >= 0");
}

ChosenAction BehaviorPolicyGradient::next_action(const State& state, Rng& rng) {
  if (!eval_.well_conditioned(state, theta_b_)) {
    throw DivergenceError("BPG behavior policy diverged");
  }
  const ActionDistribution d = eval_.distribution(state, theta_b_);
  const Action a = d.sample(rng);
  return {a, d.log_prob(a), false};
}

void BehaviorPolicyGradient::end_episode(const Episode& episode) {
  batch_.push_back(episode);
  if (static_cast<int>(batch_.size()) >= k_) {
    bpg_update(batch_);
    batch_.clear();
  }
}

bool BehaviorPolicyGradient::bpg_update(std::span<const Episode> batch) {
  if (batch.empty()) return true;
  ParamVector g = ParamVector::Zero(theta_b_.size());
  for (const Episode& ep : batch) {
    double log_w = 0.0;
    ParamVector score = ParamVector::Zero(theta_b_.size());
    for (const Step& s : ep.steps) {
      log_w += eval_.log_prob(s.state, s.action) - s.behavior_log_prob;
      score += eval_.log_prob_grad(s.state, s.action, theta_b_);
    }
    const double w = std::exp(log_w);
    const double ret = ep.discounted_return(gamma_);
    if (!std::isfinite(w) || !std::isfinite(ret)) {
      ++skipped_;
      return false;
    }
    g += -(ret * ret) * (w * w) * score;
  }
  g /= static_cast<double>(batch.size());
  if (!g.allFinite()) {
    ++skipped_;
    return false;
  }
  theta_b_ -= alpha_ * g;
  return true;
}

std::unique_ptr<CollectionStrategy> make_strategy(const StrategyConfig& config,
                                                  const Policy& eval_policy, double gamma,
                                                  std::uint64_t seed) {
  switch (config.kind) {
    case StrategyKind::OS: return std::make_unique<OnPolicySampler>(eval_policy);
    case StrategyKind::ROS: return std::make_unique<RobustOnPolicySampler>(eval_policy, config.alpha);
    case StrategyKind::ROA:
      return std::make_unique<RobustOnPolicyActor>(eval_policy, config.rho, config.m, seed);
    case StrategyKind::BPG:
      return std::make_unique<BehaviorPolicyGradient>(eval_policy, config.k, config.alpha, gamma);
  }
  throw InvalidArgument("unknown strategy kind");
}

// ---------------------------------------------------------------------------
// Collection driver

CollectionResult collect(CollectionStrategy& strategy, const Environment& env,
                         std::int64_t step_budget, const Dataset& initial, Rng& env_rng,
                         Rng& action_rng, std::span<const std::int64_t> checkpoints) {
  if (step_budget < 1) throw InvalidArgument("step_budget must be >= 1");
  if (!std::is_sorted(checkpoints.begin(), checkpoints.end())) {
    throw InvalidArgument("checkpoints must be sorted ascending");
  }
  CollectionResult result;
  for (Episode ep : initial.episodes) {
    ep.provenance = Provenance::InitialOffPolicy;
    result.dataset.episodes.push_back(std::move(ep));
  }
  strategy.seed_with_data(result.dataset);

  std::size_t next_checkpoint = 0;
  std::int64_t collected = 0;
  auto take_snapshots = [&](bool final) {
    while (next_checkpoint < checkpoints.size() &&
           (collected >= checkpoints[next_checkpoint] || final)) {
      result.snapshots.push_back({checkpoints[next_checkpoint], result.dataset.num_episodes(),
                                  static_cast<std::size_t>(collected)});
      ++next_checkpoint;
    }
  };
  take_snapshots(false);

  try {
    while (collected < step_budget) {
      Episode episode;
      episode.provenance = Provenance::Collected;
      State state = env.reset(env_rng);
      while (!state.terminal) {
        const ChosenAction chosen = strategy.next_action(state, action_rng);
        Action executed = chosen.action;
        if (!executed.is_discrete()) executed = Action::continuous(std::clamp(executed.value(), -1.0, 1.0));
        const StepOutcome out = env.step(state, executed, env_rng);
        strategy.observe(state, chosen.action);
        episode.steps.push_back({state, chosen.action, out.reward, chosen.behavior_log_prob,
                                 chosen.deterministic});
        state = out.next_state;
      }
      collected += static_cast<std::int64_t>(episode.length());
      strategy.end_episode(episode);
      result.dataset.episodes.push_back(std::move(episode));
      take_snapshots(false);
    }
  } catch (const DivergenceError& e) {
    // The unfinished episode is dropped; remaining checkpoints see the data so far.
    result.diverged = true;
    result.divergence_reason = e.what();
  }
  take_snapshots(true);
  return result;
}

}  // namespace robust_collect
