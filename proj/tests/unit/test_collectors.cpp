#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "robust_collect/collectors.hpp"
#include "robust_collect/errors.hpp"
#include "test_util.hpp"

namespace rc = robust_collect;
using rc::Action;
using rc::EnvKind;
using rc::Policy;
using test_util::bandit_data;
using test_util::bandit_spec;
using test_util::bandit_state;
using test_util::softmax_policy;

namespace {

rc::Environment two_arm_env() { return rc::Environment(bandit_spec({0.0, 1.0}, {1.0, 1.0})); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<int> actions_of(const rc::Dataset& d) {
  std::vector<int> out;
  for (const auto& ep : d.episodes) {
    for (const auto& s : ep.steps) out.push_back(s.action.index());
  }
  return out;
}

rc::CollectionResult run(rc::CollectionStrategy& s, const rc::Environment& env, std::int64_t budget,
                         std::uint64_t seed, const rc::Dataset& initial = {},
                         std::span<const std::int64_t> checkpoints = {}) {
  rc::Rng env_rng = rc::make_rng(seed, {1});
  rc::Rng action_rng = rc::make_rng(seed, {2});
  return rc::collect(s, env, budget, initial, env_rng, action_rng, checkpoints);
}

}  // namespace

TEST(Accumulator, RunningMean) {
  rc::GradientAccumulator acc(2);
  acc.absorb(Eigen::Vector2d(0.5, -0.5));
  EXPECT_EQ(acc.mean_grad(), Eigen::Vector2d(0.5, -0.5));
  const Eigen::VectorXd peek = acc.preview(Eigen::Vector2d(-0.5, 0.5));
  EXPECT_EQ(acc.count(), 1u);
  EXPECT_LE(peek.norm(), 1e-15);
  acc.absorb(Eigen::Vector2d(-0.5, 0.5));
  EXPECT_LE(acc.mean_grad().norm(), 1e-15);
  EXPECT_EQ(acc.count(), 2u);
}

TEST(Accumulator, MatchesBruteForceMean) {
  rc::Rng rng(8);
  rc::GradientAccumulator acc(5);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(5);
  for (int i = 1; i <= 1000; ++i) {
    Eigen::VectorXd g(5);
    for (auto& x : g) x = rc::standard_normal(rng) * 10.0;
    acc.absorb(g);
    sum += g;
    if (i % 97 == 0) {
      EXPECT_LE((acc.mean_grad() - sum / i).norm(), 1e-11 * (1.0 + sum.norm()));
    }
  }
}

TEST(Accumulator, RejectsWrongDimension) {
  rc::GradientAccumulator acc(2);
  EXPECT_THROW(acc.absorb(Eigen::Vector3d::Zero()), rc::InvalidArgument);
}

TEST(StrategyKind, ParseRoundTrip) {
  for (auto k : {rc::StrategyKind::OS, rc::StrategyKind::ROS, rc::StrategyKind::ROA, rc::StrategyKind::BPG}) {
    EXPECT_EQ(rc::parse_strategy_kind(rc::to_string(k)), k);
  }
  EXPECT_THROW(rc::parse_strategy_kind("XYZ"), rc::ConfigError);
}

TEST(Ros, SeededAccumulatorMean) {
  rc::RobustOnPolicySampler ros(softmax_policy({0.0, 0.0}), 1.0);
  ros.seed_with_data(bandit_data({{0, 0.0}, {0, 0.0}, {1, 0.0}}));
  EXPECT_NEAR(ros.accumulator().mean_grad()[0], 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(ros.accumulator().mean_grad()[1], -1.0 / 6.0, 1e-15);
}

TEST(Ros, BehaviorShiftsTowardUndersampledAction) {
  rc::RobustOnPolicySampler ros(softmax_policy({0.0, 0.0}), 1.0);
  ros.observe(bandit_state(), Action::discrete(0));
  const Eigen::VectorXd th = ros.behavior_params();
  EXPECT_NEAR(th[0], -0.5, 1e-15);
  EXPECT_NEAR(th[1], 0.5, 1e-15);
  const auto p = ros.eval_policy().distribution(bandit_state(), th).probs();
  EXPECT_NEAR(p[1], sigmoid(1.0), 1e-12);
  EXPECT_NEAR(p[1], 0.7311, 1e-4);
}

TEST(Ros, AlphaZeroReproducesOnPolicyData) {
  const auto env = rc::Environment(rc::EnvSpec::defaults(EnvKind::GridWorld));
  const Policy pi = rc::Policy::tabular_softmax(16, 4);
  rc::OnPolicySampler os(pi);
  rc::RobustOnPolicySampler ros(pi, 0.0);
  EXPECT_EQ(run(os, env, 500, 4).dataset, run(ros, env, 500, 4).dataset);
}

TEST(Ros, RecordsBehaviorLogProb) {
  const Policy pi = softmax_policy({0.0, 0.0});
  rc::RobustOnPolicySampler ros(pi, 2.0);
  const auto d = run(ros, two_arm_env(), 20, 1).dataset;
  rc::RobustOnPolicySampler replay(pi, 2.0);
  for (const auto& ep : d.episodes) {
    const auto& s = ep.steps.front();
    const double expect = pi.log_prob(s.state, s.action, replay.behavior_params());
    EXPECT_NEAR(s.behavior_log_prob, expect, 1e-12);
    replay.observe(s.state, s.action);
  }
}

TEST(Roa, CorrectsTowardUnseenAction) {
  rc::RobustOnPolicyActor roa(softmax_policy({0.0, 0.0}), 1.0, 9, 1);
  roa.observe(bandit_state(), Action::discrete(0));
  EXPECT_EQ(roa.correction_action(bandit_state()).index(), 1);
}

TEST(Roa, EmptyHistoryTieGoesToLowestIndex) {
  rc::RobustOnPolicyActor roa(softmax_policy({0.0, 0.0, 0.0, 0.0}), 1.0, 9, 1);
  EXPECT_EQ(roa.correction_action(bandit_state()).index(), 0);
}

TEST(Roa, RoundRobinOnUniformPolicy) {
  const int n = 5;
  rc::Environment env(bandit_spec(std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)));
  rc::RobustOnPolicyActor roa(softmax_policy(std::vector<double>(n, 0.0)), 1.0, 9, 1);
  const auto acts = actions_of(run(roa, env, 4 * n, 3).dataset);
  ASSERT_EQ(acts.size(), static_cast<std::size_t>(4 * n));
  for (int block = 0; block < 4; ++block) {
    std::set<int> seen(acts.begin() + block * n, acts.begin() + (block + 1) * n);
    EXPECT_EQ(seen.size(), static_cast<std::size_t>(n)) << "block " << block;
  }
}

TEST(Roa, DoesNotOvercorrectRareAction) {
  // pi_e = (0.9, 0.1): the mean score vanishes at a 9:1 ratio.
  const Policy pi = softmax_policy({std::log(9.0), 0.0});
  rc::RobustOnPolicyActor roa(pi, 1.0, 9, 1);
  roa.observe(bandit_state(), Action::discrete(0));
  EXPECT_EQ(roa.correction_action(bandit_state()).index(), 0);

  rc::RobustOnPolicyActor fresh(pi, 1.0, 9, 1);
  const auto acts = actions_of(run(fresh, two_arm_env(), 1000, 2).dataset);
  const auto rare = std::count(acts.begin(), acts.end(), 1);
  EXPECT_NEAR(static_cast<double>(rare), 100.0, 1.0);
}

TEST(Roa, RhoZeroReproducesOnPolicyData) {
  const auto env = rc::Environment(rc::EnvSpec::defaults(EnvKind::GridWorld));
  const Policy pi = rc::Policy::tabular_softmax(16, 4);
  rc::OnPolicySampler os(pi);
  rc::RobustOnPolicyActor roa(pi, 0.0, 9, 77);
  EXPECT_EQ(run(os, env, 500, 4).dataset, run(roa, env, 500, 4).dataset);
}

TEST(Roa, CorrectedStepsRecordEvaluationLogProb) {
  const Policy pi = softmax_policy({0.3, -0.2, 0.1});
  rc::RobustOnPolicyActor roa(pi, 1.0, 9, 1);
  rc::Environment env(bandit_spec({0, 0, 0}, {1, 1, 1}));
  for (const auto& ep : run(roa, env, 50, 5).dataset.episodes) {
    for (const auto& s : ep.steps) {
      EXPECT_TRUE(s.deterministic);
      EXPECT_DOUBLE_EQ(s.behavior_log_prob, pi.log_prob(s.state, s.action));
    }
  }
}

TEST(Roa, ContinuousCorrectionIsACandidate) {
  const Policy pi = Policy::mlp_gaussian(4, {8}, 3);
  rc::RobustOnPolicyActor roa(pi, 1.0, 9, 1);
  rc::State s;
  s.value = rc::CartState{0.01, 0.0, 0.02, 0.0};
  roa.observe(s, Action::continuous(pi.distribution(s).mean() + 2.0 * pi.distribution(s).stdev()));
  const Action a = roa.correction_action(s);
  const auto cands = pi.candidate_actions(s, 9);
  EXPECT_NE(std::find(cands.begin(), cands.end(), a), cands.end());
  // Brute force over the same candidates.
  double best = 1e300;
  Action arg;
  for (const auto& c : cands) {
    const double n = (roa.accumulator().preview(pi.log_prob_grad(s, c))).norm();
    if (n < best) {
      best = n;
      arg = c;
    }
  }
  EXPECT_EQ(a, arg);
}

TEST(Roa, RejectsInvalidParameters) {
  EXPECT_THROW(rc::RobustOnPolicyActor(softmax_policy({0, 0}), 1.5, 9, 1), rc::InvalidArgument);
  EXPECT_THROW(rc::RobustOnPolicyActor(softmax_policy({0, 0}), 0.5, 0, 1), rc::InvalidArgument);
  EXPECT_THROW(rc::RobustOnPolicySampler(softmax_policy({0, 0}), -1.0), rc::InvalidArgument);
}

TEST(Bpg, SingleUpdateClosedForm) {
  // theta_e = theta_b = 0, one episode: arm 0, reward 1, w = 1.
  const Policy pi = softmax_policy({0.0, 0.0});
  rc::BehaviorPolicyGradient bpg(pi, 1, 0.04, 1.0);
  const auto batch = bandit_data({{0, 1.0}}, &pi);
  ASSERT_TRUE(bpg.bpg_update(batch.episodes));
  EXPECT_NEAR(bpg.behavior_params()[0], 0.02, 1e-15);
  EXPECT_NEAR(bpg.behavior_params()[1], -0.02, 1e-15);
}

TEST(Bpg, ZeroReturnsLeaveBehaviorUnchanged) {
  const Policy pi = softmax_policy({0.2, -0.1});
  rc::BehaviorPolicyGradient bpg(pi, 2, 10.0, 1.0);
  const auto batch = bandit_data({{0, 0.0}, {1, 0.0}}, &pi);
  ASSERT_TRUE(bpg.bpg_update(batch.episodes));
  EXPECT_EQ(bpg.behavior_params(), pi.params());
}

TEST(Bpg, StepIsLinearInAlpha) {
  const Policy pi = softmax_policy({0.2, -0.1, 0.4});
  const auto batch = bandit_data({{0, 1.5}, {2, -0.5}, {1, 2.0}}, &pi);
  rc::BehaviorPolicyGradient a(pi, 3, 0.01, 1.0), b(pi, 3, 0.03, 1.0);
  a.bpg_update(batch.episodes);
  b.bpg_update(batch.episodes);
  EXPECT_LE(((b.behavior_params() - pi.params()) - 3.0 * (a.behavior_params() - pi.params())).norm(), 1e-14);
}

TEST(Bpg, UpdatesAfterEveryKEpisodes) {
  const Policy pi = softmax_policy({0.0, 0.0});
  rc::BehaviorPolicyGradient bpg(pi, 3, 0.01, 1.0);
  const auto eps = bandit_data({{0, 1.0}, {1, 1.0}, {0, 1.0}}, &pi);
  bpg.end_episode(eps.episodes[0]);
  bpg.end_episode(eps.episodes[1]);
  EXPECT_EQ(bpg.pending(), 2u);
  EXPECT_EQ(bpg.behavior_params(), pi.params());
  bpg.end_episode(eps.episodes[2]);
  EXPECT_EQ(bpg.pending(), 0u);
  EXPECT_NE(bpg.behavior_params(), pi.params());
}

TEST(Collect, BanditBudgetCountsEpisodes) {
  rc::OnPolicySampler os(softmax_policy({0.0, 0.0}));
  const auto r = run(os, two_arm_env(), 3, 1);
  EXPECT_EQ(r.dataset.num_episodes(), 3u);
  EXPECT_FALSE(r.diverged);
}

TEST(Collect, WholeEpisodesAndSnapshots) {
  const auto env = rc::Environment(rc::EnvSpec::defaults(EnvKind::GridWorld));
  rc::OnPolicySampler os(rc::Policy::tabular_softmax(16, 4));
  const std::vector<std::int64_t> cps{1, 10, 100, 1000};
  const auto r = run(os, env, 1000, 9, {}, cps);
  ASSERT_EQ(r.snapshots.size(), cps.size());
  const auto total = static_cast<std::int64_t>(r.dataset.total_steps());
  EXPECT_GE(total, 1000);
  EXPECT_LT(total - static_cast<std::int64_t>(r.dataset.episodes.back().length()), 1000);
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const auto& snap = r.snapshots[i];
    EXPECT_EQ(snap.checkpoint, cps[i]);
    const auto pre = r.dataset.prefix(snap.episodes);
    EXPECT_EQ(pre.total_steps(), snap.collected_steps);
    EXPECT_GE(static_cast<std::int64_t>(snap.collected_steps), cps[i]);
    EXPECT_LT(static_cast<std::int64_t>(r.dataset.prefix(snap.episodes - 1).total_steps()), cps[i]);
  }
}

TEST(Collect, InitialDataIsTaggedAndSeedsStrategy) {
  const Policy pi = softmax_policy({0.0, 0.0});
  rc::RobustOnPolicyActor roa(pi, 1.0, 9, 1);
  const auto initial = bandit_data({{0, 1.0}, {0, 1.0}, {0, 1.0}}, &pi);
  const std::vector<std::int64_t> cps{0, 3};
  const auto r = run(roa, two_arm_env(), 3, 1, initial, cps);
  ASSERT_EQ(r.dataset.num_episodes(), 6u);
  EXPECT_EQ(r.dataset.count_episodes(rc::Provenance::InitialOffPolicy), 3u);
  EXPECT_EQ(r.snapshots[0].episodes, 3u);
  EXPECT_EQ(r.snapshots[0].collected_steps, 0u);
  // ROA has to balance three initial arm-0 steps first.
  const auto acts = actions_of(r.dataset.filter(rc::Provenance::Collected));
  EXPECT_EQ(acts, (std::vector<int>{1, 1, 1}));
}

TEST(Collect, RejectsBadArguments) {
  rc::OnPolicySampler os(softmax_policy({0.0, 0.0}));
  EXPECT_THROW(run(os, two_arm_env(), 0, 1), rc::InvalidArgument);
  const std::vector<std::int64_t> unsorted{5, 2};
  EXPECT_THROW(run(os, two_arm_env(), 5, 1, {}, unsorted), rc::InvalidArgument);
}

TEST(Collect, ContinuousActionsStayRawInDataset) {
  const auto env = rc::Environment(rc::EnvSpec::defaults(EnvKind::CartPoleContinuous));
  // A wide policy samples outside [-1, 1] often.
  const Policy base = Policy::mlp_gaussian(4, {4}, 1);
  Eigen::VectorXd th = base.params();
  const auto& sd = base.layout().find("head.stdev");
  th.segment(sd.offset, sd.size).setConstant(1.0);
  const Policy wide = base.with_params(th);
  rc::OnPolicySampler os(wide);
  const auto r = run(os, env, 300, 2);
  bool outside = false;
  for (const auto& ep : r.dataset.episodes) {
    for (const auto& s : ep.steps) {
      outside |= std::abs(s.action.value()) > 1.0;
      EXPECT_DOUBLE_EQ(s.behavior_log_prob, wide.log_prob(s.state, s.action));
    }
  }
  EXPECT_TRUE(outside);
}

TEST(Collect, DivergenceEndsCollection) {
  const Policy pi = softmax_policy({0.0, 0.0});
  rc::RobustOnPolicySampler ros(pi, 1e9);
  const auto r = run(ros, two_arm_env(), 100, 1);
  EXPECT_TRUE(r.diverged);
  EXPECT_FALSE(r.divergence_reason.empty());
  EXPECT_LT(r.dataset.num_episodes(), 100u);
}

TEST(Roa, EqualScoresRotateThroughTiedActions) {
  // One-parameter epsilon-greedy policy: every non-greedy arm has the same score.
  const int n = 4;
  const Policy pi = rc::epsilon_greedy_policy({2}, n, 0.8);
  rc::Environment env(bandit_spec(std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)));
  rc::RobustOnPolicyActor roa(pi, 1.0, 9, 1);
  const auto acts = actions_of(run(roa, env, 1000, 6).dataset);
  std::vector<int> counts(n, 0);
  for (int a : acts) ++counts[static_cast<std::size_t>(a)];
  const auto probs = pi.distribution(bandit_state()).probs();
  for (int a = 0; a < n; ++a) {
    EXPECT_NEAR(counts[static_cast<std::size_t>(a)], 1000.0 * probs[static_cast<std::size_t>(a)], 2.0) << a;
  }
}
