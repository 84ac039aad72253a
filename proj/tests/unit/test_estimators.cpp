#include <cmath>

#include <gtest/gtest.h>

#include "robust_collect/collectors.hpp"
#include "robust_collect/errors.hpp"
#include "robust_collect/estimators.hpp"
#include "test_util.hpp"

namespace rc = robust_collect;
using test_util::bandit_data;
using test_util::bandit_spec;
using test_util::softmax_policy;

TEST(Mc, MeanOfReturns) {
  const auto d = bandit_data({{0, 1.0}, {1, 3.0}, {0, 4.0}});
  const auto e = rc::mc_estimate(d, 1.0);
  EXPECT_DOUBLE_EQ(e.value, 8.0 / 3.0);
  EXPECT_EQ(e.estimator, rc::EstimatorKind::MC);
  EXPECT_EQ(e.n_steps_used, 3u);
  EXPECT_THROW(rc::mc_estimate(rc::Dataset{}, 1.0), rc::InvalidArgument);
}

TEST(Mc, DiscountsMultiStepEpisodes) {
  rc::Dataset d;
  rc::Episode ep;
  for (double r : {1.0, 1.0, 1.0}) ep.steps.push_back({test_util::bandit_state(), rc::Action::discrete(0), r, 0.0, false});
  d.episodes.push_back(ep);
  EXPECT_DOUBLE_EQ(rc::mc_estimate(d, 0.5).value, 1.75);
  const auto s = rc::summarize_returns(d, 0.5);
  EXPECT_EQ(s.n, 1u);
  EXPECT_DOUBLE_EQ(s.returns.at(0), 1.75);
}

TEST(Ois, OnPolicyWeightsAreOne) {
  const auto pi = softmax_policy({0.3, -0.4});
  const auto d = bandit_data({{0, 1.0}, {1, 3.0}, {0, 4.0}}, &pi);
  for (double w : rc::importance_weights(d, pi)) EXPECT_NEAR(w, 1.0, 1e-15);
  EXPECT_NEAR(rc::ois_estimate(d, pi, 1.0).value, 8.0 / 3.0, 1e-14);
  EXPECT_NEAR(rc::wis_estimate(d, pi, 1.0).value, 8.0 / 3.0, 1e-14);
}

TEST(Ois, HandComputedOffPolicy) {
  // Behavior (0.25, 0.75), evaluation uniform: weights 2 and 2/3.
  const auto behavior = softmax_policy({0.0, std::log(3.0)});
  const auto eval = softmax_policy({0.0, 0.0});
  const auto d = bandit_data({{0, 4.0}, {1, 2.0}}, &behavior);
  const auto w = rc::importance_weights(d, eval);
  EXPECT_NEAR(w[0], 2.0, 1e-14);
  EXPECT_NEAR(w[1], 2.0 / 3.0, 1e-14);
  EXPECT_NEAR(rc::ois_estimate(d, eval, 1.0).value, (2.0 * 4.0 + (2.0 / 3.0) * 2.0) / 2.0, 1e-13);
  EXPECT_NEAR(rc::wis_estimate(d, eval, 1.0).value, 3.5, 1e-13);
}

TEST(Wis, ZeroTotalWeightThrows) {
  const auto behavior = softmax_policy({0.0, 0.0});
  auto d = bandit_data({{1, 2.0}}, &behavior);
  const rc::Policy eval = rc::epsilon_greedy_policy({0}, 2, 1.0);
  // Pretend the behavior had probability far above evaluation mass.
  d.episodes[0].steps[0].behavior_log_prob = 1e6;
  EXPECT_THROW(rc::wis_estimate(d, eval, 1.0), rc::InvalidArgument);
  d.episodes[0].steps[0].behavior_log_prob = -1e6;
  EXPECT_THROW(rc::ois_estimate(d, eval, 1.0), rc::InvalidArgument);
}

TEST(Combined, SizeWeightedMean) {
  EXPECT_DOUBLE_EQ(rc::combined_estimate(2.0, 1.0, 3.0, 3.0).value, 2.75);
  EXPECT_DOUBLE_EQ(rc::combined_estimate(1.0, 100.0, 4.0, 100.0).value, 2.5);
  EXPECT_EQ(rc::combined_estimate(123.456, 0.0, 0.1 + 0.2, 7.0).value, 0.1 + 0.2);
  EXPECT_EQ(rc::combined_estimate(0.1 + 0.2, 5.0, 9.0, 0.0).value, 0.1 + 0.2);
  EXPECT_THROW(rc::combined_estimate(1.0, 0.0, 1.0, 0.0), rc::InvalidArgument);
  EXPECT_THROW(rc::combined_estimate(1.0, -1.0, 1.0, 2.0), rc::InvalidArgument);
}

TEST(Ois, UnbiasedUnderBehaviorSampling) {
  // Mean of many small-sample OIS estimates converges on the exact value.
  const std::vector<double> means{0.0, 1.0, 3.0};
  const rc::Environment env(bandit_spec(means, {1.0, 1.0, 1.0}));
  const auto eval = softmax_policy({0.5, 0.0, -0.5});
  const auto probs = eval.distribution(test_util::bandit_state()).probs();
  double truth = 0.0;
  for (std::size_t a = 0; a < 3; ++a) truth += probs[a] * means[a];

  const auto behavior = softmax_policy({-0.2, 0.3, 0.1});
  const int reps = 4000;
  double total = 0.0, total2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    rc::OnPolicySampler os(behavior);
    rc::Rng env_rng = rc::make_rng(r, {1}), act_rng = rc::make_rng(r, {2});
    const auto d = rc::collect(os, env, 5, {}, env_rng, act_rng).dataset;
    const double v = rc::ois_estimate(d, eval, 1.0).value;
    total += v;
    total2 += v * v;
  }
  const double mean = total / reps;
  const double se = std::sqrt((total2 / reps - mean * mean) / reps);
  EXPECT_NEAR(mean, truth, 4.0 * se);
}
