#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "robust_collect/errors.hpp"
#include "robust_collect/normal.hpp"
#include "robust_collect/policies.hpp"
#include "test_util.hpp"

namespace rc = robust_collect;
using rc::Action;
using rc::Policy;
using test_util::bandit_state;
using test_util::softmax_policy;

namespace {

// Gaussian tabular policy over one state with head outputs (mean, stdev).
Policy gaussian_policy(double mean, double stdev) {
  const Policy base = Policy::tabular_gaussian(1);
  rc::ParamVector th = base.params();
  th[base.layout().find("head.mean").offset] = mean;
  th[base.layout().find("head.stdev").offset] = stdev;
  return base.with_params(th);
}

rc::State cart(double x, double xd, double th, double thd) {
  rc::State s;
  s.value = rc::CartState{x, xd, th, thd};
  return s;
}

// Oracle inverse CDF: bisection on the erfc-based CDF.
double bisect_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::numbers::sqrt2) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<Policy> assorted_discrete_policies() {
  std::vector<Policy> out;
  out.push_back(softmax_policy({-0.5, 0.5, 2.0}));
  out.push_back(rc::epsilon_greedy_policy({2}, 4, 0.3));
  out.push_back(Policy::mlp_softmax(4, 2, {8, 8}, 3));
  return out;
}

}  // namespace

TEST(Distribution, ZeroLogitsAreUniform) {
  const Policy p = Policy::tabular_softmax(3, 4);
  rc::State s;
  s.value = rc::GridCell{1, 0};
  const auto d = p.distribution(s);
  for (double q : d.probs()) EXPECT_DOUBLE_EQ(q, 0.25);
  EXPECT_NEAR(p.log_prob(s, Action::discrete(2)), std::log(0.25), 1e-15);
}

TEST(Distribution, TwoActionSoftmaxClosedForm) {
  const Policy p = softmax_policy({-0.5, 0.5});
  const double expect = 1.0 / (1.0 + std::exp(-1.0));
  EXPECT_NEAR(p.distribution(bandit_state()).probs()[1], expect, 1e-15);
  EXPECT_NEAR(p.log_prob(bandit_state(), Action::discrete(0)), std::log(1.0 - expect), 1e-14);
  EXPECT_NEAR(p.log_prob(bandit_state(), Action::discrete(0)), -1.3133, 1e-4);
}

TEST(Distribution, GaussianHeadOutputs) {
  const auto d = gaussian_policy(0.3, 0.8).distribution(bandit_state());
  EXPECT_DOUBLE_EQ(d.mean(), 0.3);
  EXPECT_DOUBLE_EQ(d.stdev(), 0.8);
  EXPECT_NEAR(gaussian_policy(0.0, 1.0).log_prob(bandit_state(), Action::continuous(0.0)),
              -0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
}

TEST(Distribution, RejectsNonPositiveStdev) {
  EXPECT_THROW(rc::ActionDistribution::gaussian(0.0, 0.0), rc::InvalidArgument);
  EXPECT_THROW(rc::ActionDistribution::gaussian(0.0, -1.0), rc::InvalidArgument);
}

TEST(Distribution, DegenerateCategoricalAlwaysSamplesMass) {
  const auto d = rc::ActionDistribution::categorical({1.0, 0.0});
  rc::Rng rng(3);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(d.sample(rng).index(), 0);
  EXPECT_EQ(d.log_prob(Action::discrete(1)), -std::numeric_limits<double>::infinity());
}

TEST(Distribution, FairCoinFrequency) {
  const auto d = rc::ActionDistribution::categorical({0.5, 0.5});
  rc::Rng rng(11);
  int zeros = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) zeros += d.sample(rng).index() == 0;
  EXPECT_NEAR(static_cast<double>(zeros) / n, 0.5, 0.01);
}

TEST(Distribution, GaussianSampleMoments) {
  const auto d = rc::ActionDistribution::gaussian(0.4, 0.3);
  rc::Rng rng(12);
  const int n = 50000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = d.sample(rng).value();
    s += a;
    s2 += a * a;
  }
  const double mean = s / n;
  EXPECT_NEAR(mean, 0.4, 4.0 * 0.3 / std::sqrt(n));
  EXPECT_NEAR(std::sqrt(s2 / n - mean * mean), 0.3, 0.01);
}

TEST(Distribution, ProbabilitiesSumToOne) {
  rc::Rng rng(5);
  for (const Policy& p : assorted_discrete_policies()) {
    for (int i = 0; i < 20; ++i) {
      const rc::State s = p.tabular_features() ? bandit_state() : cart(0.1 * i, 0.0, 0.01 * i, 0.0);
      double total = 0.0;
      for (int a = 0; a < p.num_actions(); ++a) total += std::exp(p.log_prob(s, Action::discrete(a)));
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(Distribution, GaussianDensityIntegratesToOne) {
  const Policy p = gaussian_policy(0.2, 0.35);
  // Trapezoid rule over +-12 sigma.
  const double lo = 0.2 - 12 * 0.35, hi = 0.2 + 12 * 0.35;
  const int n = 20000;
  const double h = (hi - lo) / n;
  double total = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    total += w * std::exp(p.log_prob(bandit_state(), Action::continuous(lo + i * h)));
  }
  EXPECT_NEAR(total * h, 1.0, 1e-4);
}

TEST(Gradient, UniformSoftmaxClosedForm) {
  const Policy p = softmax_policy({0.0, 0.0});
  const auto g = p.log_prob_grad(bandit_state(), Action::discrete(0));
  EXPECT_NEAR(g[0], 0.5, 1e-15);
  EXPECT_NEAR(g[1], -0.5, 1e-15);
}

TEST(Gradient, SaturatedSoftmaxHasZeroScore) {
  const Policy p = softmax_policy({40.0, 0.0, 0.0});
  const auto g = p.log_prob_grad(bandit_state(), Action::discrete(0));
  EXPECT_NEAR(g.norm(), 0.0, 1e-6);
}

TEST(Gradient, ExpectedScoreIsZero) {
  for (const Policy& p : assorted_discrete_policies()) {
    const rc::State s = p.tabular_features() ? bandit_state() : cart(0.3, -0.2, 0.05, 0.4);
    const auto probs = p.distribution(s).probs();
    rc::ParamVector sum = rc::ParamVector::Zero(p.num_params());
    for (int a = 0; a < p.num_actions(); ++a) sum += probs[static_cast<std::size_t>(a)] * p.log_prob_grad(s, Action::discrete(a));
    EXPECT_LE(sum.norm(), 1e-9);
  }
}

TEST(Gradient, GaussianExpectedScoreMonteCarlo) {
  const Policy p = Policy::mlp_gaussian(4, {8, 8}, 9);
  const rc::State s = cart(0.1, 0.2, -0.05, 0.1);
  rc::Rng rng(4);
  const int n = 20000;
  Eigen::MatrixXd samples(p.num_params(), n);
  for (int i = 0; i < n; ++i) samples.col(i) = p.log_prob_grad(s, p.sample(s, rng));
  const Eigen::VectorXd mean = samples.rowwise().mean();
  const Eigen::VectorXd sd =
      ((samples.colwise() - mean).array().square().rowwise().sum() / (n - 1)).sqrt().matrix();
  for (Eigen::Index k = 0; k < mean.size(); ++k) {
    EXPECT_LE(std::abs(mean[k]), 3.0 * sd[k] / std::sqrt(n) + 1e-12) << "component " << k;
  }
}

TEST(Gradient, FiniteDifferenceAcrossClasses) {
  rc::Rng rng(77);
  auto check = [&](const Policy& p, const rc::State& s, const Action& a, double tol) {
    const double h = 1e-5;
    rc::ParamVector th = p.params();
    rc::ParamVector fd(th.size());
    for (Eigen::Index i = 0; i < th.size(); ++i) {
      const double o = th[i];
      th[i] = o + h;
      const double up = p.log_prob(s, a, th);
      th[i] = o - h;
      const double dn = p.log_prob(s, a, th);
      th[i] = o;
      fd[i] = (up - dn) / (2 * h);
    }
    const rc::ParamVector g = p.log_prob_grad(s, a);
    EXPECT_LE((g - fd).norm() / std::max(g.norm() + fd.norm(), 1e-8), tol);
  };
  for (int i = 0; i < 25; ++i) {
    const Policy sm = softmax_policy({rc::standard_normal(rng), rc::standard_normal(rng), rc::standard_normal(rng)});
    check(sm, bandit_state(), Action::discrete(i % 3), 1e-4);
    const Policy g = gaussian_policy(rc::standard_normal(rng), 0.3 + rc::uniform01(rng));
    check(g, bandit_state(), Action::continuous(rc::standard_normal(rng)), 1e-4);
    const Policy m = Policy::mlp_gaussian(4, {16, 16}, rng());
    const rc::State s = cart(rc::standard_normal(rng), rc::standard_normal(rng), 0.1 * rc::standard_normal(rng), rc::standard_normal(rng));
    check(m, s, Action::continuous(m.distribution(s).mean() + 0.1 * rc::standard_normal(rng)), 1e-3);
  }
}

TEST(Gradient, AllActionsMatchesPerActionScores) {
  const Policy p = Policy::mlp_softmax(4, 3, {8, 8}, 21);
  const rc::State s = cart(0.2, 0.1, -0.03, 0.2);
  const Eigen::MatrixXd all = p.log_prob_grads_all(s, p.params());
  for (int a = 0; a < 3; ++a) {
    EXPECT_LE((all.col(a) - p.log_prob_grad(s, Action::discrete(a))).norm(), 1e-12);
  }
}

TEST(Gradient, ClampedStdevHasZeroStdevGradient) {
  const Policy p = gaussian_policy(0.0, -1.0);
  const auto d = p.distribution(bandit_state());
  EXPECT_DOUBLE_EQ(d.stdev(), rc::kMinStdev);
  const auto g = p.log_prob_grad(bandit_state(), Action::continuous(0.0));
  EXPECT_EQ(g[p.layout().find("head.stdev").offset], 0.0);
}

TEST(Candidates, GaussianQuantiles) {
  const Policy p = gaussian_policy(0.0, 1.0);
  const auto one = p.candidate_actions(bandit_state(), 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_DOUBLE_EQ(one[0].value(), 0.0);
  const auto three = p.candidate_actions(bandit_state(), 3);
  ASSERT_EQ(three.size(), 3u);
  EXPECT_NEAR(three[0].value(), bisect_quantile(0.25), 1e-9);
  EXPECT_NEAR(three[0].value(), -0.6745, 1e-4);
  EXPECT_DOUBLE_EQ(three[1].value(), 0.0);
  EXPECT_NEAR(three[2].value(), 0.6745, 1e-4);
}

TEST(Candidates, IncreasingAndSymmetric) {
  const Policy p = gaussian_policy(0.7, 0.4);
  for (int m : {2, 5, 9, 10, 31}) {
    const auto c = p.candidate_actions(bandit_state(), m);
    ASSERT_EQ(static_cast<int>(c.size()), m);
    for (int i = 1; i < m; ++i) EXPECT_LT(c[i - 1].value(), c[i].value());
    if (m % 2 == 1) {
      for (int i = 0; i < m; ++i) EXPECT_NEAR(c[i].value() - 0.7, -(c[m - 1 - i].value() - 0.7), 1e-12);
    }
  }
}

TEST(Candidates, FiniteActionSetReturnsAll) {
  const Policy p = Policy::tabular_softmax(1, 4);
  for (int m : {1, 9}) {
    const auto c = p.candidate_actions(bandit_state(), m);
    ASSERT_EQ(c.size(), 4u);
    for (int a = 0; a < 4; ++a) EXPECT_EQ(c[a].index(), a);
  }
}

TEST(NormalQuantile, MatchesBisectionOracle) {
  for (double p : {1e-10, 1e-6, 0.001, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.97575, 0.999, 1 - 1e-8}) {
    EXPECT_NEAR(rc::normal_quantile(p), bisect_quantile(p), 1e-9) << p;
  }
  for (int i = 1; i < 1000; ++i) {
    const double p = i / 1000.0;
    EXPECT_NEAR(rc::normal_quantile(p), bisect_quantile(p), 1e-9);
  }
  EXPECT_THROW(rc::normal_quantile(0.0), rc::InvalidArgument);
  EXPECT_THROW(rc::normal_quantile(1.0), rc::InvalidArgument);
}

TEST(Perturb, DiscreteMixture) {
  const Policy p = softmax_policy({60.0, 0.0, 0.0, 0.0});
  const auto d = rc::perturb_policy(p, 0.1).distribution(bandit_state());
  EXPECT_NEAR(d.probs()[0], 0.925, 1e-12);
  const auto u = rc::perturb_policy(p, 1.0).distribution(bandit_state());
  for (double q : u.probs()) EXPECT_DOUBLE_EQ(q, 0.25);
}

TEST(Perturb, GaussianWidening) {
  const auto d = rc::perturb_policy(gaussian_policy(0.5, 1.0), 0.1).distribution(bandit_state());
  EXPECT_DOUBLE_EQ(d.mean(), 0.5);
  EXPECT_NEAR(d.stdev(), 1.1, 1e-15);
}

TEST(Perturb, RejectsInvalidDelta) {
  EXPECT_THROW(rc::perturb_policy(softmax_policy({0, 0}), 0.0), rc::InvalidArgument);
  EXPECT_THROW(rc::perturb_policy(softmax_policy({0, 0}), 1.5), rc::InvalidArgument);
  EXPECT_THROW(rc::perturb_policy(gaussian_policy(0, 1), -0.1), rc::InvalidArgument);
  EXPECT_NO_THROW(rc::perturb_policy(gaussian_policy(0, 1), 2.0));
}

TEST(EpsilonGreedy, Weights) {
  EXPECT_EQ(rc::epsilon_greedy_weight(4, 1.0), 0.0);
  EXPECT_NEAR(rc::epsilon_greedy_weight(4, 0.5), std::log(5.0), 1e-15);
  EXPECT_NEAR(rc::epsilon_greedy_weight(2, 0.2), std::log(9.0), 1e-15);
  EXPECT_THROW(rc::epsilon_greedy_weight(4, 0.0), rc::InvalidArgument);
  EXPECT_THROW(rc::epsilon_greedy_weight(4, 1.2), rc::InvalidArgument);
}

TEST(EpsilonGreedy, GreedyMassIdentity) {
  for (int n : {2, 4, 7}) {
    for (double eps : {1e-3, 0.05, 0.2, 0.5, 0.8, 1.0}) {
      const Policy p = rc::epsilon_greedy_policy({n - 1}, n, eps);
      const auto probs = p.distribution(bandit_state()).probs();
      EXPECT_NEAR(probs[static_cast<std::size_t>(n - 1)], (1.0 - eps) + eps / n, 1e-12);
      for (int a = 0; a + 1 < n; ++a) EXPECT_NEAR(probs[static_cast<std::size_t>(a)], eps / n, 1e-12);
    }
  }
  const auto half = rc::epsilon_greedy_policy({0}, 4, 0.5).distribution(bandit_state()).probs();
  EXPECT_NEAR(half[0], 0.625, 1e-12);
}

TEST(Snapshot, RoundTripIsBitExact) {
  rc::InputNormalizer norm = rc::InputNormalizer::identity(4);
  norm.observe(Eigen::Vector4d(0.1, -0.2, 0.03, 0.4));
  norm.observe(Eigen::Vector4d(-0.3, 0.2, 0.01, 0.1));
  norm.frozen = true;
  const std::vector<Policy> policies{
      softmax_policy({0.1, -0.7, 1.0 / 3.0}),
      gaussian_policy(0.25, 0.6),
      rc::epsilon_greedy_policy({0, 3, 2, 1}, 4, 0.3),
      Policy::mlp_softmax(4, 2, {8, 4}, 5).with_normalizer(norm),
      Policy::mlp_gaussian(4, {6, 6}, 6).with_normalizer(norm),
  };
  for (const Policy& p : policies) {
    std::stringstream ss;
    rc::write_policy(ss, p);
    const Policy q = rc::read_policy(ss);
    EXPECT_EQ(q.params(), p.params());
    EXPECT_EQ(q.layout(), p.layout());
    std::stringstream again;
    rc::write_policy(again, q);
    std::stringstream first;
    rc::write_policy(first, p);
    EXPECT_EQ(again.str(), first.str());
  }
}

TEST(Snapshot, RejectsCorruptInput) {
  std::stringstream bad("not-a-policy 1\n");
  EXPECT_THROW(rc::read_policy(bad), rc::Error);
  std::stringstream ss;
  rc::write_policy(ss, softmax_policy({0.0, 1.0}));
  std::string text = ss.str();
  text.resize(text.size() - 4);
  std::stringstream truncated(text);
  EXPECT_THROW(rc::read_policy(truncated), rc::Error);
}

TEST(Normalizer, WelfordMatchesTwoPass) {
  rc::InputNormalizer n = rc::InputNormalizer::identity(2);
  std::vector<Eigen::Vector2d> xs{{1, 2}, {3, -1}, {0.5, 4}, {2, 2}};
  for (const auto& x : xs) n.observe(x);
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& x : xs) mean += x / 4.0;
  Eigen::Vector2d var = Eigen::Vector2d::Zero();
  for (const auto& x : xs) var += (x - mean).cwiseAbs2() / 4.0;
  EXPECT_LE((n.mean - mean).norm(), 1e-12);
  EXPECT_LE((n.var - var).norm(), 1e-12);
  n.frozen = true;
  EXPECT_THROW(n.observe(Eigen::Vector2d(0, 0)), rc::InvalidArgument);
}
