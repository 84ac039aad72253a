#pragma once

#include <initializer_list>
#include <vector>

#include "robust_collect/dataset.hpp"
#include "robust_collect/envs.hpp"
#include "robust_collect/policies.hpp"

namespace test_util {

namespace rc = robust_collect;

inline rc::State bandit_state() {
  rc::State s;
  s.value = rc::BanditUnit{};
  return s;
}

inline rc::EnvSpec bandit_spec(std::vector<double> means, std::vector<double> scales) {
  rc::EnvSpec spec = rc::EnvSpec::defaults(rc::EnvKind::MultiBandit);
  spec.bandit_arms = static_cast<int>(means.size());
  spec.bandit_means = std::move(means);
  spec.bandit_scales = std::move(scales);
  return spec;
}

// One-step bandit episodes with the given (arm, reward) pairs.
inline rc::Dataset bandit_data(std::initializer_list<std::pair<int, double>> steps,
                               const rc::Policy* behavior = nullptr) {
  rc::Dataset d;
  for (const auto& [a, r] : steps) {
    rc::Episode ep;
    const rc::Action act = rc::Action::discrete(a);
    const double lp = behavior ? behavior->log_prob(bandit_state(), act) : 0.0;
    ep.steps.push_back({bandit_state(), act, r, lp, false});
    d.episodes.push_back(ep);
  }
  return d;
}

// Tabular softmax over one state with the given logits.
inline rc::Policy softmax_policy(std::vector<double> logits) {
  const rc::Policy base = rc::Policy::tabular_softmax(1, static_cast<int>(logits.size()));
  return base.with_params(Eigen::Map<Eigen::VectorXd>(logits.data(), static_cast<Eigen::Index>(logits.size())));
}

}  // namespace test_util
