#include <benchmark/benchmark.h>

#include "robust_collect/collectors.hpp"
#include "robust_collect/metrics.hpp"
#include "robust_collect/policies.hpp"

namespace rc = robust_collect;

namespace {

rc::State cart_state() {
  rc::State s;
  s.value = rc::CartState{0.02, -0.1, 0.03, 0.2};
  return s;
}

rc::State grid_state() {
  rc::State s;
  s.value = rc::GridCell{1, 2};
  return s;
}

void BM_LogProbGradMlpSoftmax(benchmark::State& state) {
  const auto pi = rc::Policy::mlp_softmax(4, 2, {64, 64}, 1);
  const auto s = cart_state();
  for (auto _ : state) benchmark::DoNotOptimize(pi.log_prob_grad(s, rc::Action::discrete(1)));
}
BENCHMARK(BM_LogProbGradMlpSoftmax);

void BM_LogProbGradMlpGaussian(benchmark::State& state) {
  const auto pi = rc::Policy::mlp_gaussian(4, {64, 64}, 1);
  const auto s = cart_state();
  for (auto _ : state) benchmark::DoNotOptimize(pi.log_prob_grad(s, rc::Action::continuous(0.3)));
}
BENCHMARK(BM_LogProbGradMlpGaussian);

// One ROS decision: behavior parameters, conditioning check, sample, absorb.
void BM_RosStep(benchmark::State& state) {
  const auto pi = state.range(0) == 0 ? rc::Policy::tabular_softmax(16, 4)
                                      : rc::Policy::mlp_softmax(4, 2, {64, 64}, 1);
  const auto s = state.range(0) == 0 ? grid_state() : cart_state();
  rc::RobustOnPolicySampler ros(pi, 10.0);
  rc::Rng rng(1);
  for (auto _ : state) {
    const auto c = ros.next_action(s, rng);
    ros.observe(s, c.action);
  }
}
BENCHMARK(BM_RosStep)->Arg(0)->Arg(1);

// One ROA decision with rho = 1 (always the argmin over candidates).
void BM_RoaStep(benchmark::State& state) {
  const bool continuous = state.range(0) == 1;
  const auto pi = continuous ? rc::Policy::mlp_gaussian(4, {64, 64}, 1) : rc::Policy::tabular_softmax(16, 4);
  const auto s = continuous ? cart_state() : grid_state();
  rc::RobustOnPolicyActor roa(pi, 1.0, 9, 1);
  rc::Rng rng(1);
  for (auto _ : state) {
    const auto c = roa.next_action(s, rng);
    roa.observe(s, c.action);
  }
}
BENCHMARK(BM_RoaStep)->Arg(0)->Arg(1);

void BM_CollectGridWorld(benchmark::State& state) {
  const rc::Environment env(rc::EnvSpec::defaults(rc::EnvKind::GridWorld));
  const auto pi = rc::Policy::tabular_softmax(16, 4);
  const auto kind = static_cast<rc::StrategyKind>(state.range(0));
  rc::StrategyConfig cfg;
  cfg.kind = kind;
  cfg.alpha = kind == rc::StrategyKind::BPG ? 0.01 : 1000.0;
  cfg.rho = 0.8;
  for (auto _ : state) {
    auto strategy = rc::make_strategy(cfg, pi, env.gamma(), 3);
    rc::Rng env_rng(1), action_rng(2);
    benchmark::DoNotOptimize(rc::collect(*strategy, env, 10000, {}, env_rng, action_rng));
  }
  state.SetItemsProcessed(state.iterations() * 10000);
  state.SetLabel(std::string(rc::to_string(kind)));
}
BENCHMARK(BM_CollectGridWorld)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

void BM_TabularKl(benchmark::State& state) {
  const rc::Environment env(rc::EnvSpec::defaults(rc::EnvKind::GridWorld));
  const auto pi = rc::Policy::tabular_softmax(16, 4);
  rc::OnPolicySampler os(pi);
  rc::Rng a(1), b(2);
  const auto data = rc::collect(os, env, state.range(0), {}, a, b).dataset;
  for (auto _ : state) {
    const auto emp = rc::fit_empirical_policy(data, pi);
    benchmark::DoNotOptimize(rc::kl_sampling_error(data, emp, pi));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.total_steps()));
}
BENCHMARK(BM_TabularKl)->Arg(1000)->Arg(100000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
