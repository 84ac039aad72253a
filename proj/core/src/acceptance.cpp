#include "robust_collect/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "robust_collect/collectors.hpp"
#include "robust_collect/config.hpp"
#include "robust_collect/errors.hpp"
#include "robust_collect/estimators.hpp"
#include "robust_collect/experiments.hpp"
#include "robust_collect/metrics.hpp"

namespace robust_collect {

namespace {

struct Verdict {
  bool passed = false;
  std::string detail;
};

State bandit_state() {
  State s;
  s.value = BanditUnit{};
  return s;
}

EnvSpec bandit_spec(std::vector<double> means, std::vector<double> scales) {
  EnvSpec spec = EnvSpec::defaults(EnvKind::MultiBandit);
  spec.bandit_arms = static_cast<int>(means.size());
  spec.bandit_means = std::move(means);
  spec.bandit_scales = std::move(scales);
  return spec;
}

Episode one_step(const Environment& env, int arm, Rng& rng) {
  const State s = env.reset(rng);
  const Action a = Action::discrete(arm);
  const StepOutcome out = env.step(s, a, rng);
  Episode ep;
  ep.steps.push_back({s, a, out.reward, 0.0, false});
  return ep;
}

// ---------------------------------------------------------------------------

Verdict worked_example() {
  const Environment env(bandit_spec({2.0, 4.0}, {0.0, 0.0}));
  const Policy pi = Policy::tabular_softmax(1, 2);
  Rng rng(0);
  Dataset prior;
  for (int arm : {0, 0, 1}) prior.episodes.push_back(one_step(env, arm, rng));

  double os = 0.0;
  const auto probs = pi.distribution(bandit_state()).probs();
  for (int a = 0; a < 2; ++a) {
    Dataset d = prior;
    d.episodes.push_back(one_step(env, a, rng));
    os += probs[static_cast<std::size_t>(a)] * mc_estimate(d, 1.0).value;
  }

  RobustOnPolicyActor roa(pi, 1.0, 9, 0);
  roa.seed_with_data(prior);
  const ChosenAction c = roa.next_action(bandit_state(), rng);
  Dataset d = prior;
  d.episodes.push_back(one_step(env, c.action.index(), rng));
  const double forced = mc_estimate(d, 1.0).value;

  const bool ok = std::abs(os - 2.75) <= 1e-12 && std::abs(forced - 3.0) <= 1e-12 && c.action.index() == 1;
  return {ok, fmt::format("OS expectation {:.15g}, ROA action a{} -> {:.15g}", os, c.action.index(), forced)};
}

// ---------------------------------------------------------------------------

double relative_error(const ParamVector& g, const ParamVector& fd) {
  return (g - fd).norm() / std::max(g.norm() + fd.norm(), 1e-8);
}

ParamVector central_difference(const Policy& p, const State& s, const Action& a) {
  constexpr double h = 1e-6;
  ParamVector fd(p.num_params());
  ParamVector theta = p.params();
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double orig = theta[i];
    theta[i] = orig + h;
    const double up = p.log_prob(s, a, theta);
    theta[i] = orig - h;
    const double down = p.log_prob(s, a, theta);
    theta[i] = orig;
    fd[i] = (up - down) / (2.0 * h);
  }
  return fd;
}

State random_cell(Rng& rng) {
  std::uniform_int_distribution<int> u(0, kGridSize - 1);
  State s;
  s.value = GridCell{u(rng), u(rng)};
  return s;
}

State random_cart(Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  State s;
  s.value = CartState{2.0 * u(rng), u(rng), 0.2 * u(rng), u(rng)};
  return s;
}

InputNormalizer random_normalizer(Rng& rng) {
  InputNormalizer n = InputNormalizer::identity(4);
  for (int i = 0; i < 4; ++i) {
    n.mean[i] = 0.1 * standard_normal(rng);
    n.var[i] = 0.05 + uniform01(rng);
  }
  n.count = 100.0;
  n.frozen = true;
  return n;
}

Verdict gradient_oracle() {
  constexpr int kProbes = 100;
  Rng rng(20240611);
  std::map<std::string, double> worst;

  auto probe = [&](const std::string& cls, const Policy& p, const State& s, const Action& a) {
    const double e = relative_error(p.log_prob_grad(s, a), central_difference(p, s, a));
    worst[cls] = std::max(worst[cls], e);
  };

  for (int i = 0; i < kProbes; ++i) {
    // Tabular softmax over GridWorld cells.
    {
      const Policy base = Policy::tabular_softmax(16, 4);
      ParamVector th(base.num_params());
      for (auto& x : th) x = 2.0 * standard_normal(rng);
      const Policy p = base.with_params(th);
      const State s = random_cell(rng);
      probe("tabular-softmax", p, s, Action::discrete(std::uniform_int_distribution<int>(0, 3)(rng)));
    }
    // Tabular Gaussian.
    {
      const Policy base = Policy::tabular_gaussian(16);
      ParamVector th = base.params();
      const auto& mu = base.layout().find("head.mean");
      const auto& sd = base.layout().find("head.stdev");
      for (Eigen::Index k = 0; k < mu.size; ++k) th[mu.offset + k] = standard_normal(rng);
      for (Eigen::Index k = 0; k < sd.size; ++k) th[sd.offset + k] = 0.2 + 1.8 * uniform01(rng);
      const Policy p = base.with_params(th);
      const State s = random_cell(rng);
      const auto d = p.distribution(s);
      probe("tabular-gaussian", p, s, Action::continuous(d.mean() + d.stdev() * 1.5 * standard_normal(rng)));
    }
    // Epsilon-greedy one-parameter policy.
    {
      std::vector<int> best(16);
      for (auto& b : best) b = std::uniform_int_distribution<int>(0, 3)(rng);
      const Policy p = epsilon_greedy_policy(best, 4, 0.05 + 0.9 * uniform01(rng));
      const State s = random_cell(rng);
      probe("epsilon-greedy", p, s, Action::discrete(std::uniform_int_distribution<int>(0, 3)(rng)));
    }
    // MLP softmax and Gaussian.
    {
      const Policy p = Policy::mlp_softmax(4, 2, {64, 64}, rng()).with_normalizer(random_normalizer(rng));
      const State s = random_cart(rng);
      probe("mlp-softmax", p, s, Action::discrete(std::uniform_int_distribution<int>(0, 1)(rng)));
    }
    {
      const Policy p = Policy::mlp_gaussian(4, {64, 64}, rng()).with_normalizer(random_normalizer(rng));
      const State s = random_cart(rng);
      const auto d = p.distribution(s);
      probe("mlp-gaussian", p, s, Action::continuous(d.mean() + d.stdev() * 1.5 * standard_normal(rng)));
    }
  }

  const std::map<std::string, double> limit{{"tabular-softmax", 1e-4}, {"tabular-gaussian", 1e-4},
                                            {"epsilon-greedy", 1e-4}, {"mlp-softmax", 1e-3},
                                            {"mlp-gaussian", 1e-3}};
  bool ok = true;
  std::string detail;
  for (const auto& [cls, e] : worst) {
    ok = ok && e <= limit.at(cls);
    detail += fmt::format("{}{} {:.1e}", detail.empty() ? "" : ", ", cls, e);
  }
  return {ok, "worst relative error: " + detail};
}

// ---------------------------------------------------------------------------

struct DomainSetup {
  Environment env;
  Policy policy;
};

std::vector<DomainSetup> degeneracy_domains() {
  std::vector<DomainSetup> out;
  Rng rng(7);
  auto randomize = [&](const Policy& p, double scale) {
    ParamVector th = p.params();
    for (auto& x : th) x += scale * standard_normal(rng);
    return p.with_params(th);
  };
  {
    EnvSpec spec = EnvSpec::defaults(EnvKind::MultiBandit);
    draw_default_bandit(spec, 11);
    Environment env(spec);
    out.push_back({env, randomize(Policy::for_env(env, 1), 1.0)});
  }
  {
    Environment env(EnvSpec::defaults(EnvKind::GridWorld));
    out.push_back({env, randomize(Policy::for_env(env, 2), 1.0)});
  }
  {
    Environment env(EnvSpec::defaults(EnvKind::CartPole));
    out.push_back({env, Policy::for_env(env, 3)});
  }
  {
    Environment env(EnvSpec::defaults(EnvKind::CartPoleContinuous));
    out.push_back({env, Policy::for_env(env, 4)});
  }
  return out;
}

std::string collect_serialized(const DomainSetup& d, const StrategyConfig& cfg, std::uint64_t seed) {
  auto strategy = make_strategy(cfg, d.policy, d.env.gamma(), derive_seed(seed, {3}));
  Rng env_rng = make_rng(seed, {1});
  Rng action_rng = make_rng(seed, {2});
  const CollectionResult r = collect(*strategy, d.env, 300, Dataset{}, env_rng, action_rng);
  std::ostringstream os;
  write_dataset(os, r.dataset, d.env.kind());
  return os.str();
}

Verdict strategy_degeneracy() {
  int compared = 0;
  for (const DomainSetup& d : degeneracy_domains()) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const std::string os = collect_serialized(d, {"OS", StrategyKind::OS}, seed);
      const std::string ros = collect_serialized(d, {"ROS", StrategyKind::ROS, 0.0}, seed);
      const std::string roa = collect_serialized(d, {"ROA", StrategyKind::ROA, 0.0, 0.0}, seed);
      if (ros != os || roa != os) {
        return {false, fmt::format("{} seed {}: datasets differ", to_string(d.env.kind()), seed)};
      }
      compared += 2;
    }
  }
  return {true, fmt::format("{} dataset pairs byte-identical across 4 domains", compared)};
}

// ---------------------------------------------------------------------------

Verdict zero_sampling_error() {
  Rng rng(99);
  double worst_kl = 0.0;
  double worst_grad = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int actions = std::uniform_int_distribution<int>(2, 6)(rng);
    const int states = std::uniform_int_distribution<int>(1, 16)(rng);
    Policy base = Policy::tabular_softmax(16, actions);
    ParamVector th = base.params();
    std::vector<std::vector<int>> weights(16, std::vector<int>(static_cast<std::size_t>(actions)));
    for (int s = 0; s < 16; ++s) {
      for (int a = 0; a < actions; ++a) {
        const int k = std::uniform_int_distribution<int>(1, 9)(rng);
        weights[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] = k;
        th[a * 16 + s] = std::log(static_cast<double>(k));
      }
    }
    const Policy pi = base.with_params(th);
    Dataset data;
    Episode ep;
    for (int s = 0; s < states; ++s) {
      const int mult = std::uniform_int_distribution<int>(1, 3)(rng);
      State st;
      st.value = GridCell{s % kGridSize, s / kGridSize};
      for (int a = 0; a < actions; ++a) {
        for (int c = 0; c < mult * weights[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)]; ++c) {
          ep.steps.push_back({st, Action::discrete(a), 0.0, 0.0, false});
        }
      }
    }
    data.episodes.push_back(ep);
    const EmpiricalPolicy emp = fit_empirical_policy(data, pi);
    worst_kl = std::max(worst_kl, std::abs(kl_sampling_error(data, emp, pi)));
    worst_grad = std::max(worst_grad, grad_norm(data, pi));
  }
  const bool ok = worst_kl <= 1e-12 && worst_grad <= 1e-9;
  return {ok, fmt::format("50 rational policies: max |KL| {:.1e}, max grad norm {:.1e}", worst_kl, worst_grad)};
}

// ---------------------------------------------------------------------------

std::vector<double> final_squared_errors(const ExperimentResult& res, const ExperimentContext& ctx,
                                         const std::string& strategy, const std::string& estimator) {
  const std::int64_t final_cp = ctx.config.step_budget();
  const double target = ctx.config.target_value();
  for (const auto& per : res.trials) {
    if (per.empty() || per.front().strategy != strategy) continue;
    std::vector<double> out;
    for (const TrialResult& t : per) {
      for (const TrialRow& r : t.rows) {
        if (r.checkpoint_steps == final_cp && r.estimator == estimator) {
          out.push_back((r.estimate - target) * (r.estimate - target));
        }
      }
    }
    return out;
  }
  throw Error(fmt::format("no results for strategy '{}'", strategy));
}

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

Moments moments(const std::vector<double>& x) {
  Moments m;
  const double n = static_cast<double>(x.size());
  for (double v : x) m.mean += v;
  m.mean /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - m.mean) * (v - m.mean);
  m.se = std::sqrt(ss / (n - 1.0) / n);
  return m;
}

// Gap between two strategies: `lo` should have the smaller MSE. The gate uses
// the combined standard error sqrt(se_lo^2 + se_hi^2); the standard error of
// the per-seed difference is reported alongside.
struct Gap {
  double lo_mse, hi_mse, diff, combined_se, paired_se;
  bool clear() const { return diff > combined_se; }
};

Gap gap(const std::vector<double>& lo, const std::vector<double>& hi) {
  std::vector<double> d(lo.size());
  for (std::size_t i = 0; i < lo.size(); ++i) d[i] = hi[i] - lo[i];
  const Moments a = moments(lo), b = moments(hi), m = moments(d);
  return {a.mean, b.mean, m.mean, std::hypot(a.se, b.se), m.se};
}

ExperimentContext load_context(const AcceptanceOptions& opts, const std::string& file) {
  return make_context(load_config(opts.config_dir / file).experiment);
}

Verdict sampling_error_reduction(const AcceptanceOptions& opts) {
  ExperimentContext ctx = load_context(opts, "gridworld.yaml");
  ctx.config.budget_multiplier = 1024.0;
  ctx.config.trials = 50;
  ctx.config.initial_data.reset();
  ctx.config.strategies = {
      StrategySpec{StrategyConfig{"OS", StrategyKind::OS}, {"MC"}},
      StrategySpec{StrategyConfig{"ROS", StrategyKind::ROS, 1000.0}, {"MC"}},
      StrategySpec{StrategyConfig{"ROA", StrategyKind::ROA, 0.0, 0.8}, {"MC"}},
  };
  const ExperimentResult res = run_experiment(ctx, opts.parallel);
  const std::int64_t final_cp = ctx.config.step_budget();
  std::map<std::string, double> kl;
  for (const auto& per : res.trials) {
    double sum = 0.0;
    for (const TrialResult& t : per) {
      for (const TrialRow& r : t.rows) {
        if (r.checkpoint_steps == final_cp) sum += r.kl.value_or(NAN);
      }
    }
    kl[per.front().strategy] = sum / static_cast<double>(per.size());
  }
  const bool ok = kl["ROS"] <= 0.5 * kl["OS"] && kl["ROA"] <= 0.5 * kl["OS"];
  return {ok, fmt::format("mean KL at {} steps: OS {:.3e}, ROS {:.3e}, ROA {:.3e}", final_cp, kl["OS"], kl["ROS"],
                          kl["ROA"])};
}

Verdict mse_ordering(const AcceptanceOptions& opts) {
  ExperimentContext ctx = load_context(opts, "multibandit.yaml");
  ctx.config.budget_multiplier = 1000.0;
  ctx.config.trials = 200;
  ctx.config.initial_data.reset();
  ctx.config.strategies = {
      StrategySpec{StrategyConfig{"OS", StrategyKind::OS}, {"MC"}},
      StrategySpec{StrategyConfig{"ROS", StrategyKind::ROS, 1000.0}, {"MC"}},
      StrategySpec{StrategyConfig{"ROA", StrategyKind::ROA, 0.0, 1.0}, {"MC"}},
  };
  const ExperimentResult res = run_experiment(ctx, opts.parallel);
  const auto os = final_squared_errors(res, ctx, "OS", "MC");
  const auto ros = final_squared_errors(res, ctx, "ROS", "MC");
  const auto roa = final_squared_errors(res, ctx, "ROA", "MC");
  const Gap upper = gap(ros, os);
  const Gap lower = gap(roa, ros);
  const bool ok = upper.clear() && lower.clear();
  return {ok, fmt::format("MSE OS {:.3e} > ROS {:.3e} > ROA {:.3e}; gaps {:.2e} (se {:.2e}, paired {:.2e}), "
                          "{:.2e} (se {:.2e}, paired {:.2e})",
                          upper.hi_mse, upper.lo_mse, lower.lo_mse, upper.diff, upper.combined_se,
                          upper.paired_se, lower.diff, lower.combined_se, lower.paired_se)};
}

Verdict initial_data_correction(const AcceptanceOptions& opts) {
  ExperimentContext ctx = load_context(opts, "multibandit_opd.yaml");
  ctx.config.budget_multiplier = 1000.0;
  ctx.config.trials = 200;
  ctx.config.initial_data = InitialDataConfig{0.1, 100};
  ctx.config.strategies = {
      StrategySpec{StrategyConfig{"OS", StrategyKind::OS}, {"MC"}},
      StrategySpec{StrategyConfig{"ROA", StrategyKind::ROA, 0.0, 1.0}, {"MC"}},
  };
  const ExperimentResult res = run_experiment(ctx, opts.parallel);
  const Gap g = gap(final_squared_errors(res, ctx, "ROA", "MC"), final_squared_errors(res, ctx, "OS", "MC"));
  return {g.clear(), fmt::format("MSE (OPD+OS)-MC {:.3e} > (OPD+ROA)-MC {:.3e}; gap {:.2e} (se {:.2e}, paired {:.2e})",
                                 g.hi_mse, g.lo_mse, g.diff, g.combined_se, g.paired_se)};
}

// ---------------------------------------------------------------------------

// Independent simulator: with uniform pi_e the score of arm a is e_a - 1/n,
// so n^2 * ||mean score after taking a||^2 * (i+1)^2 is an integer.
int brute_force_round_robin(const std::vector<long>& counts) {
  const long n = static_cast<long>(counts.size());
  long total = 0;
  for (long c : counts) total += c;
  long best_cost = -1;
  int best = 0;
  for (int a = 0; a < n; ++a) {
    long cost = 0;
    for (int b = 0; b < n; ++b) {
      const long v = n * (counts[static_cast<std::size_t>(b)] + (a == b ? 1 : 0)) - (total + 1);
      cost += v * v;
    }
    if (best_cost < 0 || cost < best_cost) {
      best_cost = cost;
      best = a;
    }
  }
  return best;
}

Verdict roa_round_robin() {
  constexpr int kRounds = 25;
  double worst = 0.0;
  for (int n : {2, 3, 4}) {
    const Policy pi = Policy::tabular_softmax(1, n);
    RobustOnPolicyActor roa(pi, 1.0, 9, 5);
    Rng rng(1);
    std::vector<long> counts(static_cast<std::size_t>(n), 0);
    const State s = bandit_state();
    for (int j = 1; j <= kRounds; ++j) {
      for (int k = 0; k < n; ++k) {
        const int expected = brute_force_round_robin(counts);
        const ChosenAction c = roa.next_action(s, rng);
        if (c.action.index() != expected) {
          return {false, fmt::format("n={} step {}: ROA chose {}, simulator {}", n, (j - 1) * n + k,
                                     c.action.index(), expected)};
        }
        roa.observe(s, c.action);
        ++counts[static_cast<std::size_t>(expected)];
      }
      for (long c : counts) {
        if (c != j) return {false, fmt::format("n={} after {} rounds: counts not uniform", n, j)};
      }
      worst = std::max(worst, roa.accumulator().mean_grad().norm());
    }
  }
  return {worst <= 1e-9, fmt::format("n in {{2,3,4}}, {} rounds: uniform counts, max mean_grad norm {:.1e}",
                                     kRounds, worst)};
}

Verdict roa_empty_history() {
  Rng rng(4242);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 12)(rng);
    const Policy base = Policy::tabular_softmax(1, n);
    ParamVector th(n);
    for (auto& x : th) x = 2.0 * standard_normal(rng);
    const Policy pi = base.with_params(th);
    const State s = bandit_state();
    const auto probs = pi.distribution(s).probs();
    const int argmax = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());

    int argmin_norm = 0;
    double best = 0.0;
    for (int a = 0; a < n; ++a) {
      const double norm = pi.log_prob_grad(s, Action::discrete(a)).norm();
      if (a == 0 || norm < best) {
        best = norm;
        argmin_norm = a;
      }
    }
    RobustOnPolicyActor roa(pi, 1.0, 9, static_cast<std::uint64_t>(trial));
    const int chosen = roa.next_action(s, rng).action.index();
    if (chosen != argmax || chosen != argmin_norm) {
      return {false, fmt::format("policy {}: chose {}, argmax {}, exhaustive {}", trial, chosen, argmax, argmin_norm)};
    }
  }
  return {true, "200 random softmax policies: first action = argmax pi_e = exhaustive argmin"};
}

// ---------------------------------------------------------------------------

Verdict estimator_identities() {
  double worst_is = 0.0;
  double worst_comb = 0.0;
  for (const DomainSetup& d : degeneracy_domains()) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      auto os = make_strategy({"OS", StrategyKind::OS}, d.policy, d.env.gamma(), seed);
      Rng env_rng = make_rng(seed, {1});
      Rng action_rng = make_rng(seed, {2});
      const Dataset data = collect(*os, d.env, 400, Dataset{}, env_rng, action_rng).dataset;
      const double g = d.env.gamma();
      const double mc = mc_estimate(data, g).value;
      worst_is = std::max({worst_is, std::abs(ois_estimate(data, d.policy, g).value - mc),
                           std::abs(wis_estimate(data, d.policy, g).value - mc)});
      const std::size_t split = data.num_episodes() / 3;
      Dataset first = data.prefix(split);
      Dataset second;
      second.episodes.assign(data.episodes.begin() + static_cast<std::ptrdiff_t>(split), data.episodes.end());
      const double comb = combined_estimate(mc_estimate(first, g).value, static_cast<double>(first.num_episodes()),
                                            mc_estimate(second, g).value, static_cast<double>(second.num_episodes()))
                              .value;
      worst_comb = std::max(worst_comb, std::abs(comb - mc));
    }
  }

  const Environment bandit(bandit_spec({2.0, 4.0}, {0.0, 0.0}));
  Rng rng(31);
  const TrueValue tv = estimate_true_value(bandit, Policy::tabular_softmax(1, 2), 10000, rng);
  const double z = std::abs(tv.mu_g - 3.0) / tv.sigma_mu;

  const bool ok = worst_is <= 1e-12 && worst_comb <= 1e-12 && z <= 4.0;
  return {ok, fmt::format("|OIS-MC|,|WIS-MC| <= {:.1e}; |combined-MC| <= {:.1e}; true value {:.5f} ({:.2f} sigma_mu)",
                          worst_is, worst_comb, tv.mu_g, z)};
}

}  // namespace

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options, std::ostream& out) {
  struct Criterion {
    std::string name;
    double max_seconds;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria{
      {"worked-example", 1.0, worked_example},
      {"gradient-oracle", 30.0, gradient_oracle},
      {"strategy-degeneracy", 60.0, strategy_degeneracy},
      {"zero-sampling-error", 10.0, zero_sampling_error},
      {"sampling-error-reduction", 900.0, [&] { return sampling_error_reduction(options); }},
      {"mse-ordering", 900.0, [&] { return mse_ordering(options); }},
      {"initial-data-correction", 900.0, [&] { return initial_data_correction(options); }},
      {"roa-round-robin", 5.0, roa_round_robin},
      {"roa-empty-history", 5.0, roa_empty_history},
      {"estimator-identities", 30.0, estimator_identities},
  };

  std::vector<CriterionResult> results;
  for (const Criterion& c : criteria) {
    CriterionResult r;
    r.name = c.name;
    const auto start = std::chrono::steady_clock::now();
    try {
      const Verdict v = c.run();
      r.passed = v.passed;
      r.detail = v.detail;
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = fmt::format("exception: {}", e.what());
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (r.seconds > c.max_seconds) {
      r.passed = false;
      r.detail += fmt::format(" [runtime {:.1f}s over {:.0f}s limit]", r.seconds, c.max_seconds);
    }
    out << fmt::format("{} {} ({:.2f}s): {}\n", r.passed ? "PASS" : "FAIL", r.name, r.seconds, r.detail)
        << std::flush;
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace robust_collect
