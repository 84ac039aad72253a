#include "robust_collect/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <deque>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

#include <fmt/format.h>

#include "robust_collect/errors.hpp"
#include "robust_collect/estimators.hpp"

namespace robust_collect {

namespace {

// Stream ids under a trial seed.
enum Stream : std::uint64_t {
  kEnvStream = 1,
  kActionStream = 2,
  kCoinStream = 3,
  kOpdEnvStream = 4,
  kOpdActionStream = 5,
};

Eigen::VectorXd obs_vector(const State& s) {
  const auto v = observation(s);
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Policy initial_training_policy(const Environment& env, const TrainingConfig& cfg) {
  if (env.tabular()) return Policy::tabular_softmax(env.num_states(), env.num_actions());
  if (env.discrete_actions()) {
    return Policy::mlp_softmax(env.observation_dim(), env.num_actions(), cfg.hidden, cfg.seed);
  }
  return Policy::mlp_gaussian(env.observation_dim(), cfg.hidden, cfg.seed);
}

struct Adam {
  explicit Adam(Eigen::Index n) : m(ParamVector::Zero(n)), v(ParamVector::Zero(n)) {}
  ParamVector step(const ParamVector& g, double lr) {
    ++t;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    return lr * (m / c1).cwiseQuotient(((v / c2).cwiseSqrt().array() + 1e-8).matrix());
  }
  ParamVector m, v;
  double b1 = 0.9, b2 = 0.999;
  int t = 0;
};

std::string format_double(double x) { return fmt::format("{:.17g}", x); }

}  // namespace

// ---------------------------------------------------------------------------
// Evaluation-policy preparation

TrainingResult train_reinforce(const Environment& env, const TrainingConfig& config) {
  if (config.window < 1) throw InvalidArgument("training window must be >= 1");
  if (config.max_episodes < 1) throw InvalidArgument("max_episodes must be >= 1");
  if (!(config.learning_rate > 0.0)) throw InvalidArgument("learning_rate must be > 0");

  Policy policy = initial_training_policy(env, config);
  const bool mlp = std::holds_alternative<MlpFeatures>(policy.featurizer());
  InputNormalizer normalizer;
  if (mlp) normalizer = std::get<MlpFeatures>(policy.featurizer()).normalizer;

  Rng env_rng = make_rng(config.seed, {kEnvStream});
  Rng action_rng = make_rng(config.seed, {kActionStream});
  Adam adam(policy.num_params());

  TrainingResult result{policy, 0, 0.0, {}};
  std::deque<double> window;
  double window_sum = 0.0;
  double baseline = 0.0;

  for (int ep = 0; ep < config.max_episodes; ++ep) {
    std::vector<std::pair<State, Action>> trajectory;
    double ret = 0.0;
    double discount = 1.0;
    State s = env.reset(env_rng);
    while (!s.terminal) {
      Action a = policy.sample(s, action_rng);
      Action executed = a;
      if (!a.is_discrete()) executed = Action::continuous(std::clamp(a.value(), -1.0, 1.0));
      const StepOutcome out = env.step(s, executed, env_rng);
      trajectory.emplace_back(s, a);
      ret += discount * out.reward;
      discount *= env.gamma();
      s = out.next_state;
    }

    result.returns.push_back(ret);
    window.push_back(ret);
    window_sum += ret;
    if (static_cast<int>(window.size()) > config.window) {
      window_sum -= window.front();
      window.pop_front();
    }

    // Running-mean baseline over previous episodes.
    const double advantage = ret - baseline;
    baseline += (ret - baseline) / static_cast<double>(ep + 1);

    ParamVector g = ParamVector::Zero(policy.num_params());
    for (const auto& [st, a] : trajectory) g += policy.log_prob_grad(st, a);
    g *= advantage;
    if (g.allFinite()) {
      ParamVector delta = config.adam ? adam.step(g, config.learning_rate) : ParamVector(config.learning_rate * g);
      policy = policy.with_params(policy.params() + delta);
    }
    if (mlp) {
      for (const auto& [st, a] : trajectory) normalizer.observe(obs_vector(st));
      policy = policy.with_normalizer(normalizer);
    }

    const double mean = window_sum / static_cast<double>(window.size());
    if (static_cast<int>(window.size()) == config.window && mean > config.threshold) {
      if (mlp) {
        InputNormalizer frozen = normalizer;
        frozen.frozen = true;
        policy = policy.with_normalizer(frozen);
      }
      result.policy = policy;
      result.episodes = ep + 1;
      result.window_mean = mean;
      return result;
    }
  }
  throw Error(fmt::format("training threshold {} not reached within {} episodes", config.threshold,
                          config.max_episodes));
}

TrueValue estimate_true_value(const Environment& env, const Policy& policy, std::size_t n, Rng& rng) {
  if (n < 1) throw InvalidArgument("true value needs n >= 1");
  Rng action_rng(rng());
  double mean = 0.0;
  double m2 = 0.0;
  double steps = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double ret = 0.0;
    double discount = 1.0;
    State s = env.reset(rng);
    std::size_t len = 0;
    while (!s.terminal) {
      Action a = policy.sample(s, action_rng);
      if (!a.is_discrete()) a = Action::continuous(std::clamp(a.value(), -1.0, 1.0));
      const StepOutcome out = env.step(s, a, rng);
      ret += discount * out.reward;
      discount *= env.gamma();
      s = out.next_state;
      ++len;
    }
    const double k = static_cast<double>(i + 1);
    const double d = ret - mean;
    mean += d / k;
    m2 += d * (ret - mean);
    steps += (static_cast<double>(len) - steps) / k;
  }
  TrueValue tv;
  tv.mu_g = mean;
  tv.sigma_g = std::sqrt(m2 / static_cast<double>(n));
  tv.sigma_mu = tv.sigma_g / std::sqrt(static_cast<double>(n));
  tv.mean_episode_steps = steps;
  tv.n = n;
  return tv;
}

double exact_bandit_value(const Environment& env, const Policy& policy) {
  if (env.kind() != EnvKind::MultiBandit) throw InvalidArgument("exact value needs a MultiBandit");
  const EnvSpec& spec = env.spec();
  State s;
  s.value = BanditUnit{};
  const auto probs = policy.distribution(s).probs();
  if (probs.size() != spec.bandit_means.size()) throw InvalidArgument("policy/bandit arm count mismatch");
  double v = 0.0;
  for (std::size_t a = 0; a < probs.size(); ++a) v += probs[a] * spec.bandit_means[a];
  v *= spec.reward_mean_factor;
  if (spec.reward_normalizer) v /= *spec.reward_normalizer;
  return v;
}

Dataset prepare_offpolicy_data(const Environment& env, const Policy& eval_policy, double delta,
                               int num_trajectories, Rng& env_rng, Rng& action_rng) {
  if (num_trajectories < 0) throw InvalidArgument("num_trajectories must be >= 0");
  const PerturbedPolicy behavior = perturb_policy(eval_policy, delta);
  Dataset data;
  for (int i = 0; i < num_trajectories; ++i) {
    Episode ep;
    ep.provenance = Provenance::InitialOffPolicy;
    State s = env.reset(env_rng);
    while (!s.terminal) {
      const ActionDistribution dist = behavior.distribution(s);
      const Action a = dist.sample(action_rng);
      Action executed = a;
      if (!a.is_discrete()) executed = Action::continuous(std::clamp(a.value(), -1.0, 1.0));
      const StepOutcome out = env.step(s, executed, env_rng);
      ep.steps.push_back({s, a, out.reward, dist.log_prob(a), false});
      s = out.next_state;
    }
    data.episodes.push_back(std::move(ep));
  }
  return data;
}

// ---------------------------------------------------------------------------
// Configuration

std::vector<std::string> default_estimators(StrategyKind kind, bool with_initial_data) {
  switch (kind) {
    case StrategyKind::OS:
      if (with_initial_data) return {"MC", "MC_NEW", "WIS+MC"};
      return {"MC"};
    case StrategyKind::BPG: return {"OIS"};
    case StrategyKind::ROS:
    case StrategyKind::ROA: return {"MC"};
  }
  return {"MC"};
}

double ExperimentConfig::target_value() const {
  if (!true_value) throw ConfigError(fmt::format("experiment '{}' has no true value", name));
  double v = true_value->mu_g;
  if (env.reward_normalizer) v /= *env.reward_normalizer;
  return v;
}

double ExperimentConfig::mean_episode_steps() const {
  if (!true_value) throw ConfigError(fmt::format("experiment '{}' has no true value", name));
  return true_value->mean_episode_steps;
}

std::int64_t ExperimentConfig::step_budget() const {
  return static_cast<std::int64_t>(std::ceil(budget_multiplier * mean_episode_steps() - 1e-9));
}

std::vector<std::int64_t> ExperimentConfig::checkpoints() const {
  const std::int64_t budget = step_budget();
  const double tbar = mean_episode_steps();
  std::vector<std::int64_t> out;
  if (initial_data) out.push_back(0);
  for (double mult = 1.0;; mult *= 2.0) {
    const auto c = static_cast<std::int64_t>(std::ceil(mult * tbar - 1e-9));
    if (c >= budget) break;
    if (c > 0 && (out.empty() || c > out.back())) out.push_back(c);
  }
  out.push_back(budget);
  return out;
}

void ExperimentConfig::validate() const {
  robust_collect::validate(env);
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (!(budget_multiplier > 0.0)) throw ConfigError("budget_multiplier must be > 0");
  if (strategies.empty()) throw ConfigError("at least one strategy is required");
  if (!true_value) throw ConfigError("true_value is required");
  if (!(true_value->mean_episode_steps >= 1.0)) throw ConfigError("true_value.mean_episode_steps must be >= 1");
  if (initial_data && initial_data->trajectories < 1) throw ConfigError("initial_data.trajectories must be >= 1");
  std::vector<std::string> names;
  for (const auto& s : strategies) {
    if (s.config.name.empty()) throw ConfigError("strategy name must not be empty");
    if (std::find(names.begin(), names.end(), s.config.name) != names.end()) {
      throw ConfigError(fmt::format("duplicate strategy name '{}'", s.config.name));
    }
    names.push_back(s.config.name);
    if (s.config.kind == StrategyKind::ROA && !(s.config.rho >= 0.0 && s.config.rho <= 1.0)) {
      throw ConfigError(fmt::format("strategy '{}': rho must lie in [0, 1]", s.config.name));
    }
    if (s.config.kind == StrategyKind::ROA && s.config.m < 1) {
      throw ConfigError(fmt::format("strategy '{}': m must be >= 1", s.config.name));
    }
    if (s.config.kind == StrategyKind::BPG && s.config.k < 1) {
      throw ConfigError(fmt::format("strategy '{}': k must be >= 1", s.config.name));
    }
    for (const auto& e : s.estimators) {
      if (e != "MC" && e != "MC_NEW" && e != "OIS" && e != "WIS" && e != "WIS+MC") {
        throw ConfigError(fmt::format("strategy '{}': unknown estimator '{}'", s.config.name, e));
      }
    }
  }
  const auto cps = checkpoints();
  if (!std::is_sorted(cps.begin(), cps.end()) || cps.back() > step_budget()) {
    throw ConfigError("checkpoints must be ascending and within the budget");
  }
}

// ---------------------------------------------------------------------------
// Trials

ExperimentContext make_context(ExperimentConfig config) {
  Policy policy = load_policy(config.policy_path);
  return make_context(std::move(config), std::move(policy));
}

ExperimentContext make_context(ExperimentConfig config, Policy eval_policy) {
  config.validate();
  Environment env(config.env);
  return ExperimentContext{std::move(config), std::move(env), std::move(eval_policy)};
}

namespace {

std::optional<double> run_estimator(const std::string& name, const Dataset& data, const Policy& eval,
                                    double gamma) {
  try {
    if (name == "MC") return mc_estimate(data, gamma).value;
    if (name == "MC_NEW") return mc_estimate(data.filter(Provenance::Collected), gamma).value;
    if (name == "OIS") return ois_estimate(data, eval, gamma).value;
    if (name == "WIS") return wis_estimate(data, eval, gamma).value;
    if (name == "WIS+MC") {
      const Dataset initial = data.filter(Provenance::InitialOffPolicy);
      const Dataset fresh = data.filter(Provenance::Collected);
      double v1 = 0.0, v2 = 0.0;
      if (!initial.empty()) v1 = wis_estimate(initial, eval, gamma).value;
      if (!fresh.empty()) v2 = mc_estimate(fresh, gamma).value;
      return combined_estimate(v1, static_cast<double>(initial.num_episodes()), v2,
                               static_cast<double>(fresh.num_episodes()))
          .value;
    }
  } catch (const InvalidArgument&) {
    // Not defined on this data (e.g. no collected episodes yet).
    return std::nullopt;
  }
  throw InvalidArgument(fmt::format("unknown estimator '{}'", name));
}

}  // namespace

TrialResult run_trial(const ExperimentContext& ctx, const StrategySpec& spec, std::uint64_t seed) {
  const ExperimentConfig& cfg = ctx.config;
  const double target = cfg.target_value();
  const double gamma = ctx.env.gamma();

  Dataset initial;
  if (cfg.initial_data) {
    Rng opd_env = make_rng(seed, {kOpdEnvStream});
    Rng opd_action = make_rng(seed, {kOpdActionStream});
    initial = prepare_offpolicy_data(ctx.env, ctx.eval_policy, cfg.initial_data->delta,
                                     cfg.initial_data->trajectories, opd_env, opd_action);
  }

  auto strategy = make_strategy(spec.config, ctx.eval_policy, gamma, derive_seed(seed, {kCoinStream}));
  Rng env_rng = make_rng(seed, {kEnvStream});
  Rng action_rng = make_rng(seed, {kActionStream});
  const auto checkpoints = cfg.checkpoints();
  const CollectionResult collected =
      collect(*strategy, ctx.env, cfg.step_budget(), initial, env_rng, action_rng, checkpoints);

  TrialResult out;
  out.seed = seed;
  out.strategy = spec.config.name;
  out.diverged = collected.diverged;

  MetricTracker tracker(ctx.eval_policy);
  std::size_t absorbed = 0;
  for (const CheckpointSnapshot& snap : collected.snapshots) {
    for (; absorbed < snap.episodes; ++absorbed) tracker.absorb(collected.dataset.episodes[absorbed]);
    const Dataset data = collected.dataset.prefix(snap.episodes);

    std::optional<double> kl = tracker.tabular_kl();
    if (!kl && cfg.continuous_kl && !data.empty()) {
      const EmpiricalPolicy emp = fit_empirical_policy(data, ctx.eval_policy, cfg.fit);
      kl = kl_sampling_error(data, emp, ctx.eval_policy);
    }
    const double gn = tracker.grad_norm();
    const auto pairs = tracker.unique_pairs();

    for (const std::string& est : spec.estimators) {
      const auto value = run_estimator(est, data, ctx.eval_policy, gamma);
      if (!value) continue;
      TrialRow row;
      row.seed = seed;
      row.checkpoint_steps = snap.checkpoint;
      row.estimator = est;
      row.estimate = *value;
      row.squared_error = (*value - target) * (*value - target);
      row.kl = kl;
      row.grad_norm = gn;
      row.unique_pairs = pairs;
      row.diverged = collected.diverged;
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation

double quantile_linear(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("quantile of empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<AggregateRow> aggregate(const std::vector<TrialResult>& trials, double target,
                                    bool drop_diverged) {
  // Key order: strategy as first seen, then checkpoint, then estimator as first seen.
  std::vector<std::string> strategies;
  std::map<std::string, std::vector<std::string>> estimators;
  std::map<std::tuple<std::string, std::int64_t, std::string>, std::vector<double>> errors;
  for (const TrialResult& t : trials) {
    if (drop_diverged && t.diverged) continue;
    if (std::find(strategies.begin(), strategies.end(), t.strategy) == strategies.end()) {
      strategies.push_back(t.strategy);
    }
    auto& ests = estimators[t.strategy];
    for (const TrialRow& r : t.rows) {
      if (std::find(ests.begin(), ests.end(), r.estimator) == ests.end()) ests.push_back(r.estimator);
      const double e = r.estimate - target;
      errors[{t.strategy, r.checkpoint_steps, r.estimator}].push_back(e * e);
    }
  }

  std::vector<AggregateRow> out;
  for (const std::string& strategy : strategies) {
    std::vector<std::int64_t> cps;
    for (const auto& [key, _] : errors) {
      if (std::get<0>(key) == strategy) cps.push_back(std::get<1>(key));
    }
    cps.erase(std::unique(cps.begin(), cps.end()), cps.end());
    for (std::int64_t cp : cps) {
      for (const std::string& est : estimators[strategy]) {
        auto it = errors.find({strategy, cp, est});
        if (it == errors.end()) continue;
        const std::vector<double>& se = it->second;
        const double n = static_cast<double>(se.size());
        double mean = 0.0;
        for (double x : se) mean += x;
        mean /= n;
        double ss = 0.0;
        for (double x : se) ss += (x - mean) * (x - mean);
        AggregateRow row;
        row.checkpoint_steps = cp;
        row.strategy = strategy;
        row.estimator = est;
        row.mse = mean;
        row.mse_stderr = se.size() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
        row.se_median = quantile_linear(se, 0.5);
        row.se_q25 = quantile_linear(se, 0.25);
        row.se_q75 = quantile_linear(se, 0.75);
        row.trials = se.size();
        out.push_back(std::move(row));
      }
    }
  }
  return out;
}

namespace {

// Runs fn(i) for i in [0, n) on up to `parallel` threads.
template <typename Fn>
void parallel_for(std::size_t n, int parallel, Fn fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, parallel)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentContext& ctx, int parallel,
                                const std::vector<std::string>& strategy_filter) {
  std::vector<const StrategySpec*> selected;
  for (const auto& s : ctx.config.strategies) {
    if (strategy_filter.empty() ||
        std::find(strategy_filter.begin(), strategy_filter.end(), s.config.name) != strategy_filter.end()) {
      selected.push_back(&s);
    }
  }
  for (const auto& name : strategy_filter) {
    if (std::none_of(selected.begin(), selected.end(), [&](auto* s) { return s->config.name == name; })) {
      throw ConfigError(fmt::format("no strategy named '{}' in the config", name));
    }
  }

  const auto trials = static_cast<std::size_t>(ctx.config.trials);
  ExperimentResult result;
  result.trials.assign(selected.size(), std::vector<TrialResult>(trials));
  parallel_for(selected.size() * trials, parallel, [&](std::size_t job) {
    const std::size_t s = job / trials;
    const std::size_t i = job % trials;
    result.trials[s][i] = run_trial(ctx, *selected[s], ctx.config.base_seed + i);
  });

  std::vector<TrialResult> all;
  for (const auto& per : result.trials) all.insert(all.end(), per.begin(), per.end());
  result.aggregate = aggregate(all, ctx.config.target_value());
  return result;
}

// ---------------------------------------------------------------------------
// CSV

void write_trial_csv(std::ostream& os, const std::vector<TrialResult>& trials) {
  os << "seed,checkpoint_steps,estimator,estimate,squared_error,kl,grad_norm,unique_pairs,diverged\n";
  for (const TrialResult& t : trials) {
    for (const TrialRow& r : t.rows) {
      os << r.seed << ',' << r.checkpoint_steps << ',' << r.estimator << ',' << format_double(r.estimate)
         << ',' << format_double(r.squared_error) << ',' << (r.kl ? format_double(*r.kl) : "") << ','
         << format_double(r.grad_norm) << ',' << (r.unique_pairs ? std::to_string(*r.unique_pairs) : "")
         << ',' << (r.diverged ? 1 : 0) << '\n';
    }
  }
}

void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows) {
  os << "checkpoint_steps,strategy,estimator,mse,mse_stderr,se_median,se_q25,se_q75\n";
  for (const AggregateRow& r : rows) {
    os << r.checkpoint_steps << ',' << r.strategy << ',' << r.estimator << ',' << format_double(r.mse)
       << ',' << format_double(r.mse_stderr) << ',' << format_double(r.se_median) << ','
       << format_double(r.se_q25) << ',' << format_double(r.se_q75) << '\n';
  }
}

std::vector<TrialResult> read_trial_csv(std::istream& is, const std::string& strategy) {
  std::string line;
  if (!std::getline(is, line) ||
      line != "seed,checkpoint_steps,estimator,estimate,squared_error,kl,grad_norm,unique_pairs,diverged") {
    throw InvalidArgument("trial csv: unexpected header");
  }
  std::vector<TrialResult> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 9) throw InvalidArgument(fmt::format("trial csv: bad row '{}'", line));
    TrialRow r;
    r.seed = std::stoull(f[0]);
    r.checkpoint_steps = std::stoll(f[1]);
    r.estimator = f[2];
    r.estimate = std::stod(f[3]);
    r.squared_error = std::stod(f[4]);
    if (!f[5].empty()) r.kl = std::stod(f[5]);
    r.grad_norm = std::stod(f[6]);
    if (!f[7].empty()) r.unique_pairs = std::stoull(f[7]);
    r.diverged = f[8] == "1";
    if (out.empty() || out.back().seed != r.seed) {
      out.push_back(TrialResult{r.seed, strategy, {}, r.diverged});
    }
    out.back().rows.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::RewardMeanFactor: return "reward_mean_factor";
    case SweepAxis::RewardScaleFactor: return "reward_scale_factor";
    case SweepAxis::Epsilon: return "epsilon";
  }
  return "?";
}

SweepAxis parse_sweep_axis(std::string_view name) {
  if (name == "reward_mean_factor") return SweepAxis::RewardMeanFactor;
  if (name == "reward_scale_factor") return SweepAxis::RewardScaleFactor;
  if (name == "epsilon") return SweepAxis::Epsilon;
  throw ConfigError(fmt::format("unknown sweep axis '{}'", name));
}

std::vector<SweepRow> run_sweep(const ExperimentContext& base, const SweepConfig& sweep, int parallel) {
  if (sweep.values.empty()) throw ConfigError("sweep needs at least one axis value");
  if (sweep.trials < 1) throw ConfigError("sweep trials must be >= 1");
  std::vector<SweepRow> rows;
  for (double value : sweep.values) {
    ExperimentConfig cfg = base.config;
    Policy policy = base.eval_policy;
    switch (sweep.axis) {
      case SweepAxis::RewardMeanFactor: cfg.env.reward_mean_factor = value; break;
      case SweepAxis::RewardScaleFactor: cfg.env.reward_scale_factor = value; break;
      case SweepAxis::Epsilon: {
        const Environment env(cfg.env);
        if (!env.tabular()) throw ConfigError("epsilon sweeps need a tabular domain");
        policy = epsilon_greedy_policy(optimal_actions(env), env.num_actions(), value);
        break;
      }
    }
    const Environment env(cfg.env);

    TrueValue tv;
    if (env.kind() == EnvKind::MultiBandit) {
      // Raw units; the configured normalizer is kept for every sweep point.
      tv.mu_g = exact_bandit_value(env.with_normalizer(std::nullopt), policy);
      tv.mean_episode_steps = 1.0;
      tv.n = 0;
    } else {
      Rng rng = make_rng(cfg.base_seed, {0x5eedULL, std::bit_cast<std::uint64_t>(value)});
      tv = estimate_true_value(env.with_normalizer(std::nullopt), policy, sweep.true_value_rollouts, rng);
    }
    cfg.true_value = tv;
    cfg.budget_multiplier = sweep.budget_multiplier;
    cfg.trials = sweep.trials;
    cfg.initial_data.reset();
    cfg.continuous_kl = false;
    cfg.strategies = {
        StrategySpec{StrategyConfig{"OS", StrategyKind::OS}, {"MC"}},
        StrategySpec{StrategyConfig{"ROS", StrategyKind::ROS, sweep.ros_alpha}, {"MC"}},
        StrategySpec{StrategyConfig{"ROA", StrategyKind::ROA, 0.0, sweep.roa_rho}, {"MC"}},
    };
    const ExperimentContext ctx = make_context(std::move(cfg), std::move(policy));
    const ExperimentResult res = run_experiment(ctx, parallel);

    const std::int64_t final_cp = ctx.config.step_budget();
    std::map<std::string, const AggregateRow*> at_final;
    for (const auto& r : res.aggregate) {
      if (r.checkpoint_steps == final_cp) at_final[r.strategy] = &r;
    }
    const double os_mse = at_final.at("OS")->mse;
    for (const char* name : {"OS", "ROS", "ROA"}) {
      const AggregateRow* r = at_final.at(name);
      double rel = 1.0;
      if (os_mse > 0.0) {
        rel = r->mse / os_mse;
      } else if (r->mse > 0.0) {
        rel = std::numeric_limits<double>::infinity();
      }
      rows.push_back(SweepRow{value, name, r->mse, r->mse_stderr, rel});
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& os, SweepAxis axis, const std::vector<SweepRow>& rows) {
  os << to_string(axis) << ",strategy,mse,mse_stderr,relative_mse\n";
  for (const SweepRow& r : rows) {
    os << format_double(r.axis_value) << ',' << r.strategy << ',' << format_double(r.mse) << ','
       << format_double(r.mse_stderr) << ',' << format_double(r.relative_mse) << '\n';
  }
}

}  // namespace robust_collect
