#include "robust_collect/metrics.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "robust_collect/errors.hpp"

namespace robust_collect {
namespace {

double dataset_log_likelihood(const Dataset& data, const Policy& policy, const ParamVector& at) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& ep : data.episodes) {
    for (const auto& s : ep.steps) {
      total += policy.log_prob(s.state, s.action, at);
      ++n;
    }
  }
  return total / static_cast<double>(n);
}

ParamVector mean_score(const Dataset& data, const Policy& policy, const ParamVector& at) {
  ParamVector g = ParamVector::Zero(at.size());
  std::size_t n = 0;
  for (const auto& ep : data.episodes) {
    for (const auto& s : ep.steps) {
      g += policy.log_prob_grad(s.state, s.action, at);
      ++n;
    }
  }
  return g / static_cast<double>(n);
}

}  // namespace

EmpiricalPolicy EmpiricalPolicy::tabular(const Dataset& data, const Policy& eval_policy) {
  if (!eval_policy.tabular_features() || !eval_policy.discrete()) {
    throw InvalidArgument("tabular empirical policy needs one-hot features and discrete actions");
  }
  if (data.total_steps() == 0) throw InvalidArgument("empirical policy needs at least one step");
  EmpiricalPolicy e;
  double ll = 0.0;
  for (const auto& ep : data.episodes) {
    for (const auto& s : ep.steps) {
      const int st = state_index(s.state);
      ++e.counts_[{st, s.action.index()}];
      ++e.state_totals_[st];
    }
  }
  for (const auto& [key, c] : e.counts_) {
    ll += static_cast<double>(c) *
          std::log(static_cast<double>(c) / static_cast<double>(e.state_totals_.at(key.first)));
  }
  e.mean_ll_ = ll / static_cast<double>(data.total_steps());
  return e;
}

EmpiricalPolicy EmpiricalPolicy::fitted(const Dataset& data, const Policy& eval_policy,
                                        FitOptions options) {
  if (data.total_steps() == 0) throw InvalidArgument("empirical policy needs at least one step");
  ParamVector theta = eval_policy.params();
  double ll = dataset_log_likelihood(data, eval_policy, theta);
  double step = options.step_size;
  // Only improving steps are accepted, so the fit never ends below theta_e.
  for (int it = 0; it < options.iterations; ++it) {
    const ParamVector g = mean_score(data, eval_policy, theta);
    for (int tries = 0; tries < 30; ++tries) {
      const ParamVector cand = theta + step * g;
      double cand_ll = -std::numeric_limits<double>::infinity();
      if (cand.allFinite()) {
        try {
          cand_ll = dataset_log_likelihood(data, eval_policy, cand);
        } catch (const Error&) {
        }
      }
      if (std::isfinite(cand_ll) && cand_ll >= ll) {
        theta = cand;
        ll = cand_ll;
        break;
      }
      step *= 0.5;
    }
  }
  EmpiricalPolicy e;
  e.fitted_ = eval_policy.with_params(std::move(theta));
  e.mean_ll_ = ll;
  return e;
}

double EmpiricalPolicy::probability(int state, int action) const {
  if (!is_tabular()) throw InvalidArgument("probability() is only defined for count tables");
  const auto total = state_totals_.find(state);
  if (total == state_totals_.end()) return 0.0;
  const auto c = counts_.find({state, action});
  return c == counts_.end() ? 0.0
                            : static_cast<double>(c->second) / static_cast<double>(total->second);
}

double EmpiricalPolicy::log_prob(const State& s, const Action& a) const {
  if (fitted_) return fitted_->log_prob(s, a);
  const double p = probability(state_index(s), a.index());
  return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
}

EmpiricalPolicy fit_empirical_policy(const Dataset& data, const Policy& eval_policy,
                                     FitOptions options) {
  if (eval_policy.tabular_features() && eval_policy.discrete()) {
    return EmpiricalPolicy::tabular(data, eval_policy);
  }
  return EmpiricalPolicy::fitted(data, eval_policy, options);
}

double kl_sampling_error(const Dataset& data, const EmpiricalPolicy& empirical,
                         const Policy& eval_policy, KlNormalization norm) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& ep : data.episodes) {
    for (const auto& s : ep.steps) {
      const double lp_e = eval_policy.log_prob(s.state, s.action);
      if (!std::isfinite(lp_e)) return std::numeric_limits<double>::infinity();
      total += empirical.log_prob(s.state, s.action) - lp_e;
      ++n;
    }
  }
  if (n == 0) throw InvalidArgument("kl_sampling_error requires at least one step");
  return norm == KlNormalization::MeanPerStep ? total / static_cast<double>(n) : total;
}

double grad_norm(const Dataset& data, const Policy& eval_policy) {
  if (data.total_steps() == 0) throw InvalidArgument("grad_norm requires at least one step");
  return mean_score(data, eval_policy, eval_policy.params()).norm();
}

std::size_t unique_pairs(const Dataset& data) {
  std::set<std::pair<int, int>> seen;
  for (const auto& ep : data.episodes) {
    for (const auto& s : ep.steps) {
      if (!s.action.is_discrete()) throw InvalidArgument("unique_pairs requires discrete actions");
      seen.emplace(state_index(s.state), s.action.index());
    }
  }
  return seen.size();
}

MetricTracker::MetricTracker(const Policy& eval_policy)
    : eval_(&eval_policy),
      tabular_(eval_policy.tabular_features() && eval_policy.discrete()),
      grad_sum_(ParamVector::Zero(eval_policy.num_params())) {}

void MetricTracker::absorb(const Episode& episode) {
  for (const auto& s : episode.steps) {
    grad_sum_ += eval_->log_prob_grad(s.state, s.action);
    if (tabular_) {
      const int st = state_index(s.state);
      ++counts_[{st, s.action.index()}];
      ++state_totals_[st];
      log_pi_e_sum_ += eval_->log_prob(s.state, s.action);
    }
    ++steps_;
  }
}

double MetricTracker::grad_norm() const {
  if (steps_ == 0) return 0.0;
  return (grad_sum_ / static_cast<double>(steps_)).norm();
}

std::optional<double> MetricTracker::tabular_kl() const {
  if (!tabular_ || steps_ == 0) return std::nullopt;
  if (!std::isfinite(log_pi_e_sum_)) return std::numeric_limits<double>::infinity();
  double ll = 0.0;
  for (const auto& [key, c] : counts_) {
    const double cd = static_cast<double>(c);
    ll += cd * std::log(cd / static_cast<double>(state_totals_.at(key.first)));
  }
  return (ll - log_pi_e_sum_) / static_cast<double>(steps_);
}

std::optional<std::size_t> MetricTracker::unique_pairs() const {
  if (!tabular_) return std::nullopt;
  return counts_.size();
}

}  // namespace robust_collect
