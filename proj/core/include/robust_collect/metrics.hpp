#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "robust_collect/collectors.hpp"
#include "robust_collect/dataset.hpp"
#include "robust_collect/policies.hpp"

namespace robust_collect {

struct FitOptions {
  int iterations = 200;
  double step_size = 1e-2;
};

// Maximum-likelihood policy of a dataset. Tabular policies are exact count
// tables; otherwise a policy of the evaluation policy's class is fit by
// full-batch gradient ascent started at theta_e.
class EmpiricalPolicy {
 public:
  static EmpiricalPolicy tabular(const Dataset& data, const Policy& eval_policy);
  static EmpiricalPolicy fitted(const Dataset& data, const Policy& eval_policy, FitOptions options);

  bool is_tabular() const { return !fitted_.has_value(); }
  double log_prob(const State& s, const Action& a) const;
  // Count-based probability (tabular only).
  double probability(int state, int action) const;
  const Policy& fitted_policy() const { return *fitted_; }
  // Mean per-step log-likelihood of the fit on its training data.
  double mean_log_likelihood() const { return mean_ll_; }

 private:
  std::map<std::pair<int, int>, std::size_t> counts_;
  std::map<int, std::size_t> state_totals_;
  std::optional<Policy> fitted_;
  double mean_ll_ = 0.0;
};

// Exact counts when the evaluation policy has one-hot features, gradient
// fit otherwise. Requires at least one step.
EmpiricalPolicy fit_empirical_policy(const Dataset& data, const Policy& eval_policy,
                                     FitOptions options = {});

enum class KlNormalization { MeanPerStep, RawSum };

// Sum (or mean) over steps of log pi_D(a|s) - log pi_e(a|s). Returns +inf
// when pi_e assigns zero probability to an observed action.
double kl_sampling_error(const Dataset& data, const EmpiricalPolicy& empirical,
                         const Policy& eval_policy,
                         KlNormalization norm = KlNormalization::MeanPerStep);

// L2 norm of the mean score at theta_e over every step.
double grad_norm(const Dataset& data, const Policy& eval_policy);

// Distinct (state, action) pairs; throws for continuous-state data.
std::size_t unique_pairs(const Dataset& data);

// Incremental tracker used at experiment checkpoints: absorbs steps once and
// reports KL (tabular), gradient norm and unique pairs for the data so far.
class MetricTracker {
 public:
  explicit MetricTracker(const Policy& eval_policy);

  void absorb(const Episode& episode);
  std::size_t steps() const { return steps_; }
  double grad_norm() const;
  // Tabular evaluation policies only; nullopt otherwise.
  std::optional<double> tabular_kl() const;
  std::optional<std::size_t> unique_pairs() const;

 private:
  const Policy* eval_;
  bool tabular_;
  std::size_t steps_ = 0;
  ParamVector grad_sum_;
  double log_pi_e_sum_ = 0.0;
  std::map<std::pair<int, int>, std::size_t> counts_;
  std::map<int, std::size_t> state_totals_;
};

}  // namespace robust_collect
