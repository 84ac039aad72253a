#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "robust_collect/dataset.hpp"
#include "robust_collect/policies.hpp"

namespace robust_collect {

enum class EstimatorKind { MC, OIS, WIS, Combined };

std::string_view to_string(EstimatorKind kind);

struct Estimate {
  double value = 0.0;
  EstimatorKind estimator = EstimatorKind::MC;
  std::size_t n_steps_used = 0;
};

struct ReturnSummary {
  std::vector<double> returns;
  double gamma = 1.0;
  std::size_t n = 0;
};

ReturnSummary summarize_returns(const Dataset& data, double gamma);

// Mean discounted return over every episode. Throws InvalidArgument if empty.
Estimate mc_estimate(const Dataset& data, double gamma);

// Per-episode importance weight exp(sum_t log pi_e - behavior_log_prob_t),
// accumulated in log space.
std::vector<double> importance_weights(const Dataset& data, const Policy& eval_policy);

// (1/n) sum_i w_i g_i. Throws on empty data or a non-finite weight.
Estimate ois_estimate(const Dataset& data, const Policy& eval_policy, double gamma);
// sum_i w_i g_i / sum_i w_i. Throws when the total weight is zero.
Estimate wis_estimate(const Dataset& data, const Policy& eval_policy, double gamma);

// Size-weighted mean (n1 v1 + n2 v2) / (n1 + n2).
Estimate combined_estimate(double v1, double n1, double v2, double n2);

}  // namespace robust_collect
