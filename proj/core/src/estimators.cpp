#include "robust_collect/estimators.hpp"

#include <cmath>

#include <fmt/format.h>

#include "robust_collect/errors.hpp"

namespace robust_collect {

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::MC: return "MC";
    case EstimatorKind::OIS: return "OIS";
    case EstimatorKind::WIS: return "WIS";
    case EstimatorKind::Combined: return "Combined";
  }
  return "?";
}

ReturnSummary summarize_returns(const Dataset& data, double gamma) {
  ReturnSummary s;
  s.gamma = gamma;
  s.n = data.num_episodes();
  s.returns.reserve(s.n);
  for (const auto& ep : data.episodes) s.returns.push_back(ep.discounted_return(gamma));
  return s;
}

Estimate mc_estimate(const Dataset& data, double gamma) {
  if (data.empty()) throw InvalidArgument("mc_estimate requires at least one episode");
  double total = 0.0;
  for (const auto& ep : data.episodes) total += ep.discounted_return(gamma);
  return {total / static_cast<double>(data.num_episodes()), EstimatorKind::MC, data.total_steps()};
}

std::vector<double> importance_weights(const Dataset& data, const Policy& eval_policy) {
  std::vector<double> w;
  w.reserve(data.num_episodes());
  for (const auto& ep : data.episodes) {
    double log_w = 0.0;
    for (const auto& s : ep.steps) log_w += eval_policy.log_prob(s.state, s.action) - s.behavior_log_prob;
    w.push_back(std::exp(log_w));
  }
  return w;
}

Estimate ois_estimate(const Dataset& data, const Policy& eval_policy, double gamma) {
  if (data.empty()) throw InvalidArgument("ois_estimate requires at least one episode");
  const auto w = importance_weights(data, eval_policy);
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!std::isfinite(w[i])) throw InvalidArgument(fmt::format("non-finite importance weight in episode {}", i));
    total += w[i] * data.episodes[i].discounted_return(gamma);
  }
  return {total / static_cast<double>(w.size()), EstimatorKind::OIS, data.total_steps()};
}

Estimate wis_estimate(const Dataset& data, const Policy& eval_policy, double gamma) {
  if (data.empty()) throw InvalidArgument("wis_estimate requires at least one episode");
  const auto w = importance_weights(data, eval_policy);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!std::isfinite(w[i])) throw InvalidArgument(fmt::format("non-finite importance weight in episode {}", i));
    num += w[i] * data.episodes[i].discounted_return(gamma);
    den += w[i];
  }
  if (!(den > 0.0)) throw InvalidArgument("wis_estimate: total importance weight is zero");
  return {num / den, EstimatorKind::WIS, data.total_steps()};
}

Estimate combined_estimate(double v1, double n1, double v2, double n2) {
  if (!(n1 >= 0.0 && n2 >= 0.0)) throw InvalidArgument("combined_estimate sizes must be non-negative");
  if (!(n1 + n2 > 0.0)) throw InvalidArgument("combined_estimate requires n1 + n2 > 0");
  // Exact passthrough for a zero-sized side.
  if (n1 == 0.0) return {v2, EstimatorKind::Combined, 0};
  if (n2 == 0.0) return {v1, EstimatorKind::Combined, 0};
  return {(n1 * v1 + n2 * v2) / (n1 + n2), EstimatorKind::Combined, 0};
}

}  // namespace robust_collect
