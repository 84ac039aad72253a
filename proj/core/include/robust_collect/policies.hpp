#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "robust_collect/envs.hpp"
#include "robust_collect/rng.hpp"

namespace robust_collect {

using ParamVector = Eigen::VectorXd;

struct ParamSegment {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
  bool operator==(const ParamSegment&) const = default;
};

struct ParamLayout {
  std::vector<ParamSegment> segments;
  Eigen::Index total() const;
  const ParamSegment& find(const std::string& name) const;
  bool operator==(const ParamLayout&) const = default;
};

// Per-dimension input standardization. Statistics are accumulated while a
// policy is trained and frozen before any data collection.
struct InputNormalizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
  double count = 0.0;
  bool frozen = false;

  static InputNormalizer identity(int dim);
  void observe(const Eigen::VectorXd& x);
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
};

struct OneHotFeatures {
  int num_states = 1;
};

struct MlpFeatures {
  int input_dim = 4;
  std::vector<int> hidden{64, 64};
  InputNormalizer normalizer;
};

using Featurizer = std::variant<OneHotFeatures, MlpFeatures>;

struct SoftmaxHead {
  int num_actions = 2;
};

// Mean and stdev are both linear in the shared features.
struct GaussianHead {};

// One-parameter policy pi_w(a|s) proportional to exp(w * [a == a*_s]).
struct EpsilonGreedyHead {
  int num_actions = 2;
  std::vector<int> optimal_action;  // indexed by tabular state
};

using PolicyHead = std::variant<SoftmaxHead, GaussianHead, EpsilonGreedyHead>;

inline constexpr double kMinStdev = 1e-4;

class ActionDistribution {
 public:
  static ActionDistribution categorical(std::vector<double> probs);
  // Throws InvalidArgument unless stdev > 0.
  static ActionDistribution gaussian(double mean, double stdev);

  bool is_categorical() const { return !probs_.empty(); }
  const std::vector<double>& probs() const { return probs_; }
  double mean() const { return mean_; }
  double stdev() const { return stdev_; }

  Action sample(Rng& rng) const;
  double log_prob(const Action& a) const;

 private:
  std::vector<double> probs_;
  double mean_ = 0.0;
  double stdev_ = 1.0;
};

// Differentiable conditional action distribution pi_theta(a|s). Immutable:
// parameters are replaced wholesale through with_params().
class Policy {
 public:
  Policy(Featurizer featurizer, PolicyHead head, ParamVector params);

  static Policy tabular_softmax(int num_states, int num_actions);
  static Policy tabular_gaussian(int num_states);
  static Policy mlp_softmax(int input_dim, int num_actions, std::vector<int> hidden,
                            std::uint64_t seed);
  static Policy mlp_gaussian(int input_dim, std::vector<int> hidden, std::uint64_t seed);
  // A freshly initialized policy suitable for the given environment.
  static Policy for_env(const Environment& env, std::uint64_t seed);

  static ParamLayout make_layout(const Featurizer& featurizer, const PolicyHead& head);

  const Featurizer& featurizer() const { return featurizer_; }
  const PolicyHead& head() const { return head_; }
  const ParamVector& params() const { return params_; }
  const ParamLayout& layout() const { return layout_; }
  Eigen::Index num_params() const { return params_.size(); }

  Policy with_params(ParamVector params) const;
  Policy with_normalizer(InputNormalizer normalizer) const;

  bool discrete() const { return !std::holds_alternative<GaussianHead>(head_); }
  bool tabular_features() const { return std::holds_alternative<OneHotFeatures>(featurizer_); }
  int num_actions() const;

  ActionDistribution distribution(const State& s) const { return distribution(s, params_); }
  ActionDistribution distribution(const State& s, const ParamVector& at) const;

  Action sample(const State& s, Rng& rng) const { return distribution(s).sample(rng); }
  double log_prob(const State& s, const Action& a) const { return log_prob(s, a, params_); }
  double log_prob(const State& s, const Action& a, const ParamVector& at) const;

  ParamVector log_prob_grad(const State& s, const Action& a) const {
    return log_prob_grad(s, a, params_);
  }
  ParamVector log_prob_grad(const State& s, const Action& a, const ParamVector& at) const;

  // Column k holds the score of discrete action k at `at`; one forward pass.
  Eigen::MatrixXd log_prob_grads_all(const State& s, const ParamVector& at) const;
  Eigen::MatrixXd log_prob_grads_all(const State& s) const { return log_prob_grads_all(s, params_); }

  // Finite action sets return every action; Gaussian heads return the m
  // quantiles at levels i / (m + 1).
  std::vector<Action> candidate_actions(const State& s, int m) const;

  // False when the head outputs at `at` are non-finite or any |logit| > 1e6.
  bool well_conditioned(const State& s, const ParamVector& at) const;

 private:
  struct Forward;
  Forward forward(const State& s, const ParamVector& at) const;
  void backprop(const Forward& f, const Eigen::VectorXd& dphi, const ParamVector& at,
                ParamVector& grad) const;
  void check_params(const ParamVector& at) const;

  Featurizer featurizer_;
  PolicyHead head_;
  ParamLayout layout_;
  ParamVector params_;
};

// Behavior policy used for initial off-policy data. Discrete heads mix in a
// uniform component with weight delta; Gaussian heads widen the stdev by
// a factor (1 + delta).
class PerturbedPolicy {
 public:
  PerturbedPolicy(Policy base, double delta);

  const Policy& base() const { return base_; }
  double delta() const { return delta_; }

  ActionDistribution distribution(const State& s) const;
  Action sample(const State& s, Rng& rng) const { return distribution(s).sample(rng); }
  double log_prob(const State& s, const Action& a) const { return distribution(s).log_prob(a); }

 private:
  Policy base_;
  double delta_;
};

PerturbedPolicy perturb_policy(const Policy& policy, double delta);

// Weight w = log(|A| / eps - |A| + 1); requires 0 < eps <= 1.
double epsilon_greedy_weight(int num_actions, double epsilon);
Policy epsilon_greedy_policy(const std::vector<int>& optimal_action, int num_actions,
                             double epsilon);

// Text snapshot with a versioned header; parameters use 17 significant digits
// so a write/read round trip is bit-exact.
void write_policy(std::ostream& os, const Policy& policy);
Policy read_policy(std::istream& is);
void save_policy(const std::filesystem::path& path, const Policy& policy);
Policy load_policy(const std::filesystem::path& path);

}  // namespace robust_collect
