#include "robust_collect/policies.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "robust_collect/errors.hpp"
#include "robust_collect/normal.hpp"

namespace robust_collect {
namespace {

constexpr double kNormalizerEps = 1e-8;
constexpr double kLogitLimit = 1e6;
constexpr double kInitSigmaWeight = 0.08;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

int feature_dim(const Featurizer& f) {
  return std::visit(Overloaded{[](const OneHotFeatures& o) { return o.num_states; },
                               [](const MlpFeatures& m) {
                                 return m.hidden.empty() ? m.input_dim : m.hidden.back();
                               }},
                    f);
}

using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ColMajorMap = Eigen::Map<const Eigen::MatrixXd>;

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

// ---------------------------------------------------------------------------
// Layout and normalizer

Eigen::Index ParamLayout::total() const {
  Eigen::Index n = 0;
  for (const auto& s : segments) n += s.size;
  return n;
}

const ParamSegment& ParamLayout::find(const std::string& name) const {
  for (const auto& s : segments) {
    if (s.name == name) return s;
  }
  throw InvalidArgument(fmt::format("no parameter segment named '{}'", name));
}

InputNormalizer InputNormalizer::identity(int dim) {
  InputNormalizer n;
  n.mean = Eigen::VectorXd::Zero(dim);
  n.var = Eigen::VectorXd::Ones(dim);
  return n;
}

void InputNormalizer::observe(const Eigen::VectorXd& x) {
  if (frozen) throw InvalidArgument("cannot update a frozen input normalizer");
  // Welford update; var holds the population variance.
  if (count == 0.0) {
    mean = x;
    var = Eigen::VectorXd::Zero(x.size());
    count = 1.0;
    return;
  }
  count += 1.0;
  const Eigen::VectorXd delta = x - mean;
  mean += delta / count;
  var += ((delta.array() * (x - mean).array()).matrix() - var) / count;
}

Eigen::VectorXd InputNormalizer::apply(const Eigen::VectorXd& x) const {
  return ((x - mean).array() / (var.array() + kNormalizerEps).sqrt()).matrix();
}

// ---------------------------------------------------------------------------
// ActionDistribution

ActionDistribution ActionDistribution::categorical(std::vector<double> probs) {
  if (probs.empty()) throw InvalidArgument("categorical distribution needs at least one action");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidArgument("categorical entries must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidArgument(fmt::format("categorical probabilities sum to {}", total));
  }
  ActionDistribution d;
  d.probs_ = std::move(probs);
  return d;
}

ActionDistribution ActionDistribution::gaussian(double mean, double stdev) {
  if (!(stdev > 0.0) || !std::isfinite(stdev) || !std::isfinite(mean)) {
    throw InvalidArgument(fmt::format("gaussian requires finite mean and stdev > 0 (got {}, {})",
                                      mean, stdev));
  }
  ActionDistribution d;
  d.mean_ = mean;
  d.stdev_ = stdev;
  return d;
}

Action ActionDistribution::sample(Rng& rng) const {
  if (!is_categorical()) return Action::continuous(mean_ + stdev_ * standard_normal(rng));
  const double u = uniform01(rng);
  double cum = 0.0;
  int last_positive = 0;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    if (probs_[i] <= 0.0) continue;
    cum += probs_[i];
    last_positive = static_cast<int>(i);
    if (u < cum) return Action::discrete(static_cast<int>(i));
  }
  return Action::discrete(last_positive);
}

double ActionDistribution::log_prob(const Action& a) const {
  if (is_categorical()) {
    if (!a.is_discrete() || a.index() < 0 || a.index() >= static_cast<int>(probs_.size())) {
      throw InvalidArgument("action outside categorical support");
    }
    const double p = probs_[static_cast<std::size_t>(a.index())];
    return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
  }
  if (a.is_discrete()) throw InvalidArgument("discrete action given to gaussian distribution");
  return normal_log_pdf(a.value(), mean_, stdev_);
}

// ---------------------------------------------------------------------------
// Policy

struct Policy::Forward {
  int state = -1;
  // acts[0] is the normalized input; acts[l + 1] = relu(pre[l]).
  std::vector<Eigen::VectorXd> acts;
  std::vector<Eigen::VectorXd> pre;
  Eigen::VectorXd logits;
  double mean = 0.0;
  double sigma_raw = 0.0;
  double sigma = 0.0;

  const Eigen::VectorXd& phi() const { return acts.back(); }
};

ParamLayout Policy::make_layout(const Featurizer& featurizer, const PolicyHead& head) {
  ParamLayout layout;
  Eigen::Index off = 0;
  auto add = [&](std::string name, Eigen::Index size) {
    layout.segments.push_back({std::move(name), off, size});
    off += size;
  };
  if (const auto* m = std::get_if<MlpFeatures>(&featurizer)) {
    if (std::holds_alternative<EpsilonGreedyHead>(head)) {
      throw InvalidArgument("epsilon-greedy head requires one-hot features");
    }
    int prev = m->input_dim;
    for (std::size_t l = 0; l < m->hidden.size(); ++l) {
      add(fmt::format("layer{}.weight", l), static_cast<Eigen::Index>(m->hidden[l]) * prev);
      add(fmt::format("layer{}.bias", l), m->hidden[l]);
      prev = m->hidden[l];
    }
  }
  const int f = feature_dim(featurizer);
  std::visit(Overloaded{[&](const SoftmaxHead& h) {
                          add("head.actions", static_cast<Eigen::Index>(h.num_actions) * f);
                        },
                        [&](const GaussianHead&) {
                          add("head.mean", f);
                          add("head.stdev", f);
                        },
                        [&](const EpsilonGreedyHead&) { add("head.w", 1); }},
             head);
  return layout;
}

Policy::Policy(Featurizer featurizer, PolicyHead head, ParamVector params)
    : featurizer_(std::move(featurizer)), head_(std::move(head)), params_(std::move(params)) {
  if (const auto* o = std::get_if<OneHotFeatures>(&featurizer_); o && o->num_states < 1) {
    throw InvalidArgument("one-hot featurizer needs at least one state");
  }
  if (const auto* m = std::get_if<MlpFeatures>(&featurizer_)) {
    if (m->input_dim < 1) throw InvalidArgument("mlp input_dim must be positive");
    for (int h : m->hidden) {
      if (h < 1) throw InvalidArgument("mlp hidden sizes must be positive");
    }
    if (m->normalizer.mean.size() != m->input_dim || m->normalizer.var.size() != m->input_dim) {
      throw InvalidArgument("input normalizer dimension mismatch");
    }
  }
  if (const auto* s = std::get_if<SoftmaxHead>(&head_); s && s->num_actions < 1) {
    throw InvalidArgument("softmax head needs at least one action");
  }
  if (const auto* e = std::get_if<EpsilonGreedyHead>(&head_)) {
    const auto* o = std::get_if<OneHotFeatures>(&featurizer_);
    if (e->num_actions < 1 || !o || static_cast<int>(e->optimal_action.size()) != o->num_states) {
      throw InvalidArgument("epsilon-greedy head needs one optimal action per state");
    }
    for (int a : e->optimal_action) {
      if (a < 0 || a >= e->num_actions) throw InvalidArgument("optimal action out of range");
    }
  }
  layout_ = make_layout(featurizer_, head_);
  check_params(params_);
  if (!params_.allFinite()) throw InvalidArgument("policy parameters must be finite");
}

void Policy::check_params(const ParamVector& at) const {
  if (at.size() != layout_.total()) {
    throw InvalidArgument(fmt::format("parameter vector has {} entries, layout expects {}",
                                      at.size(), layout_.total()));
  }
}

Policy Policy::tabular_softmax(int num_states, int num_actions) {
  const Featurizer f = OneHotFeatures{num_states};
  const PolicyHead h = SoftmaxHead{num_actions};
  return Policy(f, h, ParamVector::Zero(make_layout(f, h).total()));
}

Policy Policy::tabular_gaussian(int num_states) {
  const Featurizer f = OneHotFeatures{num_states};
  const PolicyHead h = GaussianHead{};
  ParamVector p = ParamVector::Zero(make_layout(f, h).total());
  p.tail(num_states).setOnes();
  return Policy(f, h, std::move(p));
}

namespace {

ParamVector init_mlp_params(const MlpFeatures& m, const ParamLayout& layout, std::uint64_t seed) {
  ParamVector p = ParamVector::Zero(layout.total());
  Rng rng(seed);
  int prev = m.input_dim;
  for (std::size_t l = 0; l < m.hidden.size(); ++l) {
    const auto& seg = layout.find(fmt::format("layer{}.weight", l));
    const double bound = 1.0 / std::sqrt(static_cast<double>(prev));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < seg.size; ++i) p[seg.offset + i] = u(rng);
    prev = m.hidden[l];
  }
  return p;
}

}  // namespace

Policy Policy::mlp_softmax(int input_dim, int num_actions, std::vector<int> hidden,
                           std::uint64_t seed) {
  MlpFeatures m{input_dim, std::move(hidden), InputNormalizer::identity(input_dim)};
  const PolicyHead h = SoftmaxHead{num_actions};
  const ParamLayout layout = make_layout(m, h);
  ParamVector p = init_mlp_params(m, layout, seed);
  return Policy(std::move(m), h, std::move(p));
}

Policy Policy::mlp_gaussian(int input_dim, std::vector<int> hidden, std::uint64_t seed) {
  MlpFeatures m{input_dim, std::move(hidden), InputNormalizer::identity(input_dim)};
  const PolicyHead h = GaussianHead{};
  const ParamLayout layout = make_layout(m, h);
  ParamVector p = init_mlp_params(m, layout, seed);
  const auto& sd = layout.find("head.stdev");
  p.segment(sd.offset, sd.size).setConstant(kInitSigmaWeight);
  return Policy(std::move(m), h, std::move(p));
}

Policy Policy::for_env(const Environment& env, std::uint64_t seed) {
  if (env.tabular()) return tabular_softmax(env.num_states(), env.num_actions());
  if (env.discrete_actions()) return mlp_softmax(env.observation_dim(), env.num_actions(), {64, 64}, seed);
  return mlp_gaussian(env.observation_dim(), {64, 64}, seed);
}

Policy Policy::with_params(ParamVector params) const {
  return Policy(featurizer_, head_, std::move(params));
}

Policy Policy::with_normalizer(InputNormalizer normalizer) const {
  auto* m = std::get_if<MlpFeatures>(&featurizer_);
  if (!m) throw InvalidArgument("with_normalizer requires an mlp featurizer");
  MlpFeatures copy = *m;
  copy.normalizer = std::move(normalizer);
  return Policy(std::move(copy), head_, params_);
}

int Policy::num_actions() const {
  return std::visit(Overloaded{[](const SoftmaxHead& h) { return h.num_actions; },
                               [](const GaussianHead&) { return 0; },
                               [](const EpsilonGreedyHead& h) { return h.num_actions; }},
                    head_);
}

Policy::Forward Policy::forward(const State& s, const ParamVector& at) const {
  check_params(at);
  Forward f;
  const int fdim = feature_dim(featurizer_);

  if (const auto* o = std::get_if<OneHotFeatures>(&featurizer_)) {
    f.state = state_index(s);
    if (f.state < 0 || f.state >= o->num_states) {
      throw InvalidArgument(fmt::format("state index {} outside one-hot range", f.state));
    }
  } else {
    const auto& m = std::get<MlpFeatures>(featurizer_);
    const std::vector<double> obs = observation(s);
    if (static_cast<int>(obs.size()) != m.input_dim) {
      throw InvalidArgument("observation size does not match mlp input");
    }
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(obs.data(), m.input_dim);
    f.acts.push_back(m.normalizer.apply(x));
    int prev = m.input_dim;
    for (std::size_t l = 0; l < m.hidden.size(); ++l) {
      const auto& ws = layout_.segments[2 * l];
      const auto& bs = layout_.segments[2 * l + 1];
      const ColMajorMap w(at.data() + ws.offset, m.hidden[l], prev);
      Eigen::VectorXd z = w * f.acts.back() + at.segment(bs.offset, bs.size);
      f.acts.push_back(z.cwiseMax(0.0));
      f.pre.push_back(std::move(z));
      prev = m.hidden[l];
    }
  }

  std::visit(
      Overloaded{
          [&](const SoftmaxHead& h) {
            const auto& seg = layout_.segments.back();
            const RowMajorMap w(at.data() + seg.offset, h.num_actions, fdim);
            f.logits = f.state >= 0 ? Eigen::VectorXd(w.col(f.state)) : Eigen::VectorXd(w * f.phi());
          },
          [&](const GaussianHead&) {
            const auto& ms = layout_.segments[layout_.segments.size() - 2];
            const auto& ss = layout_.segments.back();
            if (f.state >= 0) {
              f.mean = at[ms.offset + f.state];
              f.sigma_raw = at[ss.offset + f.state];
            } else {
              f.mean = at.segment(ms.offset, ms.size).dot(f.phi());
              f.sigma_raw = at.segment(ss.offset, ss.size).dot(f.phi());
            }
            f.sigma = std::max(f.sigma_raw, kMinStdev);
          },
          [&](const EpsilonGreedyHead& h) {
            f.logits = Eigen::VectorXd::Zero(h.num_actions);
            f.logits[h.optimal_action[static_cast<std::size_t>(f.state)]] = at[layout_.segments.back().offset];
          }},
      head_);
  return f;
}

ActionDistribution Policy::distribution(const State& s, const ParamVector& at) const {
  const Forward f = forward(s, at);
  if (!discrete()) {
    if (!std::isfinite(f.mean) || !std::isfinite(f.sigma)) {
      throw DivergenceError("non-finite gaussian policy output");
    }
    return ActionDistribution::gaussian(f.mean, f.sigma);
  }
  if (!f.logits.allFinite()) throw DivergenceError("non-finite policy logits");
  const double lse = log_sum_exp(f.logits);
  std::vector<double> probs(static_cast<std::size_t>(f.logits.size()));
  double total = 0.0;
  for (Eigen::Index i = 0; i < f.logits.size(); ++i) {
    probs[static_cast<std::size_t>(i)] = std::exp(f.logits[i] - lse);
    total += probs[static_cast<std::size_t>(i)];
  }
  for (double& p : probs) p /= total;
  return ActionDistribution::categorical(std::move(probs));
}

double Policy::log_prob(const State& s, const Action& a, const ParamVector& at) const {
  const Forward f = forward(s, at);
  if (!discrete()) {
    if (a.is_discrete()) throw InvalidArgument("discrete action given to gaussian policy");
    return normal_log_pdf(a.value(), f.mean, f.sigma);
  }
  if (!a.is_discrete() || a.index() < 0 || a.index() >= f.logits.size()) {
    throw InvalidArgument("action outside policy support");
  }
  return f.logits[a.index()] - log_sum_exp(f.logits);
}

void Policy::backprop(const Forward& f, const Eigen::VectorXd& dphi, const ParamVector& at,
                      ParamVector& grad) const {
  const auto* m = std::get_if<MlpFeatures>(&featurizer_);
  if (!m || m->hidden.empty()) return;
  Eigen::VectorXd delta = dphi;
  for (std::size_t li = m->hidden.size(); li-- > 0;) {
    delta = (f.pre[li].array() > 0.0).select(delta, 0.0);
    const auto& ws = layout_.segments[2 * li];
    const auto& bs = layout_.segments[2 * li + 1];
    const Eigen::VectorXd& input = f.acts[li];
    Eigen::Map<Eigen::MatrixXd> gw(grad.data() + ws.offset, delta.size(), input.size());
    gw.noalias() += delta * input.transpose();
    grad.segment(bs.offset, bs.size) += delta;
    if (li > 0) {
      const ColMajorMap w(at.data() + ws.offset, delta.size(), input.size());
      delta = w.transpose() * delta;
    }
  }
}

ParamVector Policy::log_prob_grad(const State& s, const Action& a, const ParamVector& at) const {
  const Forward f = forward(s, at);
  ParamVector grad = ParamVector::Zero(at.size());
  const int fdim = feature_dim(featurizer_);
  Eigen::VectorXd dphi;

  std::visit(
      Overloaded{
          [&](const SoftmaxHead& h) {
            if (!a.is_discrete() || a.index() < 0 || a.index() >= h.num_actions) {
              throw InvalidArgument("action outside policy support");
            }
            Eigen::VectorXd dlogits = -(f.logits.array() - log_sum_exp(f.logits)).exp().matrix();
            dlogits[a.index()] += 1.0;
            const auto& seg = layout_.segments.back();
            Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> gw(
                grad.data() + seg.offset, h.num_actions, fdim);
            if (f.state >= 0) {
              gw.col(f.state) = dlogits;
            } else {
              gw.noalias() = dlogits * f.phi().transpose();
              const RowMajorMap w(at.data() + seg.offset, h.num_actions, fdim);
              dphi = w.transpose() * dlogits;
            }
          },
          [&](const GaussianHead&) {
            if (a.is_discrete()) throw InvalidArgument("discrete action given to gaussian policy");
            const double diff = a.value() - f.mean;
            const double dmean = diff / (f.sigma * f.sigma);
            const double dsigma =
                f.sigma_raw > kMinStdev ? diff * diff / (f.sigma * f.sigma * f.sigma) - 1.0 / f.sigma : 0.0;
            const auto& ms = layout_.segments[layout_.segments.size() - 2];
            const auto& ss = layout_.segments.back();
            if (f.state >= 0) {
              grad[ms.offset + f.state] = dmean;
              grad[ss.offset + f.state] = dsigma;
            } else {
              grad.segment(ms.offset, ms.size) = dmean * f.phi();
              grad.segment(ss.offset, ss.size) = dsigma * f.phi();
              dphi = dmean * at.segment(ms.offset, ms.size) + dsigma * at.segment(ss.offset, ss.size);
            }
          },
          [&](const EpsilonGreedyHead& h) {
            if (!a.is_discrete() || a.index() < 0 || a.index() >= h.num_actions) {
              throw InvalidArgument("action outside policy support");
            }
            const int best = h.optimal_action[static_cast<std::size_t>(f.state)];
            const double p_best = std::exp(f.logits[best] - log_sum_exp(f.logits));
            grad[layout_.segments.back().offset] = (a.index() == best ? 1.0 : 0.0) - p_best;
          }},
      head_);

  if (dphi.size() > 0) backprop(f, dphi, at, grad);
  if (!grad.allFinite()) throw DivergenceError("non-finite log-likelihood gradient");
  return grad;
}

Eigen::MatrixXd Policy::log_prob_grads_all(const State& s, const ParamVector& at) const {
  if (!discrete()) throw InvalidArgument("log_prob_grads_all requires a finite action set");
  const int n = num_actions();
  Eigen::MatrixXd out(at.size(), n);
  if (std::holds_alternative<OneHotFeatures>(featurizer_)) {
    for (int k = 0; k < n; ++k) out.col(k) = log_prob_grad(s, Action::discrete(k), at);
    return out;
  }
  // Shared forward pass; only the head gradient and backprop differ per action.
  const auto& h = std::get<SoftmaxHead>(head_);
  const Forward f = forward(s, at);
  const int fdim = feature_dim(featurizer_);
  const auto& seg = layout_.segments.back();
  const RowMajorMap w(at.data() + seg.offset, h.num_actions, fdim);
  const Eigen::VectorXd probs = (f.logits.array() - log_sum_exp(f.logits)).exp().matrix();
  for (int k = 0; k < n; ++k) {
    ParamVector grad = ParamVector::Zero(at.size());
    Eigen::VectorXd dlogits = -probs;
    dlogits[k] += 1.0;
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> gw(
        grad.data() + seg.offset, h.num_actions, fdim);
    gw.noalias() = dlogits * f.phi().transpose();
    backprop(f, w.transpose() * dlogits, at, grad);
    out.col(k) = grad;
  }
  if (!out.allFinite()) throw DivergenceError("non-finite log-likelihood gradient");
  return out;
}

std::vector<Action> Policy::candidate_actions(const State& s, int m) const {
  std::vector<Action> out;
  if (discrete()) {
    const int n = num_actions();
    out.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) out.push_back(Action::discrete(k));
    return out;
  }
  if (m < 1) throw InvalidArgument("candidate_actions needs m >= 1 for continuous actions");
  const ActionDistribution d = distribution(s);
  out.reserve(static_cast<std::size_t>(m));
  for (int i = 1; i <= m; ++i) {
    // Mirror the upper half so odd m is exactly symmetric about the mean.
    double z = 0.0;
    if (2 * i < m + 1) {
      z = normal_quantile(static_cast<double>(i) / (m + 1));
    } else if (2 * i > m + 1) {
      z = -normal_quantile(static_cast<double>(m + 1 - i) / (m + 1));
    }
    out.push_back(Action::continuous(d.mean() + d.stdev() * z));
  }
  return out;
}

bool Policy::well_conditioned(const State& s, const ParamVector& at) const {
  if (!at.allFinite()) return false;
  const Forward f = forward(s, at);
  if (discrete()) return f.logits.allFinite() && f.logits.cwiseAbs().maxCoeff() <= kLogitLimit;
  return std::isfinite(f.mean) && std::isfinite(f.sigma) && std::abs(f.mean) <= kLogitLimit &&
         f.sigma <= kLogitLimit;
}

// ---------------------------------------------------------------------------
// Perturbed and epsilon-greedy policies

PerturbedPolicy::PerturbedPolicy(Policy base, double delta) : base_(std::move(base)), delta_(delta) {
  if (base_.discrete()) {
    if (!(delta_ > 0.0 && delta_ <= 1.0)) {
      throw InvalidArgument(fmt::format("discrete perturbation requires delta in (0, 1], got {}", delta_));
    }
  } else if (!(delta_ > 0.0) || !std::isfinite(delta_)) {
    throw InvalidArgument(fmt::format("gaussian perturbation requires delta > 0, got {}", delta_));
  }
}

ActionDistribution PerturbedPolicy::distribution(const State& s) const {
  const ActionDistribution e = base_.distribution(s);
  if (!e.is_categorical()) return ActionDistribution::gaussian(e.mean(), (1.0 + delta_) * e.stdev());
  std::vector<double> probs = e.probs();
  const double uniform = 1.0 / static_cast<double>(probs.size());
  for (double& p : probs) p = (1.0 - delta_) * p + delta_ * uniform;
  return ActionDistribution::categorical(std::move(probs));
}

PerturbedPolicy perturb_policy(const Policy& policy, double delta) {
  return PerturbedPolicy(policy, delta);
}

double epsilon_greedy_weight(int num_actions, double epsilon) {
  if (num_actions < 1) throw InvalidArgument("epsilon-greedy policy needs at least one action");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) {
    throw InvalidArgument(fmt::format(
        "epsilon must lie in (0, 1] (got {}); use a deterministic policy for epsilon = 0", epsilon));
  }
  const double n = num_actions;
  return std::log(n / epsilon - n + 1.0);
}

Policy epsilon_greedy_policy(const std::vector<int>& optimal_action, int num_actions,
                             double epsilon) {
  const double w = epsilon_greedy_weight(num_actions, epsilon);
  ParamVector p(1);
  p[0] = w;
  return Policy(OneHotFeatures{static_cast<int>(optimal_action.size())},
                EpsilonGreedyHead{num_actions, optimal_action}, std::move(p));
}

// ---------------------------------------------------------------------------
// Snapshot I/O

namespace {

constexpr std::string_view kSnapshotMagic = "robust_collect-policy";
constexpr int kSnapshotVersion = 1;

void write_vector(std::ostream& os, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) os << fmt::format("{}{:.17g}", i ? " " : "", v[i]);
  os << '\n';
}

template <class T>
T expect(std::istream& is, const char* what) {
  T v{};
  if (!(is >> v)) throw ConfigError(fmt::format("policy snapshot: failed to read {}", what));
  return v;
}

void expect_word(std::istream& is, std::string_view word) {
  const auto got = expect<std::string>(is, "keyword");
  if (got != word) {
    throw ConfigError(fmt::format("policy snapshot: expected '{}', found '{}'", word, got));
  }
}

Eigen::VectorXd read_vector(std::istream& is, Eigen::Index n, const char* what) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = expect<double>(is, what);
  return v;
}

}  // namespace

void write_policy(std::ostream& os, const Policy& policy) {
  os << kSnapshotMagic << ' ' << kSnapshotVersion << '\n';
  std::visit(Overloaded{[&](const OneHotFeatures& o) { os << "featurizer onehot " << o.num_states << '\n'; },
                        [&](const MlpFeatures& m) {
                          os << "featurizer mlp " << m.input_dim << ' ' << m.hidden.size();
                          for (int h : m.hidden) os << ' ' << h;
                          os << '\n';
                          os << fmt::format("normalizer {} {:.17g}\n", m.normalizer.frozen ? 1 : 0,
                                            m.normalizer.count);
                          write_vector(os, m.normalizer.mean);
                          write_vector(os, m.normalizer.var);
                        }},
             policy.featurizer());
  std::visit(Overloaded{[&](const SoftmaxHead& h) { os << "head softmax " << h.num_actions << '\n'; },
                        [&](const GaussianHead&) { os << "head gaussian\n"; },
                        [&](const EpsilonGreedyHead& h) {
                          os << "head epsilon_greedy " << h.num_actions << ' '
                             << h.optimal_action.size();
                          for (int a : h.optimal_action) os << ' ' << a;
                          os << '\n';
                        }},
             policy.head());
  os << "layout " << policy.layout().segments.size() << '\n';
  for (const auto& s : policy.layout().segments) {
    os << "segment " << s.name << ' ' << s.offset << ' ' << s.size << '\n';
  }
  os << "params " << policy.num_params() << '\n';
  for (Eigen::Index i = 0; i < policy.num_params(); ++i) {
    os << fmt::format("{:.17g}\n", policy.params()[i]);
  }
}

Policy read_policy(std::istream& is) {
  expect_word(is, kSnapshotMagic);
  const int version = expect<int>(is, "version");
  if (version != kSnapshotVersion) {
    throw ConfigError(fmt::format("policy snapshot: unsupported version {}", version));
  }
  expect_word(is, "featurizer");
  Featurizer featurizer;
  const auto fkind = expect<std::string>(is, "featurizer kind");
  if (fkind == "onehot") {
    featurizer = OneHotFeatures{expect<int>(is, "num_states")};
  } else if (fkind == "mlp") {
    MlpFeatures m;
    m.input_dim = expect<int>(is, "input_dim");
    const auto layers = expect<std::size_t>(is, "hidden count");
    m.hidden.clear();
    for (std::size_t i = 0; i < layers; ++i) m.hidden.push_back(expect<int>(is, "hidden size"));
    expect_word(is, "normalizer");
    m.normalizer.frozen = expect<int>(is, "frozen flag") != 0;
    m.normalizer.count = expect<double>(is, "normalizer count");
    m.normalizer.mean = read_vector(is, m.input_dim, "normalizer mean");
    m.normalizer.var = read_vector(is, m.input_dim, "normalizer var");
    featurizer = std::move(m);
  } else {
    throw ConfigError(fmt::format("policy snapshot: unknown featurizer '{}'", fkind));
  }

  expect_word(is, "head");
  PolicyHead head;
  const auto hkind = expect<std::string>(is, "head kind");
  if (hkind == "softmax") {
    head = SoftmaxHead{expect<int>(is, "num_actions")};
  } else if (hkind == "gaussian") {
    head = GaussianHead{};
  } else if (hkind == "epsilon_greedy") {
    EpsilonGreedyHead h;
    h.num_actions = expect<int>(is, "num_actions");
    const auto n = expect<std::size_t>(is, "state count");
    for (std::size_t i = 0; i < n; ++i) h.optimal_action.push_back(expect<int>(is, "optimal action"));
    head = std::move(h);
  } else {
    throw ConfigError(fmt::format("policy snapshot: unknown head '{}'", hkind));
  }

  expect_word(is, "layout");
  ParamLayout layout;
  const auto nseg = expect<std::size_t>(is, "segment count");
  for (std::size_t i = 0; i < nseg; ++i) {
    expect_word(is, "segment");
    ParamSegment seg;
    seg.name = expect<std::string>(is, "segment name");
    seg.offset = expect<Eigen::Index>(is, "segment offset");
    seg.size = expect<Eigen::Index>(is, "segment size");
    layout.segments.push_back(std::move(seg));
  }
  if (!(layout == Policy::make_layout(featurizer, head))) {
    throw ConfigError("policy snapshot: layout does not match featurizer/head");
  }
  expect_word(is, "params");
  const auto n = expect<Eigen::Index>(is, "param count");
  if (n != layout.total()) throw ConfigError("policy snapshot: parameter count mismatch");
  return Policy(std::move(featurizer), std::move(head), read_vector(is, n, "parameter"));
}

void save_policy(const std::filesystem::path& path, const Policy& policy) {
  std::ofstream os(path);
  if (!os) throw ConfigError(fmt::format("cannot write policy snapshot '{}'", path.string()));
  write_policy(os, policy);
}

Policy load_policy(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(fmt::format("cannot open policy snapshot '{}'", path.string()));
  return read_policy(is);
}

}  // namespace robust_collect
