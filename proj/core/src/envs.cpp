#include "robust_collect/envs.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "robust_collect/errors.hpp"

namespace robust_collect {
namespace {

constexpr double kGravity = 9.8;
constexpr double kCartMass = 1.0;
constexpr double kPoleMass = 0.1;
constexpr double kTotalMass = kCartMass + kPoleMass;
constexpr double kPoleHalfLength = 0.5;
constexpr double kPoleMassLength = kPoleMass * kPoleHalfLength;
constexpr double kForceMag = 10.0;
constexpr double kTau = 0.02;

double grid_reward(const GridCell& c) {
  if (c == kGridGoal) return 10.0;
  if (c == kGridTrick) return 1.0;
  if (c == kGridTrap) return -10.0;
  return -1.0;
}

GridCell grid_move(const GridCell& c, int a) {
  GridCell n = c;
  switch (static_cast<GridMove>(a)) {
    case GridMove::Left: n.x -= 1; break;
    case GridMove::Right: n.x += 1; break;
    case GridMove::Up: n.y += 1; break;
    case GridMove::Down: n.y -= 1; break;
  }
  if (n.x < 0 || n.x >= kGridSize || n.y < 0 || n.y >= kGridSize) return c;
  return n;
}

CartState cart_dynamics(const CartState& s, double force) {
  const double cos_t = std::cos(s.theta);
  const double sin_t = std::sin(s.theta);
  const double temp = (force + kPoleMassLength * s.theta_dot * s.theta_dot * sin_t) / kTotalMass;
  const double theta_acc = (kGravity * sin_t - cos_t * temp) /
                           (kPoleHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / kTotalMass));
  const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;
  CartState n;
  n.x = s.x + kTau * s.x_dot;
  n.x_dot = s.x_dot + kTau * x_acc;
  n.theta = s.theta + kTau * s.theta_dot;
  n.theta_dot = s.theta_dot + kTau * theta_acc;
  return n;
}

}  // namespace

std::string_view to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::MultiBandit: return "MultiBandit";
    case EnvKind::GridWorld: return "GridWorld";
    case EnvKind::CartPole: return "CartPole";
    case EnvKind::CartPoleContinuous: return "CartPoleContinuous";
  }
  return "?";
}

EnvKind parse_env_kind(std::string_view name) {
  for (EnvKind k : {EnvKind::MultiBandit, EnvKind::GridWorld, EnvKind::CartPole,
                    EnvKind::CartPoleContinuous}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError(fmt::format("unknown environment kind '{}'", name));
}

EnvSpec EnvSpec::defaults(EnvKind kind) {
  EnvSpec s;
  s.kind = kind;
  switch (kind) {
    case EnvKind::MultiBandit:
      s.gamma = 1.0;
      s.max_steps = 1;
      break;
    case EnvKind::GridWorld:
      s.gamma = 1.0;
      s.max_steps = 100;
      s.reward_scale_factor = 0.0;
      break;
    case EnvKind::CartPole:
    case EnvKind::CartPoleContinuous:
      s.gamma = 0.99;
      s.max_steps = 200;
      break;
  }
  return s;
}

void validate(const EnvSpec& s) {
  if (!(s.gamma > 0.0 && s.gamma <= 1.0)) {
    throw InvalidArgument(fmt::format("gamma must lie in (0, 1], got {}", s.gamma));
  }
  if (s.max_steps < 1) throw InvalidArgument("max_steps must be >= 1");
  if (!(s.reward_mean_factor >= 0.0) || !(s.reward_scale_factor >= 0.0)) {
    throw InvalidArgument("reward factors must be non-negative");
  }
  if (s.reward_normalizer && !(*s.reward_normalizer > 0.0 && std::isfinite(*s.reward_normalizer))) {
    throw InvalidArgument("reward_normalizer must be a positive finite number");
  }
  if (s.kind == EnvKind::MultiBandit) {
    if (s.bandit_arms < 1) throw InvalidArgument("bandit_arms must be positive");
    if (static_cast<int>(s.bandit_means.size()) != s.bandit_arms ||
        static_cast<int>(s.bandit_scales.size()) != s.bandit_arms) {
      throw InvalidArgument(fmt::format(
          "bandit vectors inconsistent: arms={} means={} scales={}", s.bandit_arms,
          s.bandit_means.size(), s.bandit_scales.size()));
    }
    for (double sc : s.bandit_scales) {
      if (!(sc >= 0.0) || !std::isfinite(sc)) throw InvalidArgument("bandit scales must be >= 0");
    }
    for (double m : s.bandit_means) {
      if (!std::isfinite(m)) throw InvalidArgument("bandit means must be finite");
    }
  }
}

Environment::Environment(EnvSpec spec) : spec_(std::move(spec)) { validate(spec_); }

Environment make_env(const EnvSpec& spec) { return Environment(spec); }

int Environment::num_actions() const {
  switch (spec_.kind) {
    case EnvKind::MultiBandit: return spec_.bandit_arms;
    case EnvKind::GridWorld: return 4;
    case EnvKind::CartPole: return 2;
    case EnvKind::CartPoleContinuous: return 0;
  }
  return 0;
}

int Environment::num_states() const {
  switch (spec_.kind) {
    case EnvKind::MultiBandit: return 1;
    case EnvKind::GridWorld: return kGridSize * kGridSize;
    default: throw InvalidArgument("num_states is only defined for tabular domains");
  }
}

int Environment::observation_dim() const { return tabular() ? 1 : 4; }

double Environment::emit(double raw) const {
  return spec_.reward_normalizer ? raw / *spec_.reward_normalizer : raw;
}

Environment Environment::with_normalizer(std::optional<double> normalizer) const {
  EnvSpec s = spec_;
  s.reward_normalizer = normalizer;
  return Environment(std::move(s));
}

State Environment::reset(Rng& rng) const {
  State s;
  switch (spec_.kind) {
    case EnvKind::MultiBandit: s.value = BanditUnit{}; break;
    case EnvKind::GridWorld: s.value = GridCell{0, 0}; break;
    case EnvKind::CartPole:
    case EnvKind::CartPoleContinuous: {
      std::uniform_real_distribution<double> u(-kCartPoleInitBound, kCartPoleInitBound);
      CartState c;
      c.x = u(rng);
      c.x_dot = u(rng);
      c.theta = u(rng);
      c.theta_dot = u(rng);
      s.value = c;
      break;
    }
  }
  return s;
}

StepOutcome Environment::step(const State& state, const Action& action, Rng& rng) const {
  if (state.terminal) throw InvalidArgument("step called on a terminal state");
  if (discrete_actions()) {
    if (!action.is_discrete() || action.index() < 0 || action.index() >= num_actions()) {
      throw InvalidArgument(fmt::format("action {} out of range for {}", action_repr(action),
                                        to_string(spec_.kind)));
    }
  } else if (action.is_discrete() || !(std::abs(action.value()) <= 1.0)) {
    throw InvalidArgument(fmt::format("continuous action {} outside [-1, 1]", action_repr(action)));
  }

  StepOutcome out;
  out.next_state = state;
  out.next_state.t = state.t + 1;
  double raw = 0.0;

  switch (spec_.kind) {
    case EnvKind::MultiBandit: {
      const auto a = static_cast<std::size_t>(action.index());
      const double mean = spec_.bandit_means[a] * spec_.reward_mean_factor;
      const double stdev = spec_.bandit_scales[a] * spec_.reward_scale_factor;
      raw = stdev > 0.0 ? mean + stdev * standard_normal(rng) : mean;
      out.done = true;
      break;
    }
    case EnvKind::GridWorld: {
      const auto& cell = std::get<GridCell>(state.value);
      const GridCell next = grid_move(cell, action.index());
      // Bumping into a wall keeps the agent in place at the ordinary step cost.
      raw = next == cell ? -1.0 : grid_reward(next);
      raw *= spec_.reward_mean_factor;
      if (spec_.reward_scale_factor > 0.0) {
        raw += std::uniform_real_distribution<double>(-spec_.reward_scale_factor,
                                                      spec_.reward_scale_factor)(rng);
      }
      out.next_state.value = next;
      out.done = next == kGridGoal;
      break;
    }
    case EnvKind::CartPole:
    case EnvKind::CartPoleContinuous: {
      const auto& cart = std::get<CartState>(state.value);
      const double force = spec_.kind == EnvKind::CartPole
                               ? (action.index() == 1 ? kForceMag : -kForceMag)
                               : action.value() * kForceMag;
      const CartState next = cart_dynamics(cart, force);
      raw = 1.0;
      out.next_state.value = next;
      out.done = std::abs(next.x) > kCartPoleXLimit || std::abs(next.theta) > kCartPoleThetaLimit;
      break;
    }
  }
  if (out.next_state.t >= spec_.max_steps) out.done = true;
  out.next_state.terminal = out.done;
  out.reward = emit(raw);
  return out;
}

int state_index(const State& state) {
  if (std::holds_alternative<BanditUnit>(state.value)) return 0;
  if (const auto* g = std::get_if<GridCell>(&state.value)) return g->x + kGridSize * g->y;
  throw InvalidArgument("state_index called on a continuous state");
}

std::vector<double> observation(const State& state) {
  if (const auto* c = std::get_if<CartState>(&state.value)) {
    return {c->x, c->x_dot, c->theta, c->theta_dot};
  }
  return {static_cast<double>(state_index(state))};
}

std::string state_repr(const State& state) {
  if (std::holds_alternative<BanditUnit>(state.value)) return "-";
  if (const auto* g = std::get_if<GridCell>(&state.value)) return fmt::format("{},{}", g->x, g->y);
  const auto& c = std::get<CartState>(state.value);
  return fmt::format("{:.17g},{:.17g},{:.17g},{:.17g}", c.x, c.x_dot, c.theta, c.theta_dot);
}

std::string action_repr(const Action& action) {
  return action.is_discrete() ? fmt::format("{}", action.index())
                              : fmt::format("{:.17g}", action.value());
}

void draw_default_bandit(EnvSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> mean(0.5, 1.0);
  std::uniform_real_distribution<double> scale(0.5, 1.5);
  spec.bandit_means.resize(static_cast<std::size_t>(spec.bandit_arms));
  spec.bandit_scales.resize(static_cast<std::size_t>(spec.bandit_arms));
  for (auto& m : spec.bandit_means) m = mean(rng);
  for (auto& s : spec.bandit_scales) s = scale(rng);
}

std::vector<int> optimal_actions(const Environment& env) {
  const EnvSpec& spec = env.spec();
  if (spec.kind == EnvKind::MultiBandit) {
    const auto it = std::max_element(spec.bandit_means.begin(), spec.bandit_means.end());
    return {static_cast<int>(it - spec.bandit_means.begin())};
  }
  if (spec.kind != EnvKind::GridWorld) {
    throw InvalidArgument("optimal_actions is only defined for tabular domains");
  }
  // Value iteration over the deterministic grid; reward noise has zero mean so
  // it does not change the argmax. A discount below one breaks the tie
  // between heading to the goal and cycling through the trick cell, which a
  // stationary greedy policy would otherwise follow forever.
  const int n = kGridSize * kGridSize;
  std::vector<double> value(static_cast<std::size_t>(n), 0.0);
  std::vector<int> best(static_cast<std::size_t>(n), 0);
  auto cell_of = [](int i) { return GridCell{i % kGridSize, i / kGridSize}; };
  const double gamma = std::min(spec.gamma, 0.99);
  for (int iter = 0; iter < 2000; ++iter) {
    std::vector<double> next(value.size(), 0.0);
    for (int i = 0; i < n; ++i) {
      const GridCell c = cell_of(i);
      if (c == kGridGoal) continue;
      double top = -1e300;
      for (int a = 0; a < 4; ++a) {
        const GridCell nc = grid_move(c, a);
        const double r = (nc == c ? -1.0 : grid_reward(nc)) * spec.reward_mean_factor;
        const double q = r + gamma * (nc == kGridGoal ? 0.0 : value[static_cast<std::size_t>(
                                                                    nc.x + kGridSize * nc.y)]);
        if (q > top + 1e-12) {
          top = q;
          best[static_cast<std::size_t>(i)] = a;
        }
      }
      next[static_cast<std::size_t>(i)] = top;
    }
    value = std::move(next);
  }
  return best;
}

}  // namespace robust_collect
