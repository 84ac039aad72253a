#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "robust_collect/rng.hpp"

namespace robust_collect {

enum class EnvKind { MultiBandit, GridWorld, CartPole, CartPoleContinuous };

std::string_view to_string(EnvKind kind);
// Throws ConfigError for an unknown name.
EnvKind parse_env_kind(std::string_view name);

struct EnvSpec {
  EnvKind kind = EnvKind::MultiBandit;
  double gamma = 1.0;
  int max_steps = 1;
  double reward_mean_factor = 1.0;
  // MultiBandit: multiplier on every arm's stdev.
  // GridWorld: half-width of the uniform noise added to each reward (0 = off).
  double reward_scale_factor = 1.0;
  int bandit_arms = 30;
  std::vector<double> bandit_means;
  std::vector<double> bandit_scales;
  // Emitted rewards are divided by this value when set.
  std::optional<double> reward_normalizer;

  // Domain defaults: horizon, discount and identity factor values.
  static EnvSpec defaults(EnvKind kind);
};

// Throws InvalidArgument when the EnvSpec invariants do not hold.
void validate(const EnvSpec& spec);

struct BanditUnit {
  bool operator==(const BanditUnit&) const = default;
};

struct GridCell {
  int x = 0;
  int y = 0;
  bool operator==(const GridCell&) const = default;
};

struct CartState {
  double x = 0.0;
  double x_dot = 0.0;
  double theta = 0.0;
  double theta_dot = 0.0;
  bool operator==(const CartState&) const = default;
};

struct State {
  std::variant<BanditUnit, GridCell, CartState> value;
  int t = 0;  // steps already taken in the current episode
  bool terminal = false;

  bool operator==(const State&) const = default;
};

// Discrete action index or continuous scalar action.
class Action {
 public:
  Action() = default;
  static Action discrete(int index) { return Action(Storage{std::in_place_index<0>, index}); }
  static Action continuous(double value) { return Action(Storage{std::in_place_index<1>, value}); }

  bool is_discrete() const { return v_.index() == 0; }
  int index() const { return std::get<0>(v_); }
  double value() const { return std::get<1>(v_); }

  bool operator==(const Action&) const = default;
  auto operator<=>(const Action&) const = default;

 private:
  using Storage = std::variant<int, double>;
  explicit Action(Storage v) : v_(v) {}
  Storage v_{std::in_place_index<0>, 0};
};

struct StepOutcome {
  State next_state;
  double reward = 0.0;
  bool done = false;
};

enum class GridMove { Left = 0, Right = 1, Up = 2, Down = 3 };

inline constexpr int kGridSize = 4;
inline constexpr GridCell kGridGoal{3, 3};
inline constexpr GridCell kGridTrick{1, 3};
inline constexpr GridCell kGridTrap{1, 1};

inline constexpr double kCartPoleThetaLimit = 15.0 * 3.14159265358979323846 / 180.0;
inline constexpr double kCartPoleXLimit = 2.4;
inline constexpr double kCartPoleInitBound = 0.05;

// Immutable simulator description. All mutation flows through the explicit
// (state, rng) arguments, so one instance can be shared by concurrent trials.
class Environment {
 public:
  explicit Environment(EnvSpec spec);

  const EnvSpec& spec() const { return spec_; }
  EnvKind kind() const { return spec_.kind; }
  double gamma() const { return spec_.gamma; }
  int max_steps() const { return spec_.max_steps; }

  bool discrete_actions() const { return spec_.kind != EnvKind::CartPoleContinuous; }
  bool tabular() const {
    return spec_.kind == EnvKind::MultiBandit || spec_.kind == EnvKind::GridWorld;
  }
  // 0 for the continuous-action domain.
  int num_actions() const;
  // Number of discrete states (tabular domains only).
  int num_states() const;
  // Length of the raw observation vector fed to featurizers.
  int observation_dim() const;

  State reset(Rng& rng) const;
  // Throws InvalidArgument for terminal states and out-of-range actions.
  StepOutcome step(const State& state, const Action& action, Rng& rng) const;

  Environment with_normalizer(std::optional<double> normalizer) const;

 private:
  double emit(double raw) const;

  EnvSpec spec_;
};

Environment make_env(const EnvSpec& spec);

// Tabular index: bandit 0, grid x + 4y. Throws for cart states.
int state_index(const State& state);
// Raw observation vector (one-hot index for tabular states is not applied here).
std::vector<double> observation(const State& state);

// Dataset text representation of states and actions.
std::string state_repr(const State& state);
std::string action_repr(const Action& action);

// Fills bandit_means from N(0.5, 1) and bandit_scales from U(0.5, 1.5).
void draw_default_bandit(EnvSpec& spec, std::uint64_t seed);

// Per-state optimal action for tabular domains, by value iteration on the
// expected rewards (bandit: arm with largest mean).
std::vector<int> optimal_actions(const Environment& env);

}  // namespace robust_collect
