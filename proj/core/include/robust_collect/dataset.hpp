#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "robust_collect/envs.hpp"

namespace robust_collect {

enum class Provenance { InitialOffPolicy, Collected };

std::string_view to_string(Provenance p);

struct Step {
  State state;
  Action action;
  double reward = 0.0;
  double behavior_log_prob = 0.0;
  // Set when the action was picked deterministically (ROA correction); the
  // recorded log-prob is then the evaluation policy's, not a sampling density.
  bool deterministic = false;

  bool operator==(const Step&) const = default;
};

struct Episode {
  std::vector<Step> steps;
  Provenance provenance = Provenance::Collected;

  std::size_t length() const { return steps.size(); }
  double discounted_return(double gamma) const;
  double behavior_log_prob_sum() const;
  bool operator==(const Episode&) const = default;
};

struct Dataset {
  std::vector<Episode> episodes;

  std::size_t total_steps() const;
  std::size_t num_episodes() const { return episodes.size(); }
  std::size_t count_steps(Provenance p) const;
  std::size_t count_episodes(Provenance p) const;
  bool empty() const { return episodes.empty(); }

  // Episodes [0, n) as an independent dataset.
  Dataset prefix(std::size_t n) const;
  // Episodes carrying the given provenance tag.
  Dataset filter(Provenance p) const;
  void append(const Dataset& other);

  bool operator==(const Dataset&) const = default;
};

// Line format: episode_idx,t,state_repr,action_repr,reward,behavior_log_prob,provenance
// preceded by a '# domain <kind>' header so state fields can be parsed back.
void write_dataset(std::ostream& os, const Dataset& data, EnvKind kind);
Dataset read_dataset(std::istream& is, EnvKind* kind_out = nullptr);
void save_dataset(const std::filesystem::path& path, const Dataset& data, EnvKind kind);
Dataset load_dataset(const std::filesystem::path& path, EnvKind* kind_out = nullptr);

}  // namespace robust_collect
