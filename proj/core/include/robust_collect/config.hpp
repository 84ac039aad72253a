#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string_view>

#include "robust_collect/experiments.hpp"

namespace robust_collect {

// Contents of one YAML experiment file. Relative paths inside it resolve
// against the file's directory. Unknown keys are rejected.
struct ConfigFile {
  ExperimentConfig experiment;
  std::optional<SweepConfig> sweep;
};

// Throws ConfigError naming the path or the offending key.
ConfigFile load_config(const std::filesystem::path& path);
ConfigFile parse_config(std::string_view yaml, const std::filesystem::path& base_dir);

void write_true_value(std::ostream& os, const TrueValue& tv);
TrueValue read_true_value(std::istream& is);

}  // namespace robust_collect
