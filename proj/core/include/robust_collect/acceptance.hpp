#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace robust_collect {

struct AcceptanceOptions {
  // Directory holding multibandit.yaml, gridworld.yaml and their snapshots.
  std::filesystem::path config_dir;
  int parallel = 1;
};

struct CriterionResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

// Runs every criterion, printing one "PASS|FAIL name (Ns): detail" line each
// as it completes. Exceptions inside a criterion count as failures.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options, std::ostream& out);

}  // namespace robust_collect
