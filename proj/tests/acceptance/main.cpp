#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include "robust_collect/acceptance.hpp"

int main(int argc, char** argv) {
  robust_collect::AcceptanceOptions opts;
  opts.config_dir = argc > 1 ? argv[1] : ROBUST_COLLECT_DEFAULT_CONFIG_DIR;
  opts.parallel = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const auto results = robust_collect::run_acceptance(opts, std::cout);
  const auto failed = std::count_if(results.begin(), results.end(), [](const auto& r) { return !r.passed; });
  std::cout << (results.size() - static_cast<std::size_t>(failed)) << "/" << results.size() << " criteria passed\n";
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
