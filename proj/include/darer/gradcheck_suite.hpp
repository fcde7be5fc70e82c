#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace darer {

struct GradCheckCase {
  std::string layer;
  std::uint64_t seed = 0;
  std::size_t nodes = 0;  // graph size used by the case
  double worst = 0.0;
  bool passed = false;
};

struct GradCheckSuiteResult {
  std::vector<GradCheckCase> cases;
  double worst = 0.0;
  bool passed() const;
};

/// Layer names covered by the suite, in run order.
const std::vector<std::string>& gradcheck_layers();

/// Finite-difference check of every layer and loss on small random inputs
/// (at most 8 graph nodes), one case per layer per seed.
GradCheckSuiteResult run_gradcheck_suite(std::size_t num_seeds = 20, double h = 1e-5,
                                         double tol = 1e-4);

}  // namespace darer
