#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "darer/tensor.hpp"

namespace darer {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t step = 0;

  static AdamState for_params(std::span<const Tensor> params);
};

/// One bias-corrected Adam step over `params` using their accumulated
/// gradients. Parameters without a gradient are treated as having zero
/// gradient. Throws ConfigError for lr <= 0.
void adam_update(std::span<Tensor> params, AdamState& state, const AdamConfig& cfg);

void zero_grads(std::span<Tensor> params);

}  // namespace darer
