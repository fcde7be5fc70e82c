#pragma once

#include <functional>
#include <string>
#include <vector>

#include "darer/tensor.hpp"

namespace darer {

struct GradCheckReport {
  /// Max of |analytic - numeric| / max(1, |analytic|) per input tensor.
  std::vector<double> max_rel_error;
  double worst = 0.0;
  double tol = 0.0;
  bool passed() const { return worst <= tol; }
};

/// Compares reverse-mode gradients of a scalar function against central
/// differences. `f` must rebuild its graph from the current values of
/// `inputs` on every call and be deterministic. Every input is marked as
/// requiring a gradient for the duration of the check.
GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                           double h = 1e-5, double tol = 1e-4);

}  // namespace darer
