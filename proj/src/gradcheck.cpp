#include "darer/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace darer {

GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs, double h,
                           double tol) {
  std::vector<bool> previous;
  for (auto& t : inputs) {
    previous.push_back(t.requires_grad());
    t.set_requires_grad(true);
    t.zero_grad();
  }

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = f();
    tape.backward(loss);
    for (auto& t : inputs) analytic.push_back(t.grad());
  }

  GradCheckReport report;
  report.tol = tol;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto values = inputs[k].data();
    double worst = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + h;
      const double plus = f().item();
      values[i] = orig - h;
      const double minus = f().item();
      values[i] = orig;
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = analytic[k][i];
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
    report.max_rel_error.push_back(worst);
    report.worst = std::max(report.worst, worst);
  }

  for (std::size_t k = 0; k < inputs.size(); ++k) {
    inputs[k].zero_grad();
    inputs[k].set_requires_grad(previous[k]);
  }
  return report;
}

}  // namespace darer
