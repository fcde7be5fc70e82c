#include "darer/optim.hpp"

#include <cmath>
#include <string>

namespace darer {

AdamState AdamState::for_params(std::span<const Tensor> params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.numel(), 0.0);
    s.v.emplace_back(p.numel(), 0.0);
  }
  return s;
}

void adam_update(std::span<Tensor> params, AdamState& state, const AdamConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw ConfigError("adam: learning rate must be positive, got " + std::to_string(cfg.lr));
  if (state.m.size() != params.size())
    throw DimensionError("adam: state tracks " + std::to_string(state.m.size()) + " tensors, got " +
                         std::to_string(params.size()));
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k];
    auto w = p.data();
    auto g = p.grad_storage();  // zeros when nothing was accumulated
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

void zero_grads(std::span<Tensor> params) {
  for (auto& p : params) p.zero_grad();
}

}  // namespace darer
