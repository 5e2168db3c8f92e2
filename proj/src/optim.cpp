#include "mwafm/optim.hpp"

#include <cmath>

#include "mwafm/error.hpp"

namespace mwafm {

void adam_step(ParamStore& params, const Gradients& grads, AdamState& state, const AdamConfig& config) {
  for (const auto& [path, value] : params) {
    auto g = grads.find(path);
    if (g == grads.end()) throw Error("adam_step: missing gradient for '" + path + "'");
    if (g->second.shape() != value.shape()) {
      throw DimensionError("adam_step: gradient " + shape_string(g->second.shape()) + " for '" + path + "' of shape " +
                           shape_string(value.shape()));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (auto& [path, value] : params) {
    const Tensor& g = grads.at(path);
    auto [m_it, m_new] = state.m.try_emplace(path, value.shape(), 0.0);
    auto [v_it, v_new] = state.v.try_emplace(path, value.shape(), 0.0);
    auto p = value.data();
    auto m = m_it->second.data();
    auto v = v_it->second.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

}  // namespace mwafm
