#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "mwafm/params.hpp"

namespace mwafm {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::uint64_t step = 0;
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One bias-corrected Adam update of every parameter in `params`.
/// Every path must have a gradient.
void adam_step(ParamStore& params, const Gradients& grads, AdamState& state, const AdamConfig& config);

}  // namespace mwafm
