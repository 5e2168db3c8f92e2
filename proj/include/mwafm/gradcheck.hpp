#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mwafm/config.hpp"
#include "mwafm/dataset.hpp"
#include "mwafm/params.hpp"

namespace mwafm {

struct PathCheck {
  std::string path;
  std::size_t coords = 0;
  double max_error = 0.0;  ///< see `gradient_error`
  double max_abs = 0.0;    ///< max |analytic - numeric|
};

struct GradCheckReport {
  std::vector<PathCheck> paths;
  double max_error = 0.0;
  std::string worst_path;
};

/// |analytic - numeric| / max(|analytic|, |numeric|, floor).
double gradient_error(double analytic, double numeric, double floor = 1e-3);

/// Random probe batch shaped for `config`; later samples get shorter
/// questions so padding is exercised.
Batch random_probe_batch(const ModelConfig& config, std::size_t batch, std::size_t classes, std::uint64_t seed);

/// Central finite differences on random coordinates of every parameter
/// tensor, compared with reverse-mode gradients. Dropout is off.
GradCheckReport grad_check(const ModelConfig& config, const GradCheckConfig& options, std::uint64_t seed);

}  // namespace mwafm
