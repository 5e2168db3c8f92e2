#pragma once

#include <cstddef>
#include <vector>

#include "mwafm/aham.hpp"
#include "mwafm/attention.hpp"

namespace mwafm {

/// Linear layer d -> d applied before each ReLU in the aggregation.
struct LinearParams {
  Var w;
  Var b;
};

/// Weights of one window scale.
struct ScaleParams {
  MhaParams self_attention;
  MhaParams readout;
  LinearParams projection;
};

/// Parameters of the multi-scale window attention module, bound to a tape.
/// `scales` runs parallel to the window list (entries may alias when shared).
struct MwamParams {
  std::vector<ScaleParams> scales;
  LinearParams audio_projection;
  Var norm_gamma;
  Var norm_beta;
};

struct MwamOptions {
  std::vector<std::size_t> windows{2, 4, 6, 12};
  /// Add the audio summand once instead of once per scale.
  bool audio_once = false;
  double dropout = 0.1;
  double ln_eps = kLayerNormEps;
};

/// Throws ValidationError unless the list is non-empty, even, >= 2 and
/// non-decreasing (strictly increasing with `require_increasing`). Repeated
/// sizes are allowed for the equal-window ablation.
void validate_windows(const std::vector<std::size_t>& windows, bool require_increasing = true);

/// Banded multi-head self-attention over one window size.
Var windowed_self_attention(Var audio, std::size_t window, const MhaParams& params, const ValidMask& valid);

/// Single-query multi-head attention of the sentence vector over one scale.
/// Returns [d].
Var scale_readout(Var sentence_query, Var windowed, const MhaParams& params, const ValidMask& valid);

/// Norm( sum_i relu(drop(W_i r_i)) + relu(drop(W_a a)) ), audio term once per
/// scale unless `audio_once`.
Var aggregate_scales(const std::vector<Var>& readouts, Var audio_pooled, const MwamParams& params,
                     const MwamOptions& options, bool training, Rng& rng);

/// Full module: per-scale windowed attention and readout, then aggregation.
Var mwam_forward(const AhamOutput& aham, const ValidMask& audio_valid, const MwamParams& params,
                 const MwamOptions& options, bool training, Rng& rng);

}  // namespace mwafm
