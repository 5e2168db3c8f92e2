#pragma once

#include "mwafm/config.hpp"
#include "mwafm/dataset.hpp"
#include "mwafm/params.hpp"

namespace mwafm {

/// Intermediate values of one sample, exposed for inspection and tests.
struct SampleTrace {
  AhamOutput aham;
  Var audio_aggregate;
  Var fused;
  Var logits;
};

/// Project, encode, aggregate, fuse and classify one sample of a batch.
SampleTrace sample_forward(const ModelConfig& config, ParamBinder& params, Var audio_projected, Var question_projected,
                           const ValidMask& audio_valid, const ValidMask& question_valid, bool training, Rng& rng);

/// Logits [B x C] for a whole batch.
Var model_forward(const ModelConfig& config, ParamBinder& params, const Batch& batch, bool training, Rng& rng);

}  // namespace mwafm
