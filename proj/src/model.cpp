#include "mwafm/model.hpp"

#include <string>

#include "mwafm/error.hpp"

namespace mwafm {

SampleTrace sample_forward(const ModelConfig& config, ParamBinder& params, Var audio_projected, Var question_projected,
                           const ValidMask& audio_valid, const ValidMask& question_valid, bool training, Rng& rng) {
  SampleTrace trace;
  trace.aham = aham_forward(audio_projected, question_projected, audio_valid, question_valid, config.aham);
  if (config.star_layers > 0) {
    AhamOptions stacked = config.aham;
    stacked.enabled = true;
    for (std::size_t layer = 0; layer < config.star_layers; ++layer) {
      trace.aham = aham_forward(trace.aham.audio, trace.aham.question, audio_valid, question_valid, stacked);
    }
    trace.audio_aggregate = masked_mean_pool(trace.aham.audio, audio_valid);
  } else if (config.mwam_enabled) {
    trace.audio_aggregate = mwam_forward(trace.aham, audio_valid, params.mwam(config), config.mwam, training, rng);
  } else {
    trace.audio_aggregate = masked_mean_pool(trace.aham.audio, audio_valid);
  }
  trace.fused = fuse(trace.audio_aggregate, trace.aham.question_sentence);
  trace.logits = answer_logits(trace.fused, params.head());
  return trace;
}

Var model_forward(const ModelConfig& config, ParamBinder& params, const Batch& batch, bool training, Rng& rng) {
  const std::size_t b = batch.size();
  if (b == 0) throw ValidationError("model_forward: empty batch");
  const Shape audio_shape{b, config.audio_len, config.audio_dim};
  const Shape question_shape{b, config.question_len, config.question_dim};
  if (batch.audio.shape() != audio_shape || batch.question.shape() != question_shape) {
    throw DimensionError("model_forward: batch " + shape_string(batch.audio.shape()) + "/" +
                         shape_string(batch.question.shape()) + " does not match config " +
                         shape_string(audio_shape) + "/" + shape_string(question_shape));
  }
  if (batch.audio_valid.size() != b || batch.question_valid.size() != b) {
    throw DimensionError("model_forward: validity masks do not cover the batch");
  }
  Tape& tape = params.tape();
  const Var audio = tape.constant(batch.audio.reshaped({b * config.audio_len, config.audio_dim}));
  const Var question = tape.constant(batch.question.reshaped({b * config.question_len, config.question_dim}));
  // One GEMM per modality for the whole batch.
  const Var audio_projected = linear(audio, params("audio_in.w"), params("audio_in.b"));
  const Var question_projected = linear(question, params("question_in.w"), params("question_in.b"));

  std::vector<Var> logits;
  logits.reserve(b);
  for (std::size_t i = 0; i < b; ++i) {
    const Var a = slice_rows(audio_projected, i * config.audio_len, config.audio_len);
    const Var q = slice_rows(question_projected, i * config.question_len, config.question_len);
    logits.push_back(
        sample_forward(config, params, a, q, batch.audio_valid[i], batch.question_valid[i], training, rng).logits);
  }
  return stack_rows(logits);
}

}  // namespace mwafm
