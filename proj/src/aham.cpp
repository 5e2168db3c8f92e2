#include "mwafm/aham.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mwafm/attention.hpp"
#include "mwafm/error.hpp"

namespace mwafm {

CrossMode parse_cross_mode(std::string_view text) {
  if (text == "gate") return CrossMode::gate;
  if (text == "context") return CrossMode::context;
  throw ValidationError("unknown cross mode '" + std::string(text) + "' (expected gate|context)");
}

std::string_view to_string(CrossMode mode) { return mode == CrossMode::gate ? "gate" : "context"; }

namespace {

bool any_valid(const ValidMask& valid) { return std::find(valid.begin(), valid.end(), true) != valid.end(); }

}  // namespace

Var unimodal_encode(Var features, const ValidMask& valid, double ln_eps) {
  const Tensor& fv = features.value();
  if (fv.rank() != 2 || valid.size() != fv.rows()) {
    throw DimensionError("unimodal_encode: " + std::to_string(valid.size()) + " flags for features " +
                         shape_string(fv.shape()));
  }
  if (!any_valid(valid)) throw ValidationError("unimodal_encode: every position is padding");
  const std::size_t d = fv.cols();
  Tape& tape = *features.tape;
  const Var gamma = tape.constant(Tensor({d}, 1.0));
  const Var beta = tape.constant(Tensor({d}, 0.0));
  const Var normed = zero_rows(layer_norm(features, gamma, beta, ln_eps), valid);
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(d));
  const Var context = dot_attention(normed, normed, normed, AttentionMask::padding(valid, valid), scale_factor);
  return add(normed, context);
}

std::pair<Var, Var> crossmodal_gate(Var audio, Var sentence_query, const ValidMask& valid, CrossMode mode) {
  const Tensor& av = audio.value();
  const std::size_t d = av.cols();
  if (av.rank() != 2 || valid.size() != av.rows()) {
    throw DimensionError("crossmodal_gate: " + std::to_string(valid.size()) + " flags for audio " +
                         shape_string(av.shape()));
  }
  if (sentence_query.value().numel() != d) {
    throw DimensionError("crossmodal_gate: query " + shape_string(sentence_query.shape()) + " vs audio " +
                         shape_string(av.shape()));
  }
  if (!any_valid(valid)) throw ValidationError("crossmodal_gate: no valid audio timesteps");
  const Var query = reshape(sentence_query, {1, d});
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(d));
  const Var weights = attention_weights(query, audio, AttentionMask::padding({true}, valid), scale_factor);
  Var merged;
  if (mode == CrossMode::gate) {
    merged = add(audio, scale_rows(audio, weights));
  } else {
    merged = zero_rows(add_row(audio, matmul(weights, audio)), valid);
  }
  return {merged, reshape(weights, {av.rows()})};
}

AhamOutput aham_forward(Var audio, Var question, const ValidMask& audio_valid, const ValidMask& question_valid,
                        const AhamOptions& options) {
  if (!options.enabled) {
    const auto valid_count = static_cast<double>(std::count(audio_valid.begin(), audio_valid.end(), true));
    if (valid_count == 0) throw ValidationError("aham_forward: no valid audio timesteps");
    Tensor uniform({audio_valid.size()}, 0.0);
    for (std::size_t t = 0; t < audio_valid.size(); ++t) uniform[t] = audio_valid[t] ? 1.0 / valid_count : 0.0;
    return {audio, question, masked_mean_pool(question, question_valid), audio.tape->constant(std::move(uniform))};
  }
  const Var audio_encoded = unimodal_encode(audio, audio_valid, options.ln_eps);
  const Var question_encoded = unimodal_encode(question, question_valid, options.ln_eps);
  const Var sentence = masked_mean_pool(question_encoded, question_valid);
  auto [gated, weights] = crossmodal_gate(audio_encoded, sentence, audio_valid, options.cross_mode);
  return {gated, question_encoded, sentence, weights};
}

}  // namespace mwafm
