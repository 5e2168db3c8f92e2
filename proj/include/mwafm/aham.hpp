#pragma once

#include <string_view>
#include <utility>

#include "mwafm/mask.hpp"
#include "mwafm/ops.hpp"

namespace mwafm {

/// How the question-weighted audio is merged back into every timestep.
enum class CrossMode {
  gate,     ///< row t becomes (1 + w[t]) * audio[t]
  context,  ///< every row gets the shared sum_t w[t] * audio[t] added
};

CrossMode parse_cross_mode(std::string_view text);
std::string_view to_string(CrossMode mode);

struct AhamOutput {
  Var audio;              ///< [T x d]
  Var question;           ///< [N x d]
  Var question_sentence;  ///< [d], mean over valid question rows
  Var audio_weights;      ///< [T], question-to-audio attention
};

inline constexpr double kLayerNormEps = 1e-5;

/// Unimodal self-attention encoder: x = LN(features), x + attn(x, x, x).
/// Padded rows come out as zeros and never feed valid rows.
Var unimodal_encode(Var features, const ValidMask& valid, double ln_eps = kLayerNormEps);

/// Question-conditioned reweighting of audio timesteps. Returns the merged
/// audio and the weights.
std::pair<Var, Var> crossmodal_gate(Var audio, Var sentence_query, const ValidMask& valid,
                                    CrossMode mode = CrossMode::gate);

struct AhamOptions {
  bool enabled = true;
  CrossMode cross_mode = CrossMode::gate;
  double ln_eps = kLayerNormEps;
};

/// Both unimodal encoders followed by the cross-modal gate. With
/// `enabled == false` the projected inputs pass through untouched.
AhamOutput aham_forward(Var audio, Var question, const ValidMask& audio_valid, const ValidMask& question_valid,
                        const AhamOptions& options = {});

}  // namespace mwafm
