#include "mwafm/mwam.hpp"

#include <algorithm>
#include <optional>
#include <string>

#include "mwafm/error.hpp"

namespace mwafm {

void validate_windows(const std::vector<std::size_t>& windows, bool require_increasing) {
  if (windows.empty()) throw ValidationError("window list is empty");
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i] < 2 || windows[i] % 2 != 0) {
      throw ValidationError("window sizes must be even and >= 2, got " + std::to_string(windows[i]));
    }
    if (i > 0 && windows[i] < windows[i - 1]) throw ValidationError("window sizes must be non-decreasing");
    if (require_increasing && i > 0 && windows[i] == windows[i - 1]) {
      throw ValidationError("window sizes must be strictly increasing");
    }
  }
}

Var windowed_self_attention(Var audio, std::size_t window, const MhaParams& params, const ValidMask& valid) {
  const std::size_t length = audio.value().rows();
  if (valid.size() != length) {
    throw DimensionError("windowed_self_attention: " + std::to_string(valid.size()) + " flags for audio " +
                         shape_string(audio.shape()));
  }
  const AttentionMask mask = band_mask(length, window) && AttentionMask::padding(valid, valid);
  return multi_head_attention(audio, audio, audio, mask, params);
}

Var scale_readout(Var sentence_query, Var windowed, const MhaParams& params, const ValidMask& valid) {
  const std::size_t d = windowed.value().cols();
  if (valid.size() != windowed.value().rows()) {
    throw DimensionError("scale_readout: " + std::to_string(valid.size()) + " flags for keys " +
                         shape_string(windowed.shape()));
  }
  if (std::find(valid.begin(), valid.end(), true) == valid.end()) {
    throw ValidationError("scale_readout: no valid timesteps");
  }
  if (sentence_query.value().numel() != d) {
    throw DimensionError("scale_readout: query " + shape_string(sentence_query.shape()) + " vs keys " +
                         shape_string(windowed.shape()));
  }
  const Var query = reshape(sentence_query, {1, d});
  const Var out = multi_head_attention(query, windowed, windowed, AttentionMask::padding({true}, valid), params);
  return reshape(out, {d});
}

Var aggregate_scales(const std::vector<Var>& readouts, Var audio_pooled, const MwamParams& params,
                     const MwamOptions& options, bool training, Rng& rng) {
  if (readouts.empty()) throw ValidationError("aggregate_scales: no scales");
  if (params.scales.size() != readouts.size()) {
    throw DimensionError("aggregate_scales: " + std::to_string(readouts.size()) + " readouts for " +
                         std::to_string(params.scales.size()) + " parameter sets");
  }
  const std::size_t d = audio_pooled.value().numel();
  const Var audio_row = linear(reshape(audio_pooled, {1, d}), params.audio_projection.w, params.audio_projection.b);
  auto audio_term = [&] { return relu(dropout(audio_row, options.dropout, training, rng)); };

  std::optional<Var> total;
  for (std::size_t i = 0; i < readouts.size(); ++i) {
    const LinearParams& proj = params.scales[i].projection;
    Var term = relu(dropout(linear(reshape(readouts[i], {1, d}), proj.w, proj.b), options.dropout, training, rng));
    if (!options.audio_once) term = add(term, audio_term());
    total = total ? add(*total, term) : term;
  }
  if (options.audio_once) total = add(*total, audio_term());

  for (double v : total->value().data()) {
    if (v < 0.0) throw NumericError("aggregate_scales: negative entry in the sum of ReLUs");
  }
  return reshape(layer_norm(*total, params.norm_gamma, params.norm_beta, options.ln_eps), {d});
}

Var mwam_forward(const AhamOutput& aham, const ValidMask& audio_valid, const MwamParams& params,
                 const MwamOptions& options, bool training, Rng& rng) {
  validate_windows(options.windows, false);
  if (params.scales.size() != options.windows.size()) {
    throw DimensionError("mwam_forward: " + std::to_string(params.scales.size()) + " parameter sets for " +
                         std::to_string(options.windows.size()) + " windows");
  }
  const Var audio_pooled = masked_mean_pool(aham.audio, audio_valid);
  std::vector<Var> readouts;
  readouts.reserve(options.windows.size());
  for (std::size_t i = 0; i < options.windows.size(); ++i) {
    const Var windowed = windowed_self_attention(aham.audio, options.windows[i], params.scales[i].self_attention,
                                                 audio_valid);
    readouts.push_back(scale_readout(aham.question_sentence, windowed, params.scales[i].readout, audio_valid));
  }
  return aggregate_scales(readouts, audio_pooled, params, options, training, rng);
}

}  // namespace mwafm
