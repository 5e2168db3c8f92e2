#include "mwafm/head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mwafm/error.hpp"

namespace mwafm {

Var fuse(Var audio_aggregate, Var question_sentence) { return mul(audio_aggregate, question_sentence); }

Prediction Prediction::from_logits(std::span<const double> logits) {
  if (logits.empty()) throw DimensionError("prediction over zero classes");
  Prediction p;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  p.probabilities.reserve(logits.size());
  for (double v : logits) p.probabilities.push_back(std::exp(v - lse));
  p.ranked.resize(logits.size());
  std::iota(p.ranked.begin(), p.ranked.end(), std::size_t{0});
  std::stable_sort(p.ranked.begin(), p.ranked.end(),
                   [&](std::size_t a, std::size_t b) { return p.probabilities[a] > p.probabilities[b]; });
  p.top1 = p.ranked.front();
  return p;
}

Var answer_logits(Var fused, const AnswerHeadParams& params) {
  const std::size_t d = fused.value().numel();
  const Var logits = linear(reshape(fused, {1, d}), params.w, params.b);
  return reshape(logits, {logits.value().cols()});
}

Prediction classify(Var fused, const AnswerHeadParams& params) {
  return Prediction::from_logits(answer_logits(fused, params).value().data());
}

double cross_entropy(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) {
    throw ValidationError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                          std::to_string(logits.size()) + " classes");
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  return mx + std::log(z) - logits[label];
}

double topk_accuracy(std::span<const Prediction> predictions, std::span<const std::size_t> labels, std::size_t k) {
  if (predictions.size() != labels.size()) {
    throw DimensionError("topk_accuracy: " + std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(labels.size()) + " labels");
  }
  if (predictions.empty()) throw ValidationError("topk_accuracy: empty evaluation set");
  if (k == 0) throw ValidationError("topk_accuracy: k must be positive");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& ranked = predictions[i].ranked;
    if (k > ranked.size()) {
      throw ValidationError("topk_accuracy: k=" + std::to_string(k) + " exceeds " + std::to_string(ranked.size()) +
                            " classes");
    }
    if (std::find(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), labels[i]) !=
        ranked.begin() + static_cast<std::ptrdiff_t>(k)) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

}  // namespace mwafm
