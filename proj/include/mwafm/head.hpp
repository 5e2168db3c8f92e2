#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mwafm/ops.hpp"
#include "mwafm/tensor.hpp"

namespace mwafm {

/// Element-wise product of the aggregated audio and the question vector.
Var fuse(Var audio_aggregate, Var question_sentence);

struct AnswerHeadParams {
  Var w;  ///< [d x C]
  Var b;  ///< [C]
};

/// Class probabilities with a deterministic ranking (ties by lower index).
struct Prediction {
  std::vector<double> probabilities;
  std::vector<std::size_t> ranked;
  std::size_t top1 = 0;

  static Prediction from_logits(std::span<const double> logits);
};

/// Logits of a fused embedding, [d] -> [C].
Var answer_logits(Var fused, const AnswerHeadParams& params);

/// softmax(linear(e)) with ranking.
Prediction classify(Var fused, const AnswerHeadParams& params);

/// -log softmax(logits)[label], computed via log-sum-exp.
double cross_entropy(std::span<const double> logits, std::size_t label);

/// Fraction of samples whose label is among the first k ranked classes.
double topk_accuracy(std::span<const Prediction> predictions, std::span<const std::size_t> labels, std::size_t k);

}  // namespace mwafm
