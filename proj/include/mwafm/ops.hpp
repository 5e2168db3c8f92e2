#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "mwafm/mask.hpp"
#include "mwafm/tape.hpp"
#include "mwafm/tensor.hpp"

namespace mwafm {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) built from the top 53 bits of one draw.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Differentiable primitives. Every op takes and returns `Var`s on one tape.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// x[L x n] + bias[n] on every row.
Var add_row(Var x, Var bias);
/// x * w + b with w stored [in x out].
Var linear(Var x, Var w, Var b);
Var relu(Var x);
/// Inverted dropout; identity when `training` is false or rate is 0.
Var dropout(Var x, double rate, bool training, Rng& rng);
/// Row softmax over allowed keys; fully masked rows come out all zero.
Var masked_row_softmax(Var scores, const AttentionMask& mask);
/// Row-wise normalization over the last axis followed by gamma/beta.
Var layer_norm(Var x, Var gamma, Var beta, double eps);
/// Mean over valid rows of x[L x d]; returns [d].
Var masked_mean_pool(Var x, const ValidMask& valid);
/// Resamples rows along time; see `interpolate_time`.
Var time_interpolate(Var x, std::size_t length);
/// Row t of x scaled by w[t]; w has T elements (any shape).
Var scale_rows(Var x, Var w);
/// Rows flagged invalid replaced by zeros.
Var zero_rows(Var x, const ValidMask& valid);
Var slice_rows(Var x, std::size_t begin, std::size_t count);
Var slice_cols(Var x, std::size_t begin, std::size_t count);
Var concat_cols(const std::vector<Var>& parts);
/// Stacks equal-length vectors into a matrix, one per row.
Var stack_rows(const std::vector<Var>& rows);
Var reshape(Var x, Shape shape);
Var sum(Var x);
/// Mean over rows of -log softmax(logits[b])[labels[b]], via log-sum-exp.
Var cross_entropy_mean(Var logits, std::span<const std::size_t> labels);

/// Forward-only kernel behind `masked_row_softmax`.
Tensor masked_row_softmax(const Tensor& scores, const AttentionMask& mask);

}  // namespace mwafm
