#pragma once

#include <cstddef>

#include "mwafm/mask.hpp"
#include "mwafm/ops.hpp"

namespace mwafm {

/// Sliding-window mask: position i may attend to j iff |i - j| <= window / 2.
///
/// `window` must be even and at least 2; the band is window + 1 wide and
/// always contains the diagonal.
AttentionMask band_mask(std::size_t length, std::size_t window);

/// Learned projections of one multi-head attention block, bound to a tape.
/// All four weights are [d x d] and `num_heads` divides d.
struct MhaParams {
  Var w_q;
  Var w_k;
  Var w_v;
  Var w_o;
  std::size_t num_heads = 1;
};

/// softmax(query * keys^T * scale) under `mask`, shape [m x n].
Var attention_weights(Var query, Var keys, const AttentionMask& mask, double scale);

/// Projection-free scaled dot-product attention.
Var dot_attention(Var query, Var keys, Var values, const AttentionMask& mask, double scale);

/// Projects Q/K/V, runs `dot_attention` per head with scale 1/sqrt(head_dim),
/// concatenates the heads and applies the output projection.
Var multi_head_attention(Var query, Var keys, Var values, const AttentionMask& mask, const MhaParams& params);

}  // namespace mwafm
