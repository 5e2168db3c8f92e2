#include "mwafm/attention.hpp"

#include <cmath>
#include <string>

#include "mwafm/error.hpp"

namespace mwafm {

AttentionMask AttentionMask::padding(const ValidMask& query_valid, const ValidMask& key_valid) {
  AttentionMask m(query_valid.size(), key_valid.size(), false);
  for (std::size_t q = 0; q < query_valid.size(); ++q) {
    if (!query_valid[q]) continue;
    for (std::size_t k = 0; k < key_valid.size(); ++k) m.set(q, k, key_valid[k]);
  }
  return m;
}

std::size_t AttentionMask::count() const noexcept {
  std::size_t n = 0;
  for (auto v : allowed_) n += v;
  return n;
}

AttentionMask AttentionMask::operator&&(const AttentionMask& other) const {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw DimensionError("mask conjunction: [" + std::to_string(rows_) + "x" + std::to_string(cols_) + "] vs [" +
                         std::to_string(other.rows_) + "x" + std::to_string(other.cols_) + "]");
  }
  AttentionMask out = *this;
  for (std::size_t i = 0; i < allowed_.size(); ++i) out.allowed_[i] = allowed_[i] & other.allowed_[i];
  return out;
}

AttentionMask band_mask(std::size_t length, std::size_t window) {
  if (window < 2 || window % 2 != 0) {
    throw ValidationError("window size must be even and >= 2, got " + std::to_string(window));
  }
  const std::size_t half = window / 2;
  AttentionMask m(length, length, false);
  for (std::size_t i = 0; i < length; ++i) {
    for (std::size_t j = 0; j < length; ++j) m.set(i, j, (i > j ? i - j : j - i) <= half);
  }
  return m;
}

Var attention_weights(Var query, Var keys, const AttentionMask& mask, double scale_factor) {
  if (query.value().cols() != keys.value().cols()) {
    throw DimensionError("attention: query " + shape_string(query.shape()) + " vs keys " + shape_string(keys.shape()));
  }
  return masked_row_softmax(scale(matmul(query, transpose(keys)), scale_factor), mask);
}

Var dot_attention(Var query, Var keys, Var values, const AttentionMask& mask, double scale_factor) {
  if (keys.value().rows() != values.value().rows()) {
    throw DimensionError("attention: keys " + shape_string(keys.shape()) + " vs values " + shape_string(values.shape()));
  }
  return matmul(attention_weights(query, keys, mask, scale_factor), values);
}

Var multi_head_attention(Var query, Var keys, Var values, const AttentionMask& mask, const MhaParams& params) {
  const std::size_t d = query.value().cols();
  if (params.num_heads == 0 || d % params.num_heads != 0) {
    throw DimensionError("multi_head_attention: " + std::to_string(params.num_heads) + " heads do not divide d=" +
                         std::to_string(d));
  }
  for (Var w : {params.w_q, params.w_k, params.w_v, params.w_o}) {
    if (w.shape() != Shape{d, d}) {
      throw DimensionError("multi_head_attention: projection " + shape_string(w.shape()) + " for d=" +
                           std::to_string(d));
    }
  }
  const Var q = matmul(query, params.w_q);
  const Var k = matmul(keys, params.w_k);
  const Var v = matmul(values, params.w_v);
  const std::size_t head_dim = d / params.num_heads;
  const double head_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  if (params.num_heads == 1) return matmul(dot_attention(q, k, v, mask, head_scale), params.w_o);

  std::vector<Var> heads;
  heads.reserve(params.num_heads);
  for (std::size_t h = 0; h < params.num_heads; ++h) {
    const std::size_t begin = h * head_dim;
    heads.push_back(dot_attention(slice_cols(q, begin, head_dim), slice_cols(k, begin, head_dim),
                                  slice_cols(v, begin, head_dim), mask, head_scale));
  }
  return matmul(concat_cols(heads), params.w_o);
}

}  // namespace mwafm
