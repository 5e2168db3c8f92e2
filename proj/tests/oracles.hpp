#pragma once

// Independent reference implementations used by the tests. Plain loops over
// std::vector, no library code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <vector>

#include "mwafm/tensor.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const mwafm::Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t(r, c);
  return m;
}

inline mwafm::Tensor to_tensor(const Mat& m) {
  mwafm::Tensor t({m.size(), m[0].size()});
  for (std::size_t r = 0; r < m.size(); ++r)
    for (std::size_t c = 0; c < m[0].size(); ++c) t(r, c) = m[r][c];
  return t;
}

inline mwafm::Tensor random_tensor(mwafm::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  mwafm::Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat out(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b[0].size(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < b.size(); ++k) acc += a[i][k] * b[k][j];
      out[i][j] = acc;
    }
  return out;
}

inline Mat transpose(const Mat& a) {
  Mat out(a[0].size(), std::vector<double>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) out[j][i] = a[i][j];
  return out;
}

// Softmax where disallowed scores are -infinity; all-masked rows give zeros.
inline std::vector<double> softmax_neg_inf(std::vector<double> scores) {
  const double ninf = -std::numeric_limits<double>::infinity();
  double top = ninf;
  for (double s : scores) top = std::max(top, s);
  if (top == ninf) return std::vector<double>(scores.size(), 0.0);
  long double total = 0.0L;
  for (double& s : scores) {
    s = s == ninf ? 0.0 : std::exp(s - top);
    total += s;
  }
  for (double& s : scores) s = static_cast<double>(s / total);
  return scores;
}

// allowed(i, j) decides which scores survive.
template <class Allowed>
Mat dense_attention(const Mat& q, const Mat& k, const Mat& v, double scale, Allowed allowed) {
  const double ninf = -std::numeric_limits<double>::infinity();
  Mat out(q.size(), std::vector<double>(v[0].size(), 0.0));
  for (std::size_t i = 0; i < q.size(); ++i) {
    std::vector<double> s(k.size());
    for (std::size_t j = 0; j < k.size(); ++j) {
      if (!allowed(i, j)) {
        s[j] = ninf;
        continue;
      }
      double dot = 0.0;
      for (std::size_t c = 0; c < q[0].size(); ++c) dot += q[i][c] * k[j][c];
      s[j] = dot * scale;
    }
    const auto w = softmax_neg_inf(s);
    for (std::size_t j = 0; j < k.size(); ++j)
      for (std::size_t c = 0; c < v[0].size(); ++c) out[i][c] += w[j] * v[j][c];
  }
  return out;
}

inline Mat cols(const Mat& a, std::size_t begin, std::size_t count) {
  Mat out(a.size(), std::vector<double>(count));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t c = 0; c < count; ++c) out[i][c] = a[i][begin + c];
  return out;
}

template <class Allowed>
Mat multi_head(const Mat& q_in, const Mat& k_in, const Mat& v_in, const Mat& wq, const Mat& wk, const Mat& wv,
               const Mat& wo, std::size_t heads, Allowed allowed) {
  const Mat q = matmul(q_in, wq), k = matmul(k_in, wk), v = matmul(v_in, wv);
  const std::size_t d = wq[0].size(), hd = d / heads;
  Mat concat(q.size(), std::vector<double>(d, 0.0));
  for (std::size_t h = 0; h < heads; ++h) {
    const Mat o = dense_attention(cols(q, h * hd, hd), cols(k, h * hd, hd), cols(v, h * hd, hd),
                                  1.0 / std::sqrt(static_cast<double>(hd)), allowed);
    for (std::size_t i = 0; i < o.size(); ++i)
      for (std::size_t c = 0; c < hd; ++c) concat[i][h * hd + c] = o[i][c];
  }
  return matmul(concat, wo);
}

inline std::vector<double> layer_norm_row(const std::vector<double>& x, double eps, const std::vector<double>* gamma = nullptr,
                                          const std::vector<double>* beta = nullptr) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = (x[i] - mean) / std::sqrt(var + eps);
    if (gamma) out[i] *= (*gamma)[i];
    if (beta) out[i] += (*beta)[i];
  }
  return out;
}

// x~ = LN(x) on valid rows, zero elsewhere; out = x~ + sum_j softmax(x~ x~^T / sqrt(d)) x~
inline Mat unimodal_encode(const Mat& x, const std::vector<bool>& valid, double eps) {
  Mat n(x.size(), std::vector<double>(x[0].size(), 0.0));
  for (std::size_t i = 0; i < x.size(); ++i)
    if (valid[i]) n[i] = layer_norm_row(x[i], eps);
  const double scale = 1.0 / std::sqrt(static_cast<double>(x[0].size()));
  Mat out = dense_attention(n, n, n, scale, [&](std::size_t i, std::size_t j) { return valid[i] && valid[j]; });
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t c = 0; c < x[0].size(); ++c) out[i][c] += n[i][c];
  return out;
}

inline std::vector<double> mean_pool(const Mat& x, const std::vector<bool>& valid) {
  std::vector<double> out(x[0].size(), 0.0);
  double n = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!valid[i]) continue;
    n += 1.0;
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += x[i][c];
  }
  for (double& v : out) v /= n;
  return out;
}

// Question-to-audio weights, then rows scaled by (1 + w_t).
inline Mat gate(const Mat& audio, const std::vector<double>& query, const std::vector<bool>& valid,
                std::vector<double>* weights_out = nullptr) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(query.size()));
  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<double> s(audio.size());
  for (std::size_t t = 0; t < audio.size(); ++t) {
    double dot = 0.0;
    for (std::size_t c = 0; c < query.size(); ++c) dot += query[c] * audio[t][c];
    s[t] = valid[t] ? dot * scale : ninf;
  }
  const auto w = softmax_neg_inf(s);
  Mat out = audio;
  for (std::size_t t = 0; t < audio.size(); ++t)
    for (double& v : out[t]) v *= 1.0 + w[t];
  if (weights_out) *weights_out = w;
  return out;
}

inline double neg_log_softmax(const std::vector<double>& logits, std::size_t label) {
  long double top = logits[0];
  for (double v : logits) top = std::max<long double>(top, v);
  long double total = 0.0L;
  for (double v : logits) total += std::exp(static_cast<long double>(v) - top);
  return static_cast<double>(-(static_cast<long double>(logits[label]) - top - std::log(total)));
}

// Piecewise-linear resampling with endpoint alignment, one channel at a time.
inline Mat interpolate(const Mat& x, std::size_t length) {
  Mat out(length, std::vector<double>(x[0].size()));
  for (std::size_t j = 0; j < length; ++j) {
    const double pos = length == 1 || x.size() == 1
                           ? 0.0
                           : static_cast<double>(j) * static_cast<double>(x.size() - 1) / static_cast<double>(length - 1);
    const std::size_t lo = std::min(static_cast<std::size_t>(std::floor(pos)), x.size() - 1);
    const std::size_t hi = std::min(lo + 1, x.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    for (std::size_t c = 0; c < x[0].size(); ++c) out[j][c] = x[lo][c] + frac * (x[hi][c] - x[lo][c]);
  }
  return out;
}

inline double max_diff(const Mat& a, const Mat& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) m = std::max(m, std::abs(a[i][j] - b[i][j]));
  return m;
}

inline double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace oracle
