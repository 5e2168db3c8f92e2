#include "mwafm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "eigen_util.hpp"
#include "mwafm/error.hpp"

namespace mwafm {

using detail::as_matrix;

namespace {

void require_rank2(const char* op, const Tensor& t) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

void accumulate(Tape& tape, Var v, const Tensor& g) {
  if (!v.requires_grad()) return;
  auto& buf = tape.grad_buffer(v.id);
  auto dst = buf.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank2("matmul", av);
  require_rank2("matmul", bv);
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()));
  }
  Tensor out({av.rows(), bv.cols()});
  as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv);
  return a.tape->record("matmul", std::move(out), {a, b}, [a, b](const Tensor& g, Tape& tape) {
    const auto gm = as_matrix(g);
    if (a.requires_grad()) {
      as_matrix(tape.grad_buffer(a.id)).noalias() += gm * as_matrix(b.value()).transpose();
    }
    if (b.requires_grad()) {
      as_matrix(tape.grad_buffer(b.id)).noalias() += as_matrix(a.value()).transpose() * gm;
    }
  });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  require_rank2("transpose", av);
  Tensor out({av.cols(), av.rows()});
  as_matrix(out) = as_matrix(av).transpose();
  return a.tape->record("transpose", std::move(out), {a}, [a](const Tensor& g, Tape& tape) {
    as_matrix(tape.grad_buffer(a.id)) += as_matrix(g).transpose();
  });
}

Var add(Var a, Var b) {
  require_same_shape("add", a.value(), b.value());
  Tensor out = a.value();
  auto src = b.value().data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  return a.tape->record("add", std::move(out), {a, b}, [a, b](const Tensor& g, Tape& tape) {
    accumulate(tape, a, g);
    accumulate(tape, b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a.value(), b.value());
  Tensor out = a.value();
  auto src = b.value().data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= src[i];
  return a.tape->record("sub", std::move(out), {a, b}, [a, b](const Tensor& g, Tape& tape) {
    accumulate(tape, a, g);
    if (b.requires_grad()) {
      auto dst = tape.grad_buffer(b.id).data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a.value(), b.value());
  Tensor out = a.value();
  auto src = b.value().data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] *= src[i];
  return a.tape->record("mul", std::move(out), {a, b}, [a, b](const Tensor& g, Tape& tape) {
    if (a.requires_grad()) {
      auto dst = tape.grad_buffer(a.id).data();
      const auto& bv = b.value();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * bv[i];
    }
    if (b.requires_grad()) {
      auto dst = tape.grad_buffer(b.id).data();
      const auto& av = a.value();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  return a.tape->record("scale", std::move(out), {a}, [a, factor](const Tensor& g, Tape& tape) {
    auto dst = tape.grad_buffer(a.id).data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += factor * g[i];
  });
}

Var add_row(Var x, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (bv.numel() != xv.cols()) {
    throw DimensionError("add_row: bias " + shape_string(bv.shape()) + " vs input " + shape_string(xv.shape()));
  }
  Tensor out = xv;
  const std::size_t n = xv.cols();
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < n; ++c) row[c] += bv[c];
  }
  return x.tape->record("add_row", std::move(out), {x, bias}, [x, bias, n](const Tensor& g, Tape& tape) {
    accumulate(tape, x, g);
    if (bias.requires_grad()) {
      auto dst = tape.grad_buffer(bias.id).data();
      for (std::size_t r = 0; r < g.rows(); ++r) {
        auto row = g.row(r);
        for (std::size_t c = 0; c < n; ++c) dst[c] += row[c];
      }
    }
  });
}

Var linear(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }

Var relu(Var x) {
  Tensor out = x.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return x.tape->record("relu", std::move(out), {x}, [x](const Tensor& g, Tape& tape) {
    auto dst = tape.grad_buffer(x.id).data();
    const auto& xv = x.value();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (xv[i] > 0.0) dst[i] += g[i];
    }
  });
}

Var dropout(Var x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ValidationError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor factors(x.shape());
  for (double& f : factors.data()) f = uniform01(rng) < rate ? 0.0 : keep_scale;
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= factors[i];
  return x.tape->record("dropout", std::move(out), {x}, [x, factors = std::move(factors)](const Tensor& g, Tape& tape) {
    auto dst = tape.grad_buffer(x.id).data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * factors[i];
  });
}

Tensor masked_row_softmax(const Tensor& scores, const AttentionMask& mask) {
  require_rank2("masked_row_softmax", scores);
  if (mask.num_queries() != scores.rows() || mask.num_keys() != scores.cols()) {
    throw DimensionError("masked_row_softmax: scores " + shape_string(scores.shape()) + " vs mask [" +
                         std::to_string(mask.num_queries()) + "x" + std::to_string(mask.num_keys()) + "]");
  }
  Tensor out(scores.shape(), 0.0);
  const std::size_t n = scores.cols();
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    auto in = scores.row(r);
    auto dst = out.row(r);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n; ++c) {
      if (mask.allowed(r, c)) mx = std::max(mx, in[c]);
    }
    if (mx == -std::numeric_limits<double>::infinity()) continue;
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      if (mask.allowed(r, c)) {
        dst[c] = std::exp(in[c] - mx);
        total += dst[c];
      }
    }
    const double inv = 1.0 / total;
    for (std::size_t c = 0; c < n; ++c) dst[c] *= inv;
  }
  return out;
}

Var masked_row_softmax(Var scores, const AttentionMask& mask) {
  Tensor out = masked_row_softmax(scores.value(), mask);
  Tensor saved = out;
  return scores.tape->record(
      "masked_row_softmax", std::move(out), {scores}, [scores, y = std::move(saved)](const Tensor& g, Tape& tape) {
        auto& dst = tape.grad_buffer(scores.id);
        const std::size_t n = y.cols();
        for (std::size_t r = 0; r < y.rows(); ++r) {
          auto yr = y.row(r);
          auto gr = g.row(r);
          double dot = 0.0;
          for (std::size_t c = 0; c < n; ++c) dot += gr[c] * yr[c];
          auto dr = dst.row(r);
          for (std::size_t c = 0; c < n; ++c) dr[c] += yr[c] * (gr[c] - dot);
        }
      });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Tensor& xv = x.value();
  const std::size_t d = xv.cols();
  if (gamma.value().numel() != d || beta.value().numel() != d) {
    throw DimensionError("layer_norm: gamma/beta " + shape_string(gamma.shape()) + "/" + shape_string(beta.shape()) +
                         " vs input " + shape_string(xv.shape()));
  }
  if (!(eps > 0.0)) throw ValidationError("layer_norm eps must be positive");
  const std::size_t rows = xv.rows();
  Tensor normalized(xv.shape());
  std::vector<double> inv_std(rows);
  Tensor out(xv.shape());
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  for (std::size_t r = 0; r < rows; ++r) {
    auto in = xv.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    auto nr = normalized.row(r);
    auto orow = out.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      nr[c] = (in[c] - mean) * inv_std[r];
      orow[c] = gv[c] * nr[c] + bv[c];
    }
  }
  return x.tape->record(
      "layer_norm", std::move(out), {x, gamma, beta},
      [x, gamma, beta, d, normalized = std::move(normalized), inv_std = std::move(inv_std)](const Tensor& g,
                                                                                            Tape& tape) {
        const auto& gv = gamma.value();
        Tensor* gx = x.requires_grad() ? &tape.grad_buffer(x.id) : nullptr;
        Tensor* gg = gamma.requires_grad() ? &tape.grad_buffer(gamma.id) : nullptr;
        Tensor* gb = beta.requires_grad() ? &tape.grad_buffer(beta.id) : nullptr;
        std::vector<double> gxhat(d);
        for (std::size_t r = 0; r < normalized.rows(); ++r) {
          auto gr = g.row(r);
          auto nr = normalized.row(r);
          double mean_g = 0.0;
          double mean_gn = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            if (gg) (*gg)[c] += gr[c] * nr[c];
            if (gb) (*gb)[c] += gr[c];
            gxhat[c] = gr[c] * gv[c];
            mean_g += gxhat[c];
            mean_gn += gxhat[c] * nr[c];
          }
          if (!gx) continue;
          mean_g /= static_cast<double>(d);
          mean_gn /= static_cast<double>(d);
          auto dr = gx->row(r);
          for (std::size_t c = 0; c < d; ++c) dr[c] += inv_std[r] * (gxhat[c] - mean_g - nr[c] * mean_gn);
        }
      });
}

Var masked_mean_pool(Var x, const ValidMask& valid) {
  const Tensor& xv = x.value();
  require_rank2("masked_mean_pool", xv);
  if (valid.size() != xv.rows()) {
    throw DimensionError("masked_mean_pool: " + std::to_string(valid.size()) + " flags for input " +
                         shape_string(xv.shape()));
  }
  const auto count = static_cast<std::size_t>(std::count(valid.begin(), valid.end(), true));
  if (count == 0) throw ValidationError("masked_mean_pool: no valid positions");
  const std::size_t d = xv.cols();
  const double inv = 1.0 / static_cast<double>(count);
  Tensor out({d}, 0.0);
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    if (!valid[r]) continue;
    auto row = xv.row(r);
    for (std::size_t c = 0; c < d; ++c) out[c] += row[c];
  }
  for (double& v : out.data()) v *= inv;
  return x.tape->record("masked_mean_pool", std::move(out), {x}, [x, valid, inv, d](const Tensor& g, Tape& tape) {
    auto& dst = tape.grad_buffer(x.id);
    for (std::size_t r = 0; r < valid.size(); ++r) {
      if (!valid[r]) continue;
      auto row = dst.row(r);
      for (std::size_t c = 0; c < d; ++c) row[c] += g[c] * inv;
    }
  });
}

Var time_interpolate(Var x, std::size_t length) {
  const Tensor& xv = x.value();
  Tensor out = interpolate_time(xv, length);
  const std::size_t t_in = xv.rows();
  return x.tape->record("time_interpolate", std::move(out), {x}, [x, t_in, length](const Tensor& g, Tape& tape) {
    auto& dst = tape.grad_buffer(x.id);
    const std::size_t d = g.cols();
    for (std::size_t j = 0; j < length; ++j) {
      auto gj = g.row(j);
      if (t_in == 1 || length == 1) {
        auto row = dst.row(0);
        for (std::size_t c = 0; c < d; ++c) row[c] += gj[c];
        continue;
      }
      const double pos = static_cast<double>(j) * static_cast<double>(t_in - 1) / static_cast<double>(length - 1);
      const auto lo = std::min(static_cast<std::size_t>(pos), t_in - 1);
      const double frac = pos - static_cast<double>(lo);
      auto a = dst.row(lo);
      if (frac == 0.0 || lo + 1 >= t_in) {
        for (std::size_t c = 0; c < d; ++c) a[c] += gj[c];
      } else {
        auto b = dst.row(lo + 1);
        for (std::size_t c = 0; c < d; ++c) {
          a[c] += (1.0 - frac) * gj[c];
          b[c] += frac * gj[c];
        }
      }
    }
  });
}

Var scale_rows(Var x, Var w) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  require_rank2("scale_rows", xv);
  if (wv.numel() != xv.rows()) {
    throw DimensionError("scale_rows: weights " + shape_string(wv.shape()) + " vs input " + shape_string(xv.shape()));
  }
  Tensor out = xv;
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    for (double& v : out.row(r)) v *= wv[r];
  }
  return x.tape->record("scale_rows", std::move(out), {x, w}, [x, w](const Tensor& g, Tape& tape) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    const std::size_t d = xv.cols();
    Tensor* gx = x.requires_grad() ? &tape.grad_buffer(x.id) : nullptr;
    Tensor* gw = w.requires_grad() ? &tape.grad_buffer(w.id) : nullptr;
    for (std::size_t r = 0; r < xv.rows(); ++r) {
      auto gr = g.row(r);
      if (gx) {
        auto dr = gx->row(r);
        for (std::size_t c = 0; c < d; ++c) dr[c] += wv[r] * gr[c];
      }
      if (gw) {
        auto xr = xv.row(r);
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c) dot += gr[c] * xr[c];
        (*gw)[r] += dot;
      }
    }
  });
}

Var zero_rows(Var x, const ValidMask& valid) {
  const Tensor& xv = x.value();
  require_rank2("zero_rows", xv);
  if (valid.size() != xv.rows()) {
    throw DimensionError("zero_rows: " + std::to_string(valid.size()) + " flags for input " + shape_string(xv.shape()));
  }
  if (std::all_of(valid.begin(), valid.end(), [](bool v) { return v; })) return x;
  Tensor out = xv;
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    if (!valid[r]) std::fill(out.row(r).begin(), out.row(r).end(), 0.0);
  }
  return x.tape->record("zero_rows", std::move(out), {x}, [x, valid](const Tensor& g, Tape& tape) {
    auto& dst = tape.grad_buffer(x.id);
    for (std::size_t r = 0; r < valid.size(); ++r) {
      if (!valid[r]) continue;
      auto dr = dst.row(r);
      auto gr = g.row(r);
      for (std::size_t c = 0; c < dr.size(); ++c) dr[c] += gr[c];
    }
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  const Tensor& xv = x.value();
  require_rank2("slice_rows", xv);
  if (count == 0 || begin + count > xv.rows()) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + shape_string(xv.shape()));
  }
  const std::size_t d = xv.cols();
  Tensor out({count, d});
  std::copy_n(xv.data().data() + begin * d, count * d, out.data().data());
  return x.tape->record("slice_rows", std::move(out), {x}, [x, begin, count, d](const Tensor& g, Tape& tape) {
    auto dst = tape.grad_buffer(x.id).data().subspan(begin * d, count * d);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  const Tensor& xv = x.value();
  require_rank2("slice_cols", xv);
  if (count == 0 || begin + count > xv.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + shape_string(xv.shape()));
  }
  Tensor out({xv.rows(), count});
  for (std::size_t r = 0; r < xv.rows(); ++r) std::copy_n(xv.row(r).data() + begin, count, out.row(r).data());
  return x.tape->record("slice_cols", std::move(out), {x}, [x, begin, count](const Tensor& g, Tape& tape) {
    auto& dst = tape.grad_buffer(x.id);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto dr = dst.row(r).subspan(begin, count);
      auto gr = g.row(r);
      for (std::size_t c = 0; c < count; ++c) dr[c] += gr[c];
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t rows = parts.front().value().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    require_rank2("concat_cols", p.value());
    if (p.value().rows() != rows) {
      throw DimensionError("concat_cols: row count " + shape_string(p.shape()) + " vs " +
                           shape_string(parts.front().shape()));
    }
    cols += p.value().cols();
  }
  Tensor out({rows, cols});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(pv.row(r).data(), pv.cols(), out.row(r).data() + offset);
    offset += pv.cols();
  }
  return parts.front().tape->record("concat_cols", std::move(out), parts, [parts](const Tensor& g, Tape& tape) {
    std::size_t offset = 0;
    for (const Var& p : parts) {
      const std::size_t c = p.value().cols();
      if (p.requires_grad()) {
        auto& dst = tape.grad_buffer(p.id);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          auto dr = dst.row(r);
          auto gr = g.row(r).subspan(offset, c);
          for (std::size_t k = 0; k < c; ++k) dr[k] += gr[k];
        }
      }
      offset += c;
    }
  });
}

Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no inputs");
  const std::size_t d = rows.front().value().numel();
  Tensor out({rows.size(), d});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Tensor& v = rows[r].value();
    if (v.numel() != d) {
      throw DimensionError("stack_rows: " + shape_string(v.shape()) + " vs " + shape_string(rows.front().shape()));
    }
    std::copy_n(v.data().data(), d, out.row(r).data());
  }
  return rows.front().tape->record("stack_rows", std::move(out), rows, [rows, d](const Tensor& g, Tape& tape) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (!rows[r].requires_grad()) continue;
      auto dst = tape.grad_buffer(rows[r].id).data();
      auto gr = g.row(r);
      for (std::size_t c = 0; c < d; ++c) dst[c] += gr[c];
    }
  });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.tape->record("reshape", std::move(out), {x}, [x](const Tensor& g, Tape& tape) {
    auto dst = tape.grad_buffer(x.id).data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
  });
}

Var sum(Var x) {
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  return x.tape->record("sum", Tensor::scalar(total), {x}, [x](const Tensor& g, Tape& tape) {
    const double s = g[0];
    for (double& v : tape.grad_buffer(x.id).data()) v += s;
  });
}

Var cross_entropy_mean(Var logits, std::span<const std::size_t> labels) {
  const Tensor& lv = logits.value();
  require_rank2("cross_entropy_mean", lv);
  if (labels.size() != lv.rows()) {
    throw DimensionError("cross_entropy_mean: " + std::to_string(labels.size()) + " labels for logits " +
                         shape_string(lv.shape()));
  }
  const std::size_t classes = lv.cols();
  Tensor probs(lv.shape());
  double total = 0.0;
  for (std::size_t r = 0; r < lv.rows(); ++r) {
    if (labels[r] >= classes) {
      throw ValidationError("cross_entropy: label " + std::to_string(labels[r]) + " out of range for " +
                            std::to_string(classes) + " classes");
    }
    auto row = lv.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    const double lse = mx + std::log(z);
    total += lse - row[labels[r]];
    auto pr = probs.row(r);
    for (std::size_t c = 0; c < classes; ++c) pr[c] = std::exp(row[c] - lse);
  }
  const double inv_batch = 1.0 / static_cast<double>(lv.rows());
  std::vector<std::size_t> owned(labels.begin(), labels.end());
  return logits.tape->record(
      "cross_entropy_mean", Tensor::scalar(total * inv_batch), {logits},
      [logits, inv_batch, probs = std::move(probs), owned = std::move(owned)](const Tensor& g, Tape& tape) {
        auto& dst = tape.grad_buffer(logits.id);
        const double s = g[0] * inv_batch;
        for (std::size_t r = 0; r < probs.rows(); ++r) {
          auto dr = dst.row(r);
          auto pr = probs.row(r);
          for (std::size_t c = 0; c < pr.size(); ++c) dr[c] += s * (pr[c] - (c == owned[r] ? 1.0 : 0.0));
        }
      });
}

}  // namespace mwafm
