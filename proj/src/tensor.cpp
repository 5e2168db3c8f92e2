#include "mwafm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mwafm/error.hpp"

namespace mwafm {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (shape_numel(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_string(shape_) + " does not match " + std::to_string(data_.size()) +
                         " elements");
  }
}

Tensor Tensor::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("max_abs_diff: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor interpolate_time(const Tensor& x, std::size_t length) {
  if (x.rank() != 2) throw DimensionError("interpolate_time expects [T x d], got " + shape_string(x.shape()));
  if (length == 0) throw DimensionError("interpolate_time target length must be positive");
  const std::size_t t_in = x.rows();
  const std::size_t d = x.cols();
  Tensor out({length, d});
  for (std::size_t j = 0; j < length; ++j) {
    if (t_in == 1 || length == 1) {
      std::copy_n(x.row(0).data(), d, out.row(j).data());
      continue;
    }
    const double pos = static_cast<double>(j) * static_cast<double>(t_in - 1) / static_cast<double>(length - 1);
    const auto lo = std::min(static_cast<std::size_t>(pos), t_in - 1);
    const double frac = pos - static_cast<double>(lo);
    auto dst = out.row(j);
    auto a = x.row(lo);
    if (frac == 0.0 || lo + 1 >= t_in) {
      std::copy_n(a.data(), d, dst.data());
    } else {
      auto b = x.row(lo + 1);
      for (std::size_t c = 0; c < d; ++c) dst[c] = a[c] + frac * (b[c] - a[c]);
    }
  }
  return out;
}

}  // namespace mwafm
