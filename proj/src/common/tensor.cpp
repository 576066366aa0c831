#include "fedgan/common/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "fedgan/common/error.hpp"

namespace fedgan {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {
  if (shape_.empty()) throw DimensionError("tensor shape must have at least one axis");
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.empty()) throw DimensionError("tensor shape must have at least one axis");
  if (shape_size(shape_) != data_.size()) {
    throw DimensionError("tensor shape " + shape_to_string(shape_) + " holds " +
                         std::to_string(shape_size(shape_)) + " values, got " +
                         std::to_string(data_.size()));
  }
  require_finite("tensor construction");
}

Tensor Tensor::filled(Shape shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  t.require_finite("tensor construction");
  return t;
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_to_string(shape_));
  }
  return shape_[axis];
}

double& Tensor::at(std::size_t r, std::size_t c) { return data_[r * shape_.back() + c]; }

double Tensor::at(std::size_t r, std::size_t c) const {
  return data_[r * shape_.back() + c];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_to_string(shape_) + " to " +
                         shape_to_string(shape));
  }
  Tensor out;
  out.shape_ = std::move(shape);
  out.data_ = data_;
  return out;
}

std::size_t Tensor::row_size() const {
  if (shape_.size() <= 1) return 1;
  return shape_size(Shape(shape_.begin() + 1, shape_.end()));
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const {
  if (begin > end || end > shape_[0]) {
    throw DimensionError("row slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range for shape " + shape_to_string(shape_));
  }
  const std::size_t stride = row_size();
  Shape shape = shape_;
  shape[0] = end - begin;
  Tensor out;
  out.shape_ = std::move(shape);
  out.data_.assign(data_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                   data_.begin() + static_cast<std::ptrdiff_t>(end * stride));
  return out;
}

Tensor Tensor::row(std::size_t r) const {
  Tensor out = slice_rows(r, r + 1);
  if (shape_.size() == 1) {
    out.shape_ = {1};
  } else {
    out.shape_.erase(out.shape_.begin());
  }
  return out;
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

void Tensor::add_scaled(const Tensor& other, double scale) {
  require_same_shape(*this, other, "add_scaled");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
}

Tensor& Tensor::operator+=(const Tensor& other) {
  require_same_shape(*this, other, "tensor +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double scale) {
  for (double& v : data_) v *= scale;
  return *this;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::require_finite(const char* what) const {
  if (!all_finite()) {
    throw EvaluationError(std::string(what) + ": non-finite value in tensor of shape " +
                          shape_to_string(shape_));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* context) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(context) + ": shape " + shape_to_string(a.shape()) +
                         " does not match " + shape_to_string(b.shape()));
  }
}

Tensor stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw DimensionError("stack_rows: nothing to stack");
  Shape shape = rows.front().shape();
  std::vector<double> data;
  data.reserve(rows.size() * rows.front().size());
  for (const Tensor& r : rows) {
    require_same_shape(rows.front(), r, "stack_rows");
    data.insert(data.end(), r.data().begin(), r.data().end());
  }
  shape.insert(shape.begin(), rows.size());
  return Tensor(std::move(shape), std::move(data));
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: nothing to concatenate");
  Shape trailing(parts.front().shape().begin() + 1, parts.front().shape().end());
  std::size_t rows = 0;
  std::vector<double> data;
  for (const Tensor& p : parts) {
    if (Shape(p.shape().begin() + 1, p.shape().end()) != trailing) {
      throw DimensionError("concat_rows: shape " + shape_to_string(p.shape()) +
                           " does not match " + shape_to_string(parts.front().shape()));
    }
    rows += p.dim(0);
    data.insert(data.end(), p.data().begin(), p.data().end());
  }
  trailing.insert(trailing.begin(), rows);
  return Tensor(std::move(trailing), std::move(data));
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace fedgan
