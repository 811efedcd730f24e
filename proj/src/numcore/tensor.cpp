#include "cgkoop/numcore/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cgkoop/errors.hpp"

namespace cgkoop::num {

namespace {

std::size_t product(std::span<const std::size_t> dims) {
  std::size_t p = 1;
  for (auto d : dims) p *= d;
  return p;
}

}  // namespace

std::string shape_string(std::span<const std::size_t> dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << 'x';
    os << dims[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(std::initializer_list<std::size_t> dims, double fill)
    : Tensor(std::span<const std::size_t>(dims.begin(), dims.size()), fill) {}

Tensor::Tensor(std::span<const std::size_t> dims, double fill) {
  set_dims(dims);
  data_.assign(product(dims), fill);
}

Tensor::Tensor(std::span<const std::size_t> dims, std::vector<double> data) : data_(std::move(data)) {
  set_dims(dims);
  if (product(dims) != data_.size()) {
    throw ShapeError("tensor payload of " + std::to_string(data_.size()) +
                     " entries does not match dims " + cgkoop::num::shape_string(dims));
  }
}

void Tensor::set_dims(std::span<const std::size_t> dims) {
  if (dims.size() > kMaxRank) throw ShapeError("tensor rank above " + std::to_string(kMaxRank));
  for (auto d : dims) {
    if (d == 0) throw ShapeError("tensor dims must be positive, got " + cgkoop::num::shape_string(dims));
  }
  rank_ = dims.size();
  dims_.fill(0);
  std::copy(dims.begin(), dims.end(), dims_.begin());
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, double fill) {
  return Tensor({rows, cols}, fill);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  const std::array<std::size_t, 2> d{rows, cols};
  return Tensor(std::span<const std::size_t>(d), std::move(data));
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged rows in Tensor::from_rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return matrix(r, c, std::move(data));
}

Tensor Tensor::column(std::vector<double> values) {
  const std::size_t n = values.size();
  return matrix(n, 1, std::move(values));
}

Tensor Tensor::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return matrix(1, n, std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t = matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data_.assign(1, v);
  return t;
}

std::size_t Tensor::dim(std::size_t i) const {
  if (i >= rank_) throw ShapeError("dim index " + std::to_string(i) + " out of range for " + shape_string());
  return dims_[i];
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor with shape " + shape_string());
  return data_[0];
}

Tensor Tensor::reshaped(std::span<const std::size_t> dims) const& {
  Tensor copy = *this;
  return std::move(copy).reshaped(dims);
}

Tensor Tensor::reshaped(std::span<const std::size_t> dims) && {
  if (product(dims) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_string() + " to " + cgkoop::num::shape_string(dims));
  }
  Tensor out;
  out.set_dims(dims);
  out.data_ = std::move(data_);
  return out;
}

bool Tensor::same_shape(const Tensor& other) const noexcept {
  if (data_.size() != other.data_.size()) return false;
  if (rank_ != other.rank_) return false;
  for (std::size_t i = 0; i < rank_; ++i) {
    if (dims_[i] != other.dims_[i]) return false;
  }
  return true;
}

bool Tensor::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_string() const {
  if (rank_ == 0) return data_.empty() ? "[empty]" : "[]";
  return cgkoop::num::shape_string(dims());
}

}  // namespace cgkoop::num
