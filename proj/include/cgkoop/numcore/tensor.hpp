#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace cgkoop::num {

/// Dense row-major tensor of doubles, rank 0..4.
///
/// Vectors that take part in linear algebra are stored as column matrices
/// (n x 1); the elementwise and reduction kernels do not care about rank.
class Tensor {
 public:
  static constexpr std::size_t kMaxRank = 4;
  using Dims = std::array<std::size_t, kMaxRank>;

  Tensor() = default;
  Tensor(std::initializer_list<std::size_t> dims, double fill = 0.0);
  Tensor(std::span<const std::size_t> dims, double fill = 0.0);
  Tensor(std::span<const std::size_t> dims, std::vector<double> data);
  Tensor(std::initializer_list<std::size_t> dims, std::vector<double> data)
      : Tensor(std::span<const std::size_t>(dims.begin(), dims.size()), std::move(data)) {}

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  /// Builds a matrix from nested row lists, e.g. `from_rows({{1,2},{3,4}})`.
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor column(std::vector<double> values);
  static Tensor row(std::vector<double> values);
  static Tensor identity(std::size_t n);
  static Tensor scalar(double v);

  std::size_t rank() const noexcept { return rank_; }
  std::size_t dim(std::size_t i) const;
  std::span<const std::size_t> dims() const noexcept { return {dims_.data(), rank_}; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  /// Matrix view of a rank-2 tensor; rank-1 reads as a column, rank-0 as 1x1.
  std::size_t rows() const noexcept {
    if (rank_ == 0) return data_.empty() ? 0 : 1;
    return dims_[0];
  }
  std::size_t cols() const noexcept {
    if (rank_ == 2) return dims_[1];
    if (rank_ < 2) return data_.empty() ? 0 : 1;
    std::size_t c = 1;
    for (std::size_t i = 1; i < rank_; ++i) c *= dims_[i];
    return c;
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }

  /// Scalar value of a single-element tensor.
  double item() const;

  Tensor reshaped(std::span<const std::size_t> dims) const&;
  Tensor reshaped(std::span<const std::size_t> dims) &&;
  Tensor reshaped(std::initializer_list<std::size_t> dims) const& {
    return reshaped(std::span<const std::size_t>(dims.begin(), dims.size()));
  }

  bool same_shape(const Tensor& other) const noexcept;
  bool all_finite() const noexcept;
  std::string shape_string() const;

  friend bool operator==(const Tensor& a, const Tensor& b) noexcept {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  void set_dims(std::span<const std::size_t> dims);

  Dims dims_{};
  std::size_t rank_ = 0;
  std::vector<double> data_;
};

std::string shape_string(std::span<const std::size_t> dims);

}  // namespace cgkoop::num
