#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace cgkoop::num {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

bool is_power_of_two(std::size_t n) noexcept;

/// Iterative radix-2 Cooley–Tukey transform with cached twiddles.
/// Forward: X_k = Σ x_j e^{-2πijk/n} (no scaling); inverse applies 1/n.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);

  std::size_t size() const noexcept { return n_; }
  void forward(std::span<Complex> x) const;
  void inverse(std::span<Complex> x) const;

 private:
  void transform(std::span<Complex> x, bool inverse) const;

  std::size_t n_;
  std::vector<std::size_t> bitrev_;
  ComplexVector twiddles_;
};

ComplexVector fft(std::span<const Complex> x);
ComplexVector ifft(std::span<const Complex> x);
ComplexVector fft_real(std::span<const double> x);

}  // namespace cgkoop::num
