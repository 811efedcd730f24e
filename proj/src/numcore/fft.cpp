#include "cgkoop/numcore/fft.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cgkoop/errors.hpp"

namespace cgkoop::num {

bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

FftPlan::FftPlan(std::size_t n) : n_(n) {
  if (!is_power_of_two(n)) throw ShapeError("fft length " + std::to_string(n) + " is not a power of two");
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  bitrev_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
    bitrev_[i] = r;
  }
  twiddles_.resize(n / 2 > 0 ? n / 2 : 1);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    twiddles_[k] = Complex(std::cos(ang), std::sin(ang));
  }
}

void FftPlan::transform(std::span<Complex> x, bool inverse) const {
  if (x.size() != n_) {
    throw ShapeError("fft plan of length " + std::to_string(n_) + " applied to " + std::to_string(x.size()));
  }
  for (std::size_t i = 0; i < n_; ++i) {
    if (i < bitrev_[i]) std::swap(x[i], x[bitrev_[i]]);
  }
  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n_ / len;
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        Complex w = twiddles_[k * stride];
        if (inverse) w = std::conj(w);
        const Complex t = w * x[start + k + half];
        x[start + k + half] = x[start + k] - t;
        x[start + k] += t;
      }
    }
  }
  if (inverse) {
    const double s = 1.0 / static_cast<double>(n_);
    for (auto& v : x) v *= s;
  }
}

void FftPlan::forward(std::span<Complex> x) const { transform(x, false); }
void FftPlan::inverse(std::span<Complex> x) const { transform(x, true); }

ComplexVector fft(std::span<const Complex> x) {
  ComplexVector out(x.begin(), x.end());
  FftPlan(x.size()).forward(out);
  return out;
}

ComplexVector ifft(std::span<const Complex> x) {
  ComplexVector out(x.begin(), x.end());
  FftPlan(x.size()).inverse(out);
  return out;
}

ComplexVector fft_real(std::span<const double> x) {
  ComplexVector out(x.begin(), x.end());
  FftPlan(x.size()).forward(out);
  return out;
}

}  // namespace cgkoop::num
