#pragma once

#include "cgkoop/numcore/rng.hpp"
#include "cgkoop/pdelab/spectral.hpp"

namespace cgkoop::pde {

/// Covariance a(−Δ + s·I)^{-2} on a periodic grid. Defaults a = 625, s = 25.
struct GrfSpec {
  double amplitude = 625.0;
  double shift = 25.0;

  /// Variance of the normalized DFT coefficient (1/n)Σ u_j e^{-2πijk/n} for mode k.
  double mode_variance(const GridSpec& grid, std::size_t k) const;
};

/// Draws a real periodic field. Each mode is an independent complex Gaussian
/// with E|ĉ_k|² = mode_variance(k); the k = 0 and Nyquist modes are real.
Tensor sample_grf(const GridSpec& grid, num::RngStream& rng, const GrfSpec& spec = {});

}  // namespace cgkoop::pde
