#include "cgkoop/pdelab/grf.hpp"

#include <cmath>

namespace cgkoop::pde {

double GrfSpec::mode_variance(const GridSpec& grid, std::size_t k) const {
  const double w = grid.wavenumber(k);
  const double denom = w * w + shift;
  return amplitude / (denom * denom);
}

Tensor sample_grf(const GridSpec& grid, num::RngStream& rng, const GrfSpec& spec) {
  grid.validate();
  const std::size_t n = grid.n;
  num::ComplexVector c(n);
  c[0] = std::sqrt(spec.mode_variance(grid, 0)) * rng.normal();
  for (std::size_t k = 1; k < n / 2; ++k) {
    const double s = std::sqrt(spec.mode_variance(grid, k) / 2);
    const double re = rng.normal(), im = rng.normal();
    c[k] = num::Complex(s * re, s * im);
    c[n - k] = std::conj(c[k]);
  }
  c[n / 2] = std::sqrt(spec.mode_variance(grid, n / 2)) * rng.normal();
  // u_j = Σ_k ĉ_k e^{2πijk/n}, i.e. n times the inverse transform.
  Tensor u = to_physical(num::FftPlan(n), std::move(c));
  for (double& x : u.data()) x *= static_cast<double>(n);
  return u;
}

}  // namespace cgkoop::pde
