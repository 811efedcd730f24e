#pragma once

#include <cmath>
#include <numbers>

#include "cgkoop/numcore/linalg.hpp"
#include "cgkoop/pdelab/spectral.hpp"

namespace oracle {

using cgkoop::num::Tensor;
using cgkoop::pde::Equation;
using cgkoop::pde::GridSpec;
using cgkoop::pde::SpectralSolver;
using std::numbers::pi;
namespace num = cgkoop::num;

// Cole–Hopf: u = −2ν φ_x/φ with φ solving the heat equation from
// φ0 = exp(−(1 − cos 2πx)/(4πν)) = e^{−a}(I0(a) + 2Σ I_n(a) cos 2πnx), a = 1/(4πν).
inline double cole_hopf_sine(double x, double t, double nu) {
  const double a = 1.0 / (4 * pi * nu);
  double num = 0, den = std::cyl_bessel_i(0.0, a);
  for (int n = 1; n < 80; ++n) {
    const double in = std::cyl_bessel_i(static_cast<double>(n), a) * std::exp(-nu * 4 * pi * pi * n * n * t);
    den += 2 * in * std::cos(2 * pi * n * x);
    num += 2 * in * 2 * pi * n * std::sin(2 * pi * n * x);
  }
  return 2 * nu * num / den;
}

inline Tensor field(const GridSpec& g, double (*f)(double, double), double param) {
  Tensor u({g.n});
  const auto x = g.points();
  for (std::size_t j = 0; j < g.n; ++j) u[j] = f(x[j], param);
  return u;
}

// Terminal error against a dt/4 reference, at dt and dt/2.
inline double richardson_factor(Equation eq, const GridSpec& g, const Tensor& u0, double nu, double t, double dt) {
  auto run = [&](double h) { return SpectralSolver(eq, g, h, nu).advance(u0, static_cast<std::size_t>(std::llround(t / h))); };
  const Tensor ref = run(dt / 4);
  return num::max_abs_diff(run(dt), ref) / num::max_abs_diff(run(dt / 2), ref);
}

}  // namespace oracle
