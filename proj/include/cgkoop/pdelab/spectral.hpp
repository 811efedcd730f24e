#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cgkoop/numcore/fft.hpp"
#include "cgkoop/numcore/tensor.hpp"

namespace cgkoop::pde {

using num::Complex;
using num::ComplexVector;
using num::Tensor;

/// Uniform periodic grid x_j = j·dx on [0, length).
struct GridSpec {
  double length = 1.0;
  std::size_t n = 64;

  double dx() const { return length / static_cast<double>(n); }
  std::vector<double> points() const;
  /// Angular wavenumber of FFT bin j.
  double wavenumber(std::size_t j) const;
  void validate() const;
};

struct SolveConfig {
  double dt = 1e-3;
  double t_final = 1.0;
  std::size_t record_every = 1;  // internal steps between stored rows
  double nu = 1e-3;               // Burgers only

  /// Internal step count; t_final must be an integer multiple of dt.
  std::size_t steps() const;
  void validate() const;
};

enum class Equation { Burgers, KuramotoSivashinsky };

std::string to_string(Equation eq);
Equation parse_equation(const std::string& s);

/// Pseudo-spectral ETDRK4 integrator for u_t = L u − (u²/2)_x with a diagonal
/// linear symbol: −ν k² (Burgers) or k² − k⁴ (KS). The nonlinear product is
/// formed in physical space and 2/3-rule dealiased.
///
/// Immutable after construction; advance() may be called concurrently.
class SpectralSolver {
 public:
  SpectralSolver(Equation eq, GridSpec grid, double dt, double nu = 0.0);

  const GridSpec& grid() const noexcept { return grid_; }
  double dt() const noexcept { return dt_; }

  /// Advances a physical-space field by `steps` internal steps.
  Tensor advance(const Tensor& u, std::size_t steps) const;
  /// Rows are the state every `record_every` steps, starting with u0.
  Tensor solve(const Tensor& u0, std::size_t steps, std::size_t record_every = 1) const;

  /// Spectral-space stepping, exposed for diagnostics.
  void step_hat(ComplexVector& v) const;
  ComplexVector nonlinear_hat(const ComplexVector& v) const;
  /// 1 for kept modes, 0 for the zeroed top third.
  const std::vector<double>& dealias_mask() const noexcept { return mask_; }

 private:
  GridSpec grid_;
  double dt_;
  num::FftPlan plan_;
  std::vector<double> mask_;
  ComplexVector g_;  // −i k/2, masked
  std::vector<double> e_, e2_, q_, f1_, f2_, f3_;
};

Tensor solve_burgers(const Tensor& u0, const GridSpec& grid, const SolveConfig& cfg);
Tensor solve_ks(const Tensor& u0, const GridSpec& grid, const SolveConfig& cfg);

/// u(x, 0) = 0.1·cos(x/16)·(1 + 2·sin(x/16)), taken verbatim (not periodic on L = 22).
Tensor ks_preset_initial(const GridSpec& grid);

Tensor to_physical(const num::FftPlan& plan, ComplexVector v);
ComplexVector to_spectral(const num::FftPlan& plan, const Tensor& u);

}  // namespace cgkoop::pde
