#include "cgkoop/pdelab/spectral.hpp"

#include <cmath>
#include <numbers>

#include "cgkoop/errors.hpp"

namespace cgkoop::pde {

namespace {

constexpr int kContourPoints = 32;

bool all_finite(const ComplexVector& v) {
  for (const Complex& c : v) {
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) return false;
  }
  return true;
}

}  // namespace

std::vector<double> GridSpec::points() const {
  std::vector<double> x(n);
  for (std::size_t j = 0; j < n; ++j) x[j] = static_cast<double>(j) * dx();
  return x;
}

double GridSpec::wavenumber(std::size_t j) const {
  const double m = j <= n / 2 ? static_cast<double>(j) : static_cast<double>(j) - static_cast<double>(n);
  return 2.0 * std::numbers::pi * m / length;
}

void GridSpec::validate() const {
  if (!num::is_power_of_two(n) || n < 4) throw ConfigError("grid.n must be a power of two >= 4, got " + std::to_string(n));
  if (!(length > 0.0)) throw ConfigError("grid.length must be positive");
}

std::size_t SolveConfig::steps() const {
  const double r = t_final / dt;
  const double k = std::round(r);
  if (std::abs(r - k) > 1e-9 * std::max(1.0, r)) {
    throw ConfigError("solve.t_final must be an integer multiple of solve.dt");
  }
  return static_cast<std::size_t>(k);
}

void SolveConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("solve.dt must be positive");
  if (!(t_final > 0.0)) throw ConfigError("solve.t_final must be positive");
  if (record_every == 0) throw ConfigError("solve.record_every must be >= 1");
  if (nu < 0.0) throw ConfigError("solve.nu must be >= 0");
  if (steps() % record_every != 0) throw ConfigError("solve.record_every must divide the step count");
}

std::string to_string(Equation eq) {
  return eq == Equation::Burgers ? "burgers" : "ks";
}

Equation parse_equation(const std::string& s) {
  if (s == "burgers") return Equation::Burgers;
  if (s == "ks") return Equation::KuramotoSivashinsky;
  throw ConfigError("dataset.pde must be 'burgers' or 'ks', got '" + s + "'");
}

Tensor to_physical(const num::FftPlan& plan, ComplexVector v) {
  plan.inverse(v);
  Tensor u({v.size()});
  for (std::size_t j = 0; j < v.size(); ++j) u[j] = v[j].real();
  return u;
}

ComplexVector to_spectral(const num::FftPlan& plan, const Tensor& u) {
  ComplexVector v(u.size());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = u[j];
  plan.forward(v);
  return v;
}

SpectralSolver::SpectralSolver(Equation eq, GridSpec grid, double dt, double nu)
    : grid_(grid), dt_(dt), plan_((grid.validate(), grid.n)) {
  if (!(dt > 0.0)) throw ConfigError("solver dt must be positive");
  const std::size_t n = grid.n;
  mask_.assign(n, 0.0);
  g_.assign(n, Complex(0.0, 0.0));
  e_.resize(n);
  e2_.resize(n);
  q_.resize(n);
  f1_.resize(n);
  f2_.resize(n);
  f3_.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t m = j <= n / 2 ? j : n - j;
    if (3 * m < n) mask_[j] = 1.0;
    const double k = grid.wavenumber(j);
    if (j != n / 2) g_[j] = Complex(0.0, -0.5 * k * mask_[j]);
    const double lin = eq == Equation::Burgers ? -nu * k * k : k * k - k * k * k * k;
    const double hl = dt * lin;
    e_[j] = std::exp(hl);
    e2_[j] = std::exp(hl / 2);
    // Contour-integral evaluation of the φ-functions, stable as hl → 0.
    Complex q{}, a{}, b{}, c{};
    for (int p = 0; p < kContourPoints; ++p) {
      const Complex r = std::exp(Complex(0.0, 2.0 * std::numbers::pi * (p + 0.5) / kContourPoints));
      const Complex lr = hl + r;
      const Complex ex = std::exp(lr), lr3 = lr * lr * lr;
      q += (std::exp(lr / 2.0) - 1.0) / lr;
      a += (-4.0 - lr + ex * (4.0 - 3.0 * lr + lr * lr)) / lr3;
      b += (2.0 + lr + ex * (lr - 2.0)) / lr3;
      c += (-4.0 - 3.0 * lr - lr * lr + ex * (4.0 - lr)) / lr3;
    }
    q_[j] = dt * q.real() / kContourPoints;
    f1_[j] = dt * a.real() / kContourPoints;
    f2_[j] = dt * b.real() / kContourPoints;
    f3_[j] = dt * c.real() / kContourPoints;
  }
}

ComplexVector SpectralSolver::nonlinear_hat(const ComplexVector& v) const {
  ComplexVector w = v;
  plan_.inverse(w);
  for (Complex& z : w) z = Complex(z.real() * z.real(), 0.0);
  plan_.forward(w);
  for (std::size_t j = 0; j < w.size(); ++j) w[j] *= g_[j];
  return w;
}

void SpectralSolver::step_hat(ComplexVector& v) const {
  const std::size_t n = v.size();
  const ComplexVector nv = nonlinear_hat(v);
  ComplexVector a(n), b(n), c(n);
  for (std::size_t j = 0; j < n; ++j) a[j] = e2_[j] * v[j] + q_[j] * nv[j];
  const ComplexVector na = nonlinear_hat(a);
  for (std::size_t j = 0; j < n; ++j) b[j] = e2_[j] * v[j] + q_[j] * na[j];
  const ComplexVector nb = nonlinear_hat(b);
  for (std::size_t j = 0; j < n; ++j) c[j] = e2_[j] * a[j] + q_[j] * (2.0 * nb[j] - nv[j]);
  const ComplexVector nc = nonlinear_hat(c);
  for (std::size_t j = 0; j < n; ++j) {
    v[j] = e_[j] * v[j] + nv[j] * f1_[j] + 2.0 * (na[j] + nb[j]) * f2_[j] + nc[j] * f3_[j];
  }
}

Tensor SpectralSolver::advance(const Tensor& u, std::size_t steps) const {
  if (u.size() != grid_.n) throw ShapeError("advance: field " + u.shape_string() + " vs grid of " + std::to_string(grid_.n));
  ComplexVector v = to_spectral(plan_, u);
  for (std::size_t s = 0; s < steps; ++s) step_hat(v);
  if (!all_finite(v)) throw DivergenceError("spectral solver blew up", steps);
  return to_physical(plan_, std::move(v));
}

Tensor SpectralSolver::solve(const Tensor& u0, std::size_t steps, std::size_t record_every) const {
  if (u0.size() != grid_.n) throw ShapeError("solve: field " + u0.shape_string() + " vs grid of " + std::to_string(grid_.n));
  if (record_every == 0 || steps % record_every != 0) throw ConfigError("record_every must divide the step count");
  const std::size_t rows = steps / record_every + 1, n = grid_.n;
  Tensor out = Tensor::matrix(rows, n);
  ComplexVector v = to_spectral(plan_, u0);
  std::copy(u0.data().begin(), u0.data().end(), out.data().begin());
  for (std::size_t s = 1; s <= steps; ++s) {
    step_hat(v);
    if (s % record_every != 0) continue;
    if (!all_finite(v)) throw DivergenceError("spectral solver blew up at step " + std::to_string(s), s);
    const Tensor u = to_physical(plan_, v);
    std::copy(u.data().begin(), u.data().end(), out.data().begin() + (s / record_every) * n);
  }
  return out;
}

Tensor solve_burgers(const Tensor& u0, const GridSpec& grid, const SolveConfig& cfg) {
  cfg.validate();
  return SpectralSolver(Equation::Burgers, grid, cfg.dt, cfg.nu).solve(u0, cfg.steps(), cfg.record_every);
}

Tensor solve_ks(const Tensor& u0, const GridSpec& grid, const SolveConfig& cfg) {
  cfg.validate();
  return SpectralSolver(Equation::KuramotoSivashinsky, grid, cfg.dt).solve(u0, cfg.steps(), cfg.record_every);
}

Tensor ks_preset_initial(const GridSpec& grid) {
  Tensor u({grid.n});
  const auto x = grid.points();
  for (std::size_t j = 0; j < grid.n; ++j) u[j] = 0.1 * std::cos(x[j] / 16) * (1 + 2 * std::sin(x[j] / 16));
  return u;
}

}  // namespace cgkoop::pde
