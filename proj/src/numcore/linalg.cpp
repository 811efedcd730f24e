#include "cgkoop/numcore/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cgkoop/errors.hpp"

namespace cgkoop::num {

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.size() != b.size() || a.rows() != b.rows()) {
    throw ShapeError(std::string(op) + ": shapes " + a.shape_string() + " and " + b.shape_string() +
                     " differ");
  }
}

template <class F>
Tensor map(const Tensor& a, F f) {
  Tensor out = a;
  for (double& v : out.data()) v = f(v);
  return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: inner dims differ, " + a.shape_string() + " x " + b.shape_string());
  }
  Tensor out = Tensor::matrix(m, n);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = po + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = pa[i * k + p];
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out = Tensor::matrix(n, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out(j, i) = a(i, j);
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  Tensor out = a;
  auto o = out.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += y[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  Tensor out = a;
  auto o = out.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= y[i];
  return out;
}

Tensor scale(const Tensor& a, double s) {
  return map(a, [s](double v) { return v * s; });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same(a, b, "hadamard");
  Tensor out = a;
  auto o = out.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= y[i];
  return out;
}

Tensor add_row(const Tensor& x, const Tensor& bias) {
  const std::size_t n = x.cols();
  if (bias.size() != n) {
    throw ShapeError("add_row: bias " + bias.shape_string() + " does not match " + x.shape_string());
  }
  Tensor out = x;
  auto o = out.data();
  auto b = bias.data();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t j = 0; j < n; ++j) o[r * n + j] += b[j];
  }
  return out;
}

Tensor tanh(const Tensor& a) {
  return map(a, [](double v) { return std::tanh(v); });
}

Tensor square(const Tensor& a) {
  return map(a, [](double v) { return v * v; });
}

Tensor softplus(const Tensor& a) {
  return map(a, [](double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return Tensor::scalar(s);
}

Tensor mean(const Tensor& a) {
  if (a.empty()) throw ShapeError("mean of empty tensor");
  return Tensor::scalar(sum(a).item() / static_cast<double>(a.size()));
}

Tensor slice(const Tensor& a, std::size_t offset, std::size_t count) {
  if (count == 0 || offset + count > a.size()) {
    throw ShapeError("slice [" + std::to_string(offset) + ", " + std::to_string(offset + count) +
                     ") out of range for " + a.shape_string());
  }
  std::vector<double> d(a.data().begin() + static_cast<std::ptrdiff_t>(offset),
                        a.data().begin() + static_cast<std::ptrdiff_t>(offset + count));
  const std::array<std::size_t, 1> dims{count};
  return Tensor(std::span<const std::size_t>(dims), std::move(d));
}

Tensor reshape(const Tensor& a, std::initializer_list<std::size_t> dims) {
  return a.reshaped(dims);
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const std::size_t inner = parts.front().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != inner) {
      throw ShapeError("concat: trailing extent " + p.shape_string() + " vs " + parts.front().shape_string());
    }
    rows += p.rows();
  }
  std::vector<double> data;
  data.reserve(rows * inner);
  for (const auto& p : parts) data.insert(data.end(), p.data().begin(), p.data().end());
  if (parts.front().rank() <= 2) return Tensor::matrix(rows, inner, std::move(data));
  std::vector<std::size_t> dims(parts.front().dims().begin(), parts.front().dims().end());
  dims[0] = rows;
  return Tensor(dims, std::move(data));
}

Tensor diag_embed(const Tensor& v) {
  const std::size_t n = v.size();
  Tensor out = Tensor::matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = v[i];
  return out;
}

Tensor symmetrize(const Tensor& a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw ShapeError("symmetrize: non-square " + a.shape_string());
  Tensor out = a;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = 0.5 * (a(i, j) + a(j, i));
      out(i, j) = s;
      out(j, i) = s;
    }
  }
  return out;
}

double max_abs(const Tensor& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double frobenius_norm(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

std::optional<PivotFailure> try_ldlt(const Tensor& a, Ldlt& out) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw ShapeError("ldlt: non-square " + a.shape_string());
  out.lower = Tensor::identity(n);
  out.diag.assign(n, 0.0);
  Tensor& l = out.lower;
  for (std::size_t j = 0; j < n; ++j) {
    double dj = a(j, j);
    for (std::size_t k = 0; k < j; ++k) dj -= l(j, k) * l(j, k) * out.diag[k];
    if (!(dj > 0.0)) return PivotFailure{j, dj};
    out.diag[j] = dj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k) * out.diag[k];
      l(i, j) = s / dj;
    }
  }
  return std::nullopt;
}

Ldlt ldlt(const Tensor& a) {
  Ldlt f;
  if (auto fail = try_ldlt(a, f)) {
    throw NumericalError("matrix is not positive definite: pivot " + std::to_string(fail->index) + " = " +
                             std::to_string(fail->value),
                         fail->index, fail->value);
  }
  return f;
}

Tensor Ldlt::solve(const Tensor& b) const {
  const std::size_t n = this->n();
  if (b.rows() != n) throw ShapeError("solve: rhs " + b.shape_string() + " vs system of order " + std::to_string(n));
  const std::size_t m = b.cols();
  Tensor x = Tensor::matrix(n, m, std::vector<double>(b.data().begin(), b.data().end()));
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = x(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= lower(i, k) * x(k, c);
      x(i, c) = s;
    }
    for (std::size_t i = 0; i < n; ++i) x(i, c) /= diag[i];
    for (std::size_t ii = n; ii-- > 0;) {
      double s = x(ii, c);
      for (std::size_t k = ii + 1; k < n; ++k) s -= lower(k, ii) * x(k, c);
      x(ii, c) = s;
    }
  }
  return x;
}

Tensor solve_spd(const Tensor& a, const Tensor& b) {
  return ldlt(a).solve(b);
}

std::vector<double> symmetric_eigenvalues(const Tensor& a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw ShapeError("symmetric_eigenvalues: non-square " + a.shape_string());
  Tensor m = symmetrize(a);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) off += m(i, j) * m(i, j);
    }
    if (off < 1e-300) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (m(p, q) == 0.0) continue;
        const double theta = (m(q, q) - m(p, p)) / (2.0 * m(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double mkp = m(k, p), mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double mpk = m(p, k), mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = m(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

}  // namespace cgkoop::num
