#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "cgkoop/numcore/tensor.hpp"

namespace cgkoop::num {

// Matrix kernels read operands through Tensor::rows()/cols(), so rank-1 inputs
// act as columns.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor hadamard(const Tensor& a, const Tensor& b);
/// x[B x n] + 1·bᵀ, where `bias` holds n entries in any layout.
Tensor add_row(const Tensor& x, const Tensor& bias);
Tensor tanh(const Tensor& a);
Tensor square(const Tensor& a);
/// log(1 + exp(a)), evaluated without overflow.
Tensor softplus(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Contiguous run of `count` entries starting at flat `offset`, as a rank-1 tensor.
Tensor slice(const Tensor& a, std::size_t offset, std::size_t count);
Tensor reshape(const Tensor& a, std::initializer_list<std::size_t> dims);
/// Stacks along the leading axis; trailing extents must agree.
Tensor concat(std::span<const Tensor> parts);
/// Square matrix with `v` on its diagonal.
Tensor diag_embed(const Tensor& v);
/// (a + aᵀ) / 2.
Tensor symmetrize(const Tensor& a);

double max_abs(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
double frobenius_norm(const Tensor& a);

/// Unit-lower-triangular L and diagonal D with A = L·D·Lᵀ. Reads the lower
/// triangle of A only.
struct Ldlt {
  Tensor lower;
  std::vector<double> diag;
  std::size_t n() const noexcept { return diag.size(); }
  /// Solves A·x = b for every column of b.
  Tensor solve(const Tensor& b) const;
};

struct PivotFailure {
  std::size_t index;
  double value;
};

/// LDLᵀ factorization; returns the first non-positive pivot on failure.
std::optional<PivotFailure> try_ldlt(const Tensor& a, Ldlt& out);
/// Throws NumericalError carrying the pivot index when `a` is not SPD.
Ldlt ldlt(const Tensor& a);
/// x with a·x = b, for symmetric positive definite a.
Tensor solve_spd(const Tensor& a, const Tensor& b);

/// Eigenvalues of a symmetric matrix (cyclic Jacobi), ascending.
std::vector<double> symmetric_eigenvalues(const Tensor& a);

}  // namespace cgkoop::num
