#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "cgkoop/autodiff/tape.hpp"

namespace cgkoop::ad {

// Differentiable counterparts of the cgkoop::num kernels. The names match so
// that model code templated on the value type resolves either set by ADL.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
Var hadamard(Var a, Var b);
Var add_row(Var x, Var bias);
Var tanh(Var a);
Var square(Var a);
Var softplus(Var a);
Var sum(Var a);
Var mean(Var a);
Var slice(Var a, std::size_t offset, std::size_t count);
Var reshape(Var a, std::initializer_list<std::size_t> dims);
Var concat(std::span<const Var> parts);
Var diag_embed(Var v);
/// x = a⁻¹·b. Backward: ḡ_b = a⁻¹·ḡ, ḡ_a = −sym(ḡ_b·xᵀ).
Var solve_spd(Var a, Var b);
Var symmetrize(Var a);

inline const Tensor& value_of(const Var& v) { return v.value(); }
/// Constant on the same tape as `like`.
inline Var lift(const Var& like, Tensor t) { return like.tape()->constant(std::move(t)); }

}  // namespace cgkoop::ad

namespace cgkoop::num {

inline const Tensor& value_of(const Tensor& t) { return t; }
inline Tensor lift(const Tensor&, Tensor t) { return t; }

}  // namespace cgkoop::num
