#pragma once

// Model and filter arithmetic written once for both value types: plain
// num::Tensor (inference) and ad::Var (training). Unqualified calls resolve
// to cgkoop::num or cgkoop::ad by argument-dependent lookup.
//
// Vectors are column matrices here; batched network inputs are rows.

#include <cstddef>
#include <string>
#include <vector>

#include "cgkoop/autodiff/ops.hpp"
#include "cgkoop/errors.hpp"
#include "cgkoop/model/mlp.hpp"
#include "cgkoop/model/state.hpp"
#include "cgkoop/numcore/linalg.hpp"

namespace cgkoop::model {

template <class T>
struct Coeffs {
  T F1;  // [d1 × 1]
  T G1;  // [d1 × dv]
  T F2;  // [dv × 1]
  T G2;  // [dv × dv]
};

template <class T>
struct Belief {
  T mu;     // [dv × 1]
  T sigma;  // [dv × dv]
};

template <class T>
struct ModelView {
  const StateSpec* spec = nullptr;
  MlpView<T> encoder;
  MlpView<T> decoder;
  MlpView<T> eta;
  T s1;  // diag(σ1²)
  T s2;  // diag(σ2²)
};

/// Reads (F1, G1, F2, G2) from `flat` starting at element `offset`.
template <class T>
Coeffs<T> unpack(const T& flat, std::size_t offset, const StateSpec& s) {
  const std::size_t d1 = s.d1(), dv = s.dv;
  Coeffs<T> c;
  c.F1 = reshape(slice(flat, offset, d1), {d1, 1});
  offset += d1;
  c.G1 = reshape(slice(flat, offset, d1 * dv), {d1, dv});
  offset += d1 * dv;
  c.F2 = reshape(slice(flat, offset, dv), {dv, 1});
  offset += dv;
  c.G2 = reshape(slice(flat, offset, dv * dv), {dv, dv});
  return c;
}

/// Row `r` of a [R × n] block as an [n × 1] column.
template <class T>
T row_as_column(const T& rows, std::size_t r, std::size_t n) {
  return reshape(slice(rows, r * n, n), {n, 1});
}

template <class T>
struct Step {
  T u1;  // [d1 × 1]
  T v;   // [dv × 1]
};

/// Noise-free conditional mean of one model step.
template <class T>
Step<T> step_mean(const Coeffs<T>& c, const T& v) {
  return {add(c.F1, matmul(c.G1, v)), add(c.F2, matmul(c.G2, v))};
}

/// Returns `m` if it factors, else `m + 1e-10·I` if that factors, else throws
/// NumericalError tagged with `step`.
template <class T>
T spd_guard(const T& m, std::size_t step) {
  const Tensor& mv = value_of(m);
  num::Ldlt f;
  if (!num::try_ldlt(mv, f)) return m;
  const T jittered = add(m, lift(m, num::scale(Tensor::identity(mv.rows()), 1e-10)));
  if (auto fail = num::try_ldlt(value_of(jittered), f)) {
    throw NumericalError("filter: innovation covariance not positive definite at step " + std::to_string(step) +
                             " (pivot " + std::to_string(fail->index) + " = " + std::to_string(fail->value) + ")",
                         fail->index, fail->value, step);
  }
  return jittered;
}

/// One conditional-Gaussian posterior update from u1ⁿ (through `c`) to u1ⁿ⁺¹.
template <class T>
Belief<T> cg_update(const Coeffs<T>& c, const Belief<T>& b, const T& u1_next, const T& s1, const T& s2,
                    std::size_t step) {
  const T g1s = matmul(c.G1, b.sigma);                  // G1 Σ
  const T cross = matmul(c.G2, transpose(g1s));         // G2 Σ G1ᵀ
  const T innov = spd_guard(add(s1, matmul(g1s, transpose(c.G1))), step);
  const T gain = transpose(solve_spd(innov, transpose(cross)));
  const T resid = sub(u1_next, add(c.F1, matmul(c.G1, b.mu)));
  Belief<T> out;
  out.mu = add(add(c.F2, matmul(c.G2, b.mu)), matmul(gain, resid));
  const T prior = add(matmul(matmul(c.G2, b.sigma), transpose(c.G2)), s2);
  out.sigma = symmetrize(sub(prior, matmul(gain, transpose(cross))));
  return out;
}

/// Runs the filter over u1 rows [N+1 × d1] and returns the N posterior beliefs.
/// Coefficients for all steps come from one batched η pass.
template <class T>
std::vector<Belief<T>> cg_filter(const ModelView<T>& m, const T& u1_rows, Belief<T> b, std::size_t n_steps) {
  const StateSpec& s = *m.spec;
  const std::size_t d1 = s.d1(), p = s.coeff_size();
  std::vector<Belief<T>> out;
  if (n_steps == 0) return out;
  out.reserve(n_steps);
  const T drivers = reshape(slice(u1_rows, 0, n_steps * d1), {n_steps, d1});
  const T eta_out = forward(m.eta, drivers);
  for (std::size_t n = 0; n < n_steps; ++n) {
    const Coeffs<T> c = unpack(eta_out, n * p, s);
    b = cg_update(c, b, row_as_column(u1_rows, n + 1, d1), m.s1, m.s2, n + 1);
    out.push_back(b);
  }
  return out;
}

/// Mean rollout from u1⁰ [d1 × 1], v⁰ [dv × 1]; returns N steps.
template <class T>
std::vector<Step<T>> rollout(const ModelView<T>& m, T u1, T v, std::size_t n_steps) {
  const StateSpec& s = *m.spec;
  std::vector<Step<T>> out;
  out.reserve(n_steps);
  for (std::size_t n = 0; n < n_steps; ++n) {
    const T eta_out = forward(m.eta, reshape(u1, {1, s.d1()}));
    Step<T> next = step_mean(unpack(eta_out, 0, s), v);
    u1 = next.u1;
    v = next.v;
    out.push_back(std::move(next));
  }
  return out;
}

}  // namespace cgkoop::model
