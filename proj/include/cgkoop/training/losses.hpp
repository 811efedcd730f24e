#pragma once

// Training objectives, templated like the model kernels so the same code
// evaluates plain values and builds tapes. Every loss is returned already
// multiplied by its weight λ.

#include <cstddef>
#include <span>
#include <vector>

#include "cgkoop/model/kernels.hpp"

namespace cgkoop::train {

using model::ModelView;
using num::Tensor;

/// Rows [first, first + count) of a [R × n] block.
template <class T>
T rows_of(const T& block, std::size_t first, std::size_t count, std::size_t n) {
  return reshape(slice(block, first * n, count * n), {count, n});
}

template <class T>
T stack_rows(const std::vector<T>& cols, std::size_t n) {
  std::vector<T> rows;
  rows.reserve(cols.size());
  for (const T& c : cols) rows.push_back(reshape(c, {1, n}));
  return concat(std::span<const T>(rows));
}

/// λ · mean over rows of ‖u2 − ψ(φ(u2))‖².
template <class T>
T loss_ae(const ModelView<T>& m, const T& u2_rows, double lambda) {
  const std::size_t b = value_of(u2_rows).rows();
  const T recon = model::forward(m.decoder, model::forward(m.encoder, u2_rows));
  return scale(sum(square(sub(u2_rows, recon))), lambda / static_cast<double>(b));
}

template <class T>
struct ForecastLoss {
  T u;
  T v;
};

/// Rollout of N_s = rows − 1 steps from the first row. L_u compares the full
/// state (u1 and ψ(v)), L_v compares v with the targets φ(u2*).
template <class T>
ForecastLoss<T> loss_forecast(const ModelView<T>& m, const T& u1_rows, const T& u2_rows, double lambda_u,
                              double lambda_v) {
  const model::StateSpec& s = *m.spec;
  const std::size_t ns = value_of(u1_rows).rows() - 1;
  const T v_star = model::forward(m.encoder, u2_rows);
  const auto steps = model::rollout(m, model::row_as_column(u1_rows, 0, s.d1()), model::row_as_column(v_star, 0, s.dv), ns);
  std::vector<T> u1_pred, v_pred;
  for (const auto& st : steps) {
    u1_pred.push_back(st.u1);
    v_pred.push_back(st.v);
  }
  const T v_rows = stack_rows(v_pred, s.dv);
  const T u2_pred = model::forward(m.decoder, v_rows);
  const T e1 = sum(square(sub(rows_of(u1_rows, 1, ns, s.d1()), stack_rows(u1_pred, s.d1()))));
  const T e2 = sum(square(sub(rows_of(u2_rows, 1, ns, s.d2()), u2_pred)));
  const T ev = sum(square(sub(rows_of(v_star, 1, ns, s.dv), v_rows)));
  const double inv = 1.0 / static_cast<double>(ns);
  return {scale(add(e1, e2), lambda_u * inv), scale(ev, lambda_v * inv)};
}

/// Filter over N_l = rows − 1 steps from the default belief (μ = 0, Σ = I);
/// λ · mean of ‖u2*ⁿ − ψ(μⁿ)‖² over n in (N_b, N_l].
template <class T>
T loss_da(const ModelView<T>& m, const T& u1_rows, const T& u2_rows, std::size_t n_b, double lambda) {
  const model::StateSpec& s = *m.spec;
  const std::size_t nl = value_of(u1_rows).rows() - 1;
  if (nl <= n_b) throw ContractError("loss_da: window must be longer than the warm-up");
  model::Belief<T> init{lift(u1_rows, Tensor::matrix(s.dv, 1)), lift(u1_rows, Tensor::identity(s.dv))};
  const auto beliefs = model::cg_filter(m, u1_rows, init, nl);
  std::vector<T> means;
  for (std::size_t n = n_b; n < nl; ++n) means.push_back(beliefs[n].mu);
  const std::size_t k = means.size();
  const T decoded = model::forward(m.decoder, stack_rows(means, s.dv));
  const T err = sum(square(sub(rows_of(u2_rows, n_b + 1, k, s.d2()), decoded)));
  return scale(err, lambda / static_cast<double>(k));
}

}  // namespace cgkoop::train
