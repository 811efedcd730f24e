#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <vector>

#include "cgkoop/model/cgkn.hpp"

namespace cgkoop::filter {

using model::CGCoeffs;
using model::CGKNParams;
using model::Mlp;
using num::Tensor;

struct GaussianBelief {
  Tensor mu_v;     // [dv]
  Tensor sigma_v;  // [dv × dv], symmetric
  bool warmup = false;

  /// μ = 0, Σ = I.
  static GaussianBelief standard(std::size_t dv);
};

struct DecodedPosterior {
  Tensor mu;                 // [d2]
  std::optional<Tensor> std;  // [d2], present when a UQ predictor is attached
};

/// One update with explicit coefficients evaluated at u1ⁿ.
/// `step` only labels errors.
GaussianBelief filter_step(const CGCoeffs& c, const Tensor& sigma1, const Tensor& sigma2, const GaussianBelief& belief,
                           const Tensor& u1_next, std::size_t step = 0);
/// Coefficients come from the model's η at u1_now.
GaussianBelief filter_step(const CGKNParams& p, const GaussianBelief& belief, const Tensor& u1_now,
                           const Tensor& u1_next);

/// Filters u1 rows [N+1 × d1]; returns N beliefs for steps 1..N, the first
/// `warmup` of them flagged. Errors carry the 1-based step index.
std::vector<GaussianBelief> filter_run(const CGKNParams& p, const Tensor& u1_series, const GaussianBelief& init,
                                       std::size_t warmup);

/// Posterior means stacked as [N × dv] and covariance diagonals as [N × dv].
Tensor stack_means(const std::vector<GaussianBelief>& beliefs);
Tensor stack_variances(const std::vector<GaussianBelief>& beliefs);

/// CSV: step, warmup_flag, mu_0 .. mu_{dv-1}. Steps are 1-based.
void write_filter_log(std::ostream& os, const std::vector<GaussianBelief>& beliefs);

/// mu = ψ(μ_v); std = uq(u1) when `uq` is given.
DecodedPosterior decode_posterior(const CGKNParams& p, const GaussianBelief& belief, const Mlp* uq = nullptr,
                                  const Tensor* u1 = nullptr);

/// Batched decode for a run: means [N × d2]; stds [N × d2] from uq(u1 rows)
/// when `uq` is given. `u1_rows` holds u1 at the same N steps as `beliefs`.
struct DecodedRun {
  Tensor mu;
  std::optional<Tensor> std;
};
DecodedRun decode_run(const CGKNParams& p, const std::vector<GaussianBelief>& beliefs, const Mlp* uq,
                      const Tensor& u1_rows);

struct ComplexityRow {
  std::size_t dv = 0;
  double seconds = 0.0;
};

struct ComplexityReport {
  std::vector<ComplexityRow> rows;
  double slope = 0.0;  // least-squares slope of log(seconds) vs log(dv)
};

/// Times `n_steps` filter updates with fixed random coefficients for each
/// latent width in `ladder` (observed width `d1`). Each entry is the best of
/// at least `repeats` runs.
ComplexityReport filter_complexity_probe(const std::vector<std::size_t>& ladder, std::size_t n_steps = 1000,
                                         std::size_t d1 = 4, std::size_t repeats = 3, std::uint64_t seed = 1);

double loglog_slope(const std::vector<ComplexityRow>& rows);

}  // namespace cgkoop::filter
