#include "cgkoop/filter/cgfilter.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "cgkoop/errors.hpp"
#include "cgkoop/model/kernels.hpp"
#include "cgkoop/numcore/linalg.hpp"

namespace cgkoop::filter {

namespace {

Tensor diag_square(const Tensor& s) {
  Tensor d = Tensor::matrix(s.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) d(i, i) = s[i] * s[i];
  return d;
}

model::Belief<Tensor> to_kernel(const GaussianBelief& b) {
  const std::size_t dv = b.mu_v.size();
  if (b.sigma_v.rows() != dv || b.sigma_v.cols() != dv) {
    throw ShapeError("belief: covariance " + b.sigma_v.shape_string() + " does not match mean of length " +
                     std::to_string(dv));
  }
  return {b.mu_v.reshaped({dv, 1}), b.sigma_v};
}

void check_coeffs(const CGCoeffs& c, std::size_t d1, std::size_t dv) {
  if (c.F1.size() != d1 || c.G1.rows() != d1 || c.G1.cols() != dv || c.F2.size() != dv || c.G2.rows() != dv ||
      c.G2.cols() != dv) {
    throw ShapeError("filter: coefficient dims do not match d1 = " + std::to_string(d1) + ", dv = " + std::to_string(dv));
  }
}

// Allocation-free form of model::cg_update for the inference path. Buffers
// are sized once per (d1, dv) and reused across steps.
class Updater {
 public:
  Updater(std::size_t d1, std::size_t dv)
      : d1_(d1), dv_(dv), g1s_(d1 * dv), cross_(dv * d1), gain_(dv * d1), resid_(d1), g2s_(dv * dv),
        mu_(dv), sigma_(dv * dv), innov_(Tensor::matrix(d1, d1)) {}

  // s1, s2 are the full noise covariances; mu [dv], sigma [dv x dv] are
  // updated in place.
  void step(const CGCoeffs& c, const double* s1, const double* s2, const double* u1_next, double* mu, double* sigma,
            std::size_t step) {
    const std::size_t d1 = d1_, dv = dv_;
    const double* G1 = c.G1.data().data();
    const double* G2 = c.G2.data().data();
    const double* F1 = c.F1.data().data();
    const double* F2 = c.F2.data().data();
    // G1 Σ
    std::fill(g1s_.begin(), g1s_.end(), 0.0);
    for (std::size_t a = 0; a < d1; ++a)
      for (std::size_t k = 0; k < dv; ++k) {
        const double g = G1[a * dv + k];
        for (std::size_t j = 0; j < dv; ++j) g1s_[a * dv + j] += g * sigma[k * dv + j];
      }
    // G2 Σ G1ᵀ
    for (std::size_t i = 0; i < dv; ++i)
      for (std::size_t a = 0; a < d1; ++a) {
        double s = 0;
        for (std::size_t j = 0; j < dv; ++j) s += G2[i * dv + j] * g1s_[a * dv + j];
        cross_[i * d1 + a] = s;
      }
    double* innov = innov_.data().data();
    for (std::size_t a = 0; a < d1; ++a)
      for (std::size_t b = 0; b < d1; ++b) {
        double s = s1[a * d1 + b];
        for (std::size_t j = 0; j < dv; ++j) s += g1s_[a * dv + j] * G1[b * dv + j];
        innov[a * d1 + b] = s;
      }
    if (num::try_ldlt(innov_, f_)) {
      for (std::size_t a = 0; a < d1; ++a) innov[a * d1 + a] += 1e-10;
      if (auto fail = num::try_ldlt(innov_, f_)) {
        throw NumericalError("filter: innovation covariance not positive definite at step " + std::to_string(step) +
                                 " (pivot " + std::to_string(fail->index) + " = " + std::to_string(fail->value) + ")",
                             fail->index, fail->value, step);
      }
    }
    // gain = cross · innov⁻¹, one LDLᵀ solve per row
    const double* L = f_.lower.data().data();
    for (std::size_t i = 0; i < dv; ++i) {
      double* x = gain_.data() + i * d1;
      std::copy(cross_.begin() + static_cast<std::ptrdiff_t>(i * d1),
                cross_.begin() + static_cast<std::ptrdiff_t>((i + 1) * d1), x);
      for (std::size_t a = 0; a < d1; ++a)
        for (std::size_t k = 0; k < a; ++k) x[a] -= L[a * d1 + k] * x[k];
      for (std::size_t a = 0; a < d1; ++a) x[a] /= f_.diag[a];
      for (std::size_t a = d1; a-- > 0;)
        for (std::size_t k = a + 1; k < d1; ++k) x[a] -= L[k * d1 + a] * x[k];
    }
    for (std::size_t a = 0; a < d1; ++a) {
      double s = F1[a];
      for (std::size_t j = 0; j < dv; ++j) s += G1[a * dv + j] * mu[j];
      resid_[a] = u1_next[a] - s;
    }
    for (std::size_t i = 0; i < dv; ++i) {
      double s = F2[i], g = 0;
      for (std::size_t j = 0; j < dv; ++j) s += G2[i * dv + j] * mu[j];
      for (std::size_t a = 0; a < d1; ++a) g += gain_[i * d1 + a] * resid_[a];
      mu_[i] = s + g;
    }
    // G2 Σ G2ᵀ + s2 - gain · crossᵀ
    std::fill(g2s_.begin(), g2s_.end(), 0.0);
    for (std::size_t i = 0; i < dv; ++i)
      for (std::size_t k = 0; k < dv; ++k) {
        const double g = G2[i * dv + k];
        for (std::size_t j = 0; j < dv; ++j) g2s_[i * dv + j] += g * sigma[k * dv + j];
      }
    for (std::size_t i = 0; i < dv; ++i)
      for (std::size_t j = 0; j < dv; ++j) {
        double s = 0, k2 = 0;
        for (std::size_t k = 0; k < dv; ++k) s += g2s_[i * dv + k] * G2[j * dv + k];
        for (std::size_t a = 0; a < d1; ++a) k2 += gain_[i * d1 + a] * cross_[j * d1 + a];
        sigma_[i * dv + j] = s + s2[i * dv + j] - k2;
      }
    for (std::size_t i = 0; i < dv; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        const double m = 0.5 * (sigma_[i * dv + j] + sigma_[j * dv + i]);
        sigma[i * dv + j] = sigma[j * dv + i] = m;
      }
    std::copy(mu_.begin(), mu_.end(), mu);
  }

 private:
  std::size_t d1_, dv_;
  std::vector<double> g1s_, cross_, gain_, resid_, g2s_, mu_, sigma_;
  Tensor innov_;
  num::Ldlt f_;
};

}  // namespace

GaussianBelief GaussianBelief::standard(std::size_t dv) {
  return {Tensor({dv}, 0.0), Tensor::identity(dv), false};
}

GaussianBelief filter_step(const CGCoeffs& c, const Tensor& sigma1, const Tensor& sigma2, const GaussianBelief& belief,
                           const Tensor& u1_next, std::size_t step) {
  const std::size_t d1 = sigma1.size(), dv = sigma2.size();
  check_coeffs(c, d1, dv);
  if (u1_next.size() != d1) throw ShapeError("filter: observation length " + u1_next.shape_string());
  const auto b = to_kernel(belief);
  GaussianBelief out{b.mu.reshaped({dv}), b.sigma, false};
  Updater(d1, dv).step(c, diag_square(sigma1).data().data(), diag_square(sigma2).data().data(), u1_next.data().data(),
                       out.mu_v.data().data(), out.sigma_v.data().data(), step);
  return out;
}

GaussianBelief filter_step(const CGKNParams& p, const GaussianBelief& belief, const Tensor& u1_now,
                           const Tensor& u1_next) {
  return filter_step(model::coeffs(p, u1_now), p.sigma1, p.sigma2, belief, u1_next);
}

std::vector<GaussianBelief> filter_run(const CGKNParams& p, const Tensor& u1_series, const GaussianBelief& init,
                                       std::size_t warmup) {
  const std::size_t d1 = p.spec.d1();
  if (u1_series.rank() != 2 || u1_series.cols() != d1) {
    throw ShapeError("filter_run: u1 series must be [N+1 x " + std::to_string(d1) + "], got " + u1_series.shape_string());
  }
  const std::size_t n = u1_series.rows() - 1;
  if (warmup > n) throw ContractError("filter_run: warm-up longer than the series");
  if (init.mu_v.size() != p.spec.dv) throw ShapeError("filter_run: initial belief has wrong latent width");
  const auto m = model::view(p);
  const model::StateSpec& spec = p.spec;
  const std::size_t dv = spec.dv, stride = spec.coeff_size();
  std::vector<GaussianBelief> out;
  out.reserve(n);
  if (n == 0) return out;
  const Tensor eta_out = model::forward(m.eta, num::slice(u1_series, 0, n * d1).reshaped({n, d1}));
  const auto b0 = to_kernel(init);
  Tensor mu = b0.mu.reshaped({dv}), sigma = b0.sigma;
  Updater up(d1, dv);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = model::unpack(eta_out, i * stride, spec);
    up.step({k.F1, k.G1, k.F2, k.G2}, m.s1.data().data(), m.s2.data().data(), u1_series.data().data() + (i + 1) * d1,
            mu.data().data(), sigma.data().data(), i + 1);
    out.push_back({mu, sigma, i < warmup});
  }
  return out;
}

Tensor stack_means(const std::vector<GaussianBelief>& beliefs) {
  if (beliefs.empty()) throw ShapeError("stack_means: no beliefs");
  const std::size_t dv = beliefs.front().mu_v.size();
  Tensor out = Tensor::matrix(beliefs.size(), dv);
  for (std::size_t n = 0; n < beliefs.size(); ++n) {
    for (std::size_t j = 0; j < dv; ++j) out(n, j) = beliefs[n].mu_v[j];
  }
  return out;
}

Tensor stack_variances(const std::vector<GaussianBelief>& beliefs) {
  if (beliefs.empty()) throw ShapeError("stack_variances: no beliefs");
  const std::size_t dv = beliefs.front().mu_v.size();
  Tensor out = Tensor::matrix(beliefs.size(), dv);
  for (std::size_t n = 0; n < beliefs.size(); ++n) {
    for (std::size_t j = 0; j < dv; ++j) out(n, j) = beliefs[n].sigma_v(j, j);
  }
  return out;
}

void write_filter_log(std::ostream& os, const std::vector<GaussianBelief>& beliefs) {
  const std::size_t dv = beliefs.empty() ? 0 : beliefs.front().mu_v.size();
  os << "step,warmup_flag";
  for (std::size_t j = 0; j < dv; ++j) os << ",mu_" << j;
  os << '\n';
  os.precision(17);
  for (std::size_t n = 0; n < beliefs.size(); ++n) {
    os << n + 1 << ',' << (beliefs[n].warmup ? 1 : 0);
    for (double v : beliefs[n].mu_v.data()) os << ',' << v;
    os << '\n';
  }
}

DecodedPosterior decode_posterior(const CGKNParams& p, const GaussianBelief& belief, const Mlp* uq, const Tensor* u1) {
  DecodedPosterior out{model::decode(p, belief.mu_v), std::nullopt};
  if (uq) {
    if (!u1) throw ContractError("decode_posterior: UQ predictor needs u1");
    const Tensor s = model::forward(model::view(*uq), u1->reshaped({1, u1->size()}));
    out.std = s.reshaped({s.size()});
  }
  return out;
}

DecodedRun decode_run(const CGKNParams& p, const std::vector<GaussianBelief>& beliefs, const Mlp* uq,
                      const Tensor& u1_rows) {
  DecodedRun out{model::decode(p, stack_means(beliefs)), std::nullopt};
  if (uq) {
    if (u1_rows.rows() != beliefs.size()) throw ShapeError("decode_run: u1 rows do not match the beliefs");
    out.std = model::forward(model::view(*uq), u1_rows);
  }
  return out;
}

ComplexityReport filter_complexity_probe(const std::vector<std::size_t>& ladder, std::size_t n_steps, std::size_t d1,
                                         std::size_t repeats, std::uint64_t seed) {
  ComplexityReport report;
  for (std::size_t dv : ladder) {
    num::RngStream rng(num::derive_seed(seed, "bench-filter", dv));
    auto uniform = [&](std::size_t r, std::size_t c, double scale) {
      Tensor t = Tensor::matrix(r, c);
      for (double& x : t.data()) x = scale * (2.0 * rng.uniform() - 1.0);
      return t;
    };
    const CGCoeffs c{uniform(d1, 1, 1.0), uniform(d1, dv, 1.0), uniform(dv, 1, 1.0),
                     uniform(dv, dv, 0.9 / std::sqrt(static_cast<double>(dv)))};
    const Tensor s1 = diag_square(Tensor({d1}, 0.5));
    const Tensor s2 = diag_square(Tensor({dv}, 0.1));
    const Tensor obs = uniform(n_steps, d1, 1.0);
    double best = INFINITY, spent = 0.0;
    // Short timings are repeated until 0.1 s has been spent, capped at 100 runs.
    for (std::size_t rep = 0; rep < std::max<std::size_t>(repeats, 1) || (spent < 0.1 && rep < 100); ++rep) {
      Tensor mu({dv}, 0.0), sigma = Tensor::identity(dv);
      Updater up(d1, dv);
      const auto t0 = std::chrono::steady_clock::now();
      for (std::size_t n = 0; n < n_steps; ++n) {
        up.step(c, s1.data().data(), s2.data().data(), obs.data().data() + n * d1, mu.data().data(),
                sigma.data().data(), n + 1);
      }
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
      best = std::min(best, dt.count());
      spent += dt.count();
      if (!mu.all_finite()) throw NumericalError("bench-filter: non-finite posterior", 0, 0.0, n_steps);
    }
    report.rows.push_back({dv, best});
  }
  report.slope = loglog_slope(report.rows);
  return report;
}

double loglog_slope(const std::vector<ComplexityRow>& rows) {
  if (rows.size() < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    const double x = std::log(static_cast<double>(r.dv)), y = std::log(r.seconds);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace cgkoop::filter
