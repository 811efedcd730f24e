#include "cgkoop/enkf/enkf.hpp"

#include <chrono>
#include <cmath>

#include "cgkoop/numcore/linalg.hpp"
#include "cgkoop/numcore/parallel.hpp"

namespace cgkoop::enkf {

namespace {

constexpr double kInnovationRidge = 1e-8;

void require_ensemble(const Tensor& e) {
  if (e.rank() != 2 || e.rows() < 2) throw ShapeError("ensemble must be [J x d] with J >= 2, got " + e.shape_string());
}

}  // namespace

void EnKFConfig::validate(std::size_t d) const {
  if (members < 2) throw ConfigError("enkf.members must be >= 2");
  if (!(inflation >= 1.0)) throw ConfigError("enkf.inflation must be >= 1");
  if (!(localization > 0.0)) throw ConfigError("enkf.localization must be positive");
  if (observed.empty()) throw ConfigError("enkf needs at least one observed index");
  if (obs_std.size() != observed.size()) throw ConfigError("enkf.obs_std needs one entry per observed index");
  for (double s : obs_std) {
    if (!(s >= 0.0)) throw ConfigError("enkf.obs_std entries must be >= 0");
  }
  for (std::size_t i : observed) {
    if (i >= d) throw ConfigError("enkf observed index out of range");
  }
}

double gaspari_cohn(double z) {
  z = std::abs(z);
  if (z >= 2.0) return 0.0;
  const double z2 = z * z, z3 = z2 * z, z4 = z3 * z, z5 = z4 * z;
  if (z <= 1.0) return -0.25 * z5 + 0.5 * z4 + 0.625 * z3 - 5.0 / 3.0 * z2 + 1.0;
  return z5 / 12.0 - 0.5 * z4 + 0.625 * z3 + 5.0 / 3.0 * z2 - 5.0 * z + 4.0 - 2.0 / (3.0 * z);
}

std::size_t periodic_distance(std::size_t i, std::size_t j, std::size_t n) {
  const std::size_t a = i > j ? i - j : j - i;
  return std::min(a, n - a);
}

Tensor ensemble_mean(const Tensor& e) {
  require_ensemble(e);
  const std::size_t j = e.rows(), d = e.cols();
  Tensor m({d});
  for (std::size_t r = 0; r < j; ++r) {
    for (std::size_t c = 0; c < d; ++c) m[c] += e(r, c);
  }
  for (double& x : m.data()) x /= static_cast<double>(j);
  return m;
}

Tensor ensemble_std(const Tensor& e) {
  const Tensor m = ensemble_mean(e);
  const std::size_t j = e.rows(), d = e.cols();
  Tensor s({d});
  for (std::size_t r = 0; r < j; ++r) {
    for (std::size_t c = 0; c < d; ++c) s[c] += (e(r, c) - m[c]) * (e(r, c) - m[c]);
  }
  for (double& x : s.data()) x = std::sqrt(x / static_cast<double>(j - 1));
  return s;
}

Tensor inflate(const Tensor& e, double rho) {
  if (rho == 1.0) return e;
  const Tensor m = ensemble_mean(e);
  Tensor out = e;
  for (std::size_t r = 0; r < e.rows(); ++r) {
    for (std::size_t c = 0; c < e.cols(); ++c) out(r, c) = m[c] + rho * (e(r, c) - m[c]);
  }
  return out;
}

Tensor enkf_forecast(const Tensor& e, const ForwardModel& model, std::size_t threads, std::size_t step) {
  require_ensemble(e);
  const std::size_t j = e.rows(), d = e.cols();
  Tensor out = Tensor::matrix(j, d);
  num::parallel_for(j, threads, [&](std::size_t m) {
    const auto row = e.data().subspan(m * d, d);
    Tensor next;
    try {
      next = model(Tensor({d}, std::vector<double>(row.begin(), row.end())));
    } catch (const DivergenceError& err) {
      throw MemberDivergence("member " + std::to_string(m) + ": " + err.what(), m, step);
    }
    if (next.size() != d) throw ShapeError("forward model changed the state size");
    for (std::size_t c = 0; c < d; ++c) {
      if (!std::isfinite(next[c])) throw MemberDivergence("member " + std::to_string(m) + " is non-finite", m, step);
      out(m, c) = next[c];
    }
  });
  return out;
}

Tensor enkf_analysis(const Tensor& ensemble, const Tensor& obs, const EnKFConfig& cfg, num::RngStream& rng,
                     AnalysisTrace* trace) {
  require_ensemble(ensemble);
  const std::size_t j = ensemble.rows(), d = ensemble.cols(), d1 = cfg.observed.size();
  cfg.validate(d);
  if (obs.size() != d1) throw ShapeError("enkf_analysis: obs size does not match observed indices");
  for (double y : obs.data()) {
    if (!std::isfinite(y)) throw ContractError("enkf_analysis: observation is not finite");
  }
  const Tensor x = inflate(ensemble, cfg.inflation);
  const Tensor mean = ensemble_mean(x);
  const double inv = 1.0 / static_cast<double>(j - 1);

  Tensor a = Tensor::matrix(j, d), ya = Tensor::matrix(j, d1);
  for (std::size_t r = 0; r < j; ++r) {
    for (std::size_t c = 0; c < d; ++c) a(r, c) = x(r, c) - mean[c];
    for (std::size_t m = 0; m < d1; ++m) ya(r, m) = a(r, cfg.observed[m]);
  }
  Tensor pxy = num::scale(num::matmul(num::transpose(a), ya), inv);
  Tensor pyy = num::scale(num::matmul(num::transpose(ya), ya), inv);
  if (std::isfinite(cfg.localization)) {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t m = 0; m < d1; ++m) {
        pxy(i, m) *= gaspari_cohn(static_cast<double>(periodic_distance(i, cfg.observed[m], d)) / cfg.localization);
      }
    }
    for (std::size_t m = 0; m < d1; ++m) {
      for (std::size_t k = 0; k < d1; ++k) {
        pyy(m, k) *= gaspari_cohn(static_cast<double>(periodic_distance(cfg.observed[m], cfg.observed[k], d)) /
                                  cfg.localization);
      }
    }
  }
  for (std::size_t m = 0; m < d1; ++m) pyy(m, m) += cfg.obs_std[m] * cfg.obs_std[m] + kInnovationRidge;
  // K = Pxy S⁻¹, via S Kᵀ = Pxyᵀ.
  const Tensor gain = num::transpose(num::solve_spd(pyy, num::transpose(pxy)));

  const std::uint64_t step_seed = rng.next_u64();
  Tensor out = x;
  Tensor perturbed = Tensor::matrix(j, d1);
  for (std::size_t r = 0; r < j; ++r) {
    num::RngStream member(num::derive_seed(step_seed, "enkf-member", r));
    std::vector<double> innov(d1);
    for (std::size_t m = 0; m < d1; ++m) {
      perturbed(r, m) = obs[m] + cfg.obs_std[m] * member.normal();
      innov[m] = perturbed(r, m) - x(r, cfg.observed[m]);
    }
    for (std::size_t c = 0; c < d; ++c) {
      double s = 0;
      for (std::size_t m = 0; m < d1; ++m) s += gain(c, m) * innov[m];
      out(r, c) += s;
    }
  }
  if (trace) *trace = AnalysisTrace{mean, gain, perturbed};
  return out;
}

EnKFRun enkf_run(const EnKFConfig& cfg, const Tensor& obs_series, const Tensor& init, const ForwardModel& model) {
  require_ensemble(init);
  const std::size_t d = init.cols(), d1 = cfg.observed.size();
  cfg.validate(d);
  if (init.rows() != cfg.members) throw ShapeError("enkf_run: initial ensemble size differs from enkf.members");
  if (obs_series.rank() != 2 || obs_series.cols() != d1) throw ShapeError("enkf_run: obs series must be [N+1 x d1]");
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t steps = obs_series.rows();
  EnKFRun run{Tensor::matrix(steps, d), Tensor::matrix(steps, d), 0.0};
  num::RngStream rng(num::derive_seed(cfg.seed, "enkf"));
  Tensor e = init;
  for (std::size_t n = 0; n < steps; ++n) {
    if (n > 0) e = enkf_forecast(e, model, cfg.threads, n);
    const auto row = obs_series.data().subspan(n * d1, d1);
    e = enkf_analysis(e, Tensor({d1}, std::vector<double>(row.begin(), row.end())), cfg, rng);
    const Tensor m = ensemble_mean(e), s = ensemble_std(e);
    std::copy(m.data().begin(), m.data().end(), run.mean.data().begin() + n * d);
    std::copy(s.data().begin(), s.data().end(), run.std.data().begin() + n * d);
  }
  run.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

}  // namespace cgkoop::enkf
