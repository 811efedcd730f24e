#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "cgkoop/errors.hpp"
#include "cgkoop/numcore/rng.hpp"
#include "cgkoop/numcore/tensor.hpp"

namespace cgkoop::enkf {

using num::Tensor;

/// One data step of the forward model for a single member. Must be safe to
/// call concurrently.
using ForwardModel = std::function<Tensor(const Tensor& state)>;

/// A member's forward solve produced non-finite values.
class MemberDivergence : public DivergenceError {
 public:
  MemberDivergence(const std::string& what, std::size_t member, std::size_t step)
      : DivergenceError(what, step), member_(member) {}
  std::size_t member() const noexcept { return member_; }

 private:
  std::size_t member_;
};

struct EnKFConfig {
  std::size_t members = 100;
  double inflation = 1.0;
  /// Gaspari–Cohn half-width in grid units of the state; infinity disables tapering.
  double localization = std::numeric_limits<double>::infinity();
  std::vector<double> obs_std;        // one per observed index
  std::vector<std::size_t> observed;  // 0-based state indices
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate(std::size_t d) const;
};

/// Fifth-order piecewise rational taper of Gaspari and Cohn, z = distance / half-width.
double gaspari_cohn(double z);
std::size_t periodic_distance(std::size_t i, std::size_t j, std::size_t n);

/// x ← x̄ + ρ(x − x̄) row-wise; ρ = 1 returns the input unchanged.
Tensor inflate(const Tensor& ensemble, double rho);

/// Advances every row [J × d] by one data step, concurrently over members.
Tensor enkf_forecast(const Tensor& ensemble, const ForwardModel& model, std::size_t threads = 1,
                     std::size_t step = 0);

struct AnalysisTrace {
  Tensor prior_mean;      // after inflation [d]
  Tensor gain;            // [d × d1]
  Tensor perturbed_obs;   // [J × d1]
};

/// Perturbed-observation update. Member j draws its observation noise from a
/// stream derived from (one word of rng, j), so results do not depend on threads.
Tensor enkf_analysis(const Tensor& ensemble, const Tensor& obs, const EnKFConfig& cfg, num::RngStream& rng,
                     AnalysisTrace* trace = nullptr);

struct EnKFRun {
  Tensor mean;  // [N+1 × d], row n assimilates obs 0..n
  Tensor std;   // [N+1 × d], ensemble spread (J − 1 normalization)
  double wall_time_s = 0;
};

/// Analysis at step 0, then forecast + analysis for each later observation row.
EnKFRun enkf_run(const EnKFConfig& cfg, const Tensor& obs_series, const Tensor& init, const ForwardModel& model);

Tensor ensemble_mean(const Tensor& ensemble);
Tensor ensemble_std(const Tensor& ensemble);

}  // namespace cgkoop::enkf
