#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "cgkoop/model/cgkn.hpp"

namespace cgkoop::train {

using model::CGKNParams;
using model::Mlp;
using model::StateSpec;
using num::Tensor;

enum class Sigma2Mode { Fixed, Trainable };

struct LossWeights {
  double ae = 0, u = 0, v = 0, da = 0;

  /// 1/d2, 1/d, 1/dv, 1/d2.
  static LossWeights defaults(const StateSpec& s);
};

struct TrainConfig {
  std::size_t n_s = 1;   // forecast steps per segment
  std::size_t n_l = 20;  // DA window length
  std::size_t n_b = 4;   // warm-up steps excluded from L_DA
  std::optional<double> lambda_ae, lambda_u, lambda_v, lambda_da;  // unset = defaults
  double learning_rate = 1e-3;
  double final_lr_fraction = 1.0;  // cosine decay over both stages down to this fraction
  std::size_t stage1_epochs = 100;
  std::size_t stage2_epochs = 50;
  std::size_t iters_per_epoch = 20;  // minibatches per epoch
  std::size_t batch_size = 8;
  double grad_clip = 10.0;  // global norm; 0 disables
  Sigma2Mode sigma2_mode = Sigma2Mode::Fixed;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const;  // throws ConfigError
  LossWeights weights(const StateSpec& s) const;
};

/// Per-trajectory observed/unobserved series.
struct TrainingSet {
  StateSpec spec;
  std::vector<Tensor> u1;  // [T × d1] each
  std::vector<Tensor> u2;  // [T × d2] each

  /// `states` is [S × T × d] (or [T × d] for one trajectory).
  static TrainingSet from_states(const StateSpec& spec, const Tensor& states);
  std::size_t size() const noexcept { return u1.size(); }
  std::size_t length() const { return u1.front().rows(); }
};

/// Adam with bias correction (β1 = 0.9, β2 = 0.999, ε = 1e-8).
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);
  std::size_t steps() const noexcept { return t_; }
  void set_learning_rate(double lr) noexcept { lr_ = lr; }

 private:
  double lr_, b1_, b2_, eps_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

/// Scales grads in place so their global L2 norm is at most `max_norm`
/// (no-op when max_norm <= 0). Returns the norm before clipping.
double clip_global_norm(std::vector<Tensor>& grads, double max_norm);

// ---- losses on plain values -----------------------------------------------------

double loss_ae(const CGKNParams& p, const Tensor& u2_rows, double lambda);
struct ForecastLosses {
  double u = 0, v = 0;
};
ForecastLosses loss_forecast(const CGKNParams& p, const Tensor& u1_rows, const Tensor& u2_rows, double lambda_u,
                             double lambda_v);
double loss_da(const CGKNParams& p, const Tensor& u1_rows, const Tensor& u2_rows, std::size_t n_b, double lambda);

/// Per-dimension RMSE of one-step residuals over every consecutive pair:
/// σ1 from u1ⁿ⁺¹ − (F1 + G1 v*ⁿ), σ2 from v*ⁿ⁺¹ − (F2 + G2 v*ⁿ), v* = φ(u2*).
struct SigmaEstimate {
  Tensor sigma1;
  Tensor sigma2;
};
SigmaEstimate estimate_sigma(const CGKNParams& p, const TrainingSet& data);

// ---- two-stage training ---------------------------------------------------------

struct EpochLog {
  std::size_t epoch = 0;
  double l_ae = 0, l_u = 0, l_v = 0, l_da = 0, total = 0;
  double grad_norm = 0;    // mean pre-clip norm over the epoch's steps
  double wall_time_s = 0;  // since the stage started
};

void write_train_log(std::ostream& os, const std::vector<EpochLog>& log);

struct TrainHooks {
  /// Called after every epoch with the current parameters.
  std::function<void(int stage, const EpochLog&, const CGKNParams&)> on_epoch;
  /// Called once after σ estimation with the finished stage-1 parameters.
  std::function<void(const CGKNParams&)> on_stage1_done;
};

/// Minimizes λ_AE L_AE + L_u + L_v (no DA term).
CGKNParams train_stage1(CGKNParams p, const TrainingSet& data, const TrainConfig& cfg, std::vector<EpochLog>& log,
                        const TrainHooks& hooks = {});
/// Adds λ_DA L_DA over non-overlapping N_l windows; σ1 (and σ2 unless
/// trainable) stay fixed at their current values.
CGKNParams train_stage2(CGKNParams p, const TrainingSet& data, const TrainConfig& cfg, std::vector<EpochLog>& log,
                        const TrainHooks& hooks = {});

struct TrainResult {
  CGKNParams params;
  std::vector<EpochLog> stage1;
  std::vector<EpochLog> stage2;
};

/// Stage 1, σ estimation, stage 2. With `resume`, stage 1 is skipped and
/// `resume` (already σ-estimated) is the starting point.
TrainResult train_cgkn(CGKNParams init, const TrainingSet& data, const TrainConfig& cfg, const TrainHooks& hooks = {},
                       const CGKNParams* resume = nullptr);

// ---- residual UQ -----------------------------------------------------------------

struct UqConfig {
  std::vector<std::size_t> hidden{32, 32};
  std::size_t epochs = 200;
  std::size_t iters_per_epoch = 10;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

/// u1 rows and |u2* − ψ(μ)| rows from filtering every trajectory from the
/// default belief, skipping the first n_b posterior steps.
struct ResidualSamples {
  Tensor u1;  // [M × d1]
  Tensor r;   // [M × d2], nonnegative
};
ResidualSamples collect_residuals(const CGKNParams& p, const TrainingSet& data, std::size_t n_b);

/// Softplus-output MLP u1 -> r fitted by mean squared error.
Mlp train_uq(const ResidualSamples& samples, const UqConfig& cfg);

/// Autoencoder-only fit used for warm starts and tests.
void fit_autoencoder(CGKNParams& p, const Tensor& u2_rows, std::size_t steps, std::size_t batch_size, double lr,
                     std::uint64_t seed);

}  // namespace cgkoop::train
