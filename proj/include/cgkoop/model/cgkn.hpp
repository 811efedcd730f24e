#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cgkoop/autodiff/tape.hpp"
#include "cgkoop/model/kernels.hpp"
#include "cgkoop/model/mlp.hpp"
#include "cgkoop/model/state.hpp"
#include "cgkoop/numcore/rng.hpp"

namespace cgkoop::model {

using CGCoeffs = Coeffs<Tensor>;

/// Hidden-layer widths of the three networks.
struct ModelShape {
  std::vector<std::size_t> encoder_hidden{32, 32, 32};
  std::vector<std::size_t> decoder_hidden{32, 32, 32};
  std::vector<std::size_t> eta_hidden{64, 64, 64};
  Activation activation = Activation::Tanh;
};

struct CGKNParams {
  StateSpec spec;
  Mlp encoder;  // u2 -> v
  Mlp decoder;  // v -> u2
  Mlp eta;      // u1 -> packed (F1, G1, F2, G2)
  Tensor sigma1;  // [d1], diagonal of σ1
  Tensor sigma2;  // [dv], diagonal of σ2

  /// Glorot-initialised networks and σ = 0.
  static CGKNParams create(const StateSpec& spec, const ModelShape& shape, num::RngStream& rng);

  /// Throws ConfigError when layer widths do not chain or σ is negative.
  void validate() const;
  std::size_t parameter_count() const noexcept;
};

// ---- construction helpers --------------------------------------------------

/// Flat row-major packing (F1, G1, F2, G2) as a [1 × P] row.
Tensor pack(const CGCoeffs& c);
/// η that ignores its input: zero weights, last bias = pack(c).
Mlp constant_eta(const StateSpec& spec, const CGCoeffs& c);
/// Single-layer identity-activation network x·W + b.
Mlp affine_net(const Tensor& w, const Tensor& b);

// ---- inference ---------------------------------------------------------------

/// Accepts a single vector [n] or a batch [B × n]; the result has the same form.
Tensor encode(const CGKNParams& p, const Tensor& u2);
Tensor decode(const CGKNParams& p, const Tensor& v);
CGCoeffs coeffs(const CGKNParams& p, const Tensor& u1);

struct StepResult {
  Tensor u1;  // [d1]
  Tensor v;   // [dv]
};

StepResult step_mean(const CGKNParams& p, const Tensor& u1, const Tensor& v);
StepResult step_sample(const CGKNParams& p, const Tensor& u1, const Tensor& v, num::RngStream& rng);

/// Mean rollout from a full state u⁰ [d]: v⁰ = φ(u2⁰), then n_steps model
/// steps. Returns [n_steps × d] with u2ⁿ = ψ(vⁿ). Throws DivergenceError on
/// non-finite values.
Tensor forecast(const CGKNParams& p, const Tensor& initial, std::size_t n_steps);

// ---- views for the templated kernels -------------------------------------------

ModelView<Tensor> view(const CGKNParams& p);

/// Parameters placed on a tape. `leaves` follows trainable_tensors order.
struct BoundParams {
  ModelView<ad::Var> view;
  std::vector<ad::Var> leaves;
};

/// With `sigma2_trainable`, σ2 becomes a leaf and enters as diag(σ2 ⊙ σ2).
BoundParams bind(ad::Tape& tape, const CGKNParams& p, bool sigma2_trainable);

/// Encoder, decoder, η weights/biases in layer order, then σ2 if requested.
std::vector<Tensor*> trainable_tensors(CGKNParams& p, bool sigma2_trainable);

// ---- checkpoints ---------------------------------------------------------------

struct Checkpoint {
  CGKNParams params;
  std::optional<Mlp> uq;  // residual predictor u1 -> |u2 - μ|
  int stage = 2;          // training stage that produced the parameters
};

/// Directory of CGT1 files plus manifest.json naming each tensor's role and layer.
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace cgkoop::model
