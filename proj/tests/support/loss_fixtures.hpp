#pragma once

// Small random models and tape views shared by the loss gradient checks.

#include <utility>
#include <vector>

#include "cgkoop/autodiff/ops.hpp"
#include "cgkoop/model/cgkn.hpp"
#include "support/oracles.hpp"

namespace oracle {

using cgkoop::model::CGKNParams;
using cgkoop::model::ModelShape;
using cgkoop::model::ModelView;
using cgkoop::model::StateSpec;
namespace ad = cgkoop::ad;
namespace model = cgkoop::model;
namespace num = cgkoop::num;

/// Random model on d = 5 (u1 at 1 and 3), dv = 2, with nonzero biases.
inline CGKNParams tiny_model(std::uint64_t seed) {
  num::RngStream rng(seed);
  ModelShape shape;
  shape.encoder_hidden = {4};
  shape.decoder_hidden = {4};
  shape.eta_hidden = {4};
  CGKNParams p = CGKNParams::create(StateSpec(5, {1, 3}, 2), shape, rng);
  for (Tensor* t : model::trainable_tensors(p, false)) {
    if (t->rows() == 1) for (double& v : t->data()) v = 0.2 * rng.normal();
  }
  // Keep the latent recursion contracting so 5-step windows stay tame.
  for (double& w : p.eta.weights.back().data()) w *= 0.3;
  p.sigma1 = Tensor({2}, std::vector<double>{0.4, 0.6});
  p.sigma2 = Tensor({2}, std::vector<double>{0.3, 0.5});
  return p;
}

/// Rebuilds a model view from gradcheck leaves in trainable_tensors order.
inline ModelView<ad::Var> view_from(const CGKNParams& p, const std::vector<ad::Var>& leaves, ad::Tape& tape, bool sig2) {
  ModelView<ad::Var> m;
  m.spec = &p.spec;
  std::size_t k = 0;
  for (auto [net, src] : {std::pair{&m.encoder, &p.encoder}, std::pair{&m.decoder, &p.decoder}, std::pair{&m.eta, &p.eta}}) {
    net->hidden = src->hidden;
    net->output = src->output;
    for (std::size_t l = 0; l < src->layers(); ++l) {
      net->weights.push_back(leaves[k++]);
      net->biases.push_back(leaves[k++]);
    }
  }
  Tensor s1 = Tensor::matrix(p.spec.d1(), p.spec.d1());
  for (std::size_t i = 0; i < p.spec.d1(); ++i) s1(i, i) = p.sigma1[i] * p.sigma1[i];
  m.s1 = tape.constant(s1);
  if (sig2) {
    m.s2 = ad::diag_embed(ad::square(leaves[k]));
  } else {
    Tensor s2 = Tensor::matrix(p.spec.dv, p.spec.dv);
    for (std::size_t i = 0; i < p.spec.dv; ++i) s2(i, i) = p.sigma2[i] * p.sigma2[i];
    m.s2 = tape.constant(s2);
  }
  return m;
}

inline std::vector<Tensor> param_values(CGKNParams p, bool sig2) {
  std::vector<Tensor> out;
  for (Tensor* t : model::trainable_tensors(p, sig2)) out.push_back(*t);
  return out;
}


}  // namespace oracle
