#pragma once

#include <functional>
#include <vector>

#include "cgkoop/autodiff/ops.hpp"
#include "support/oracles.hpp"

namespace oracle {

using cgkoop::ad::Tape;
using cgkoop::ad::Var;

/// Builds a scalar loss from leaf variables on a fresh tape.
using LossBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Contracts an arbitrary-shaped output with fixed random weights so every
/// output entry contributes a distinct coefficient.
inline Var contract(Var y, std::uint64_t seed) {
  cgkoop::num::RngStream rng(seed);
  Tensor w = y.value();
  for (double& v : w.data()) v = rng.normal();
  return cgkoop::ad::sum(cgkoop::ad::hadamard(y, cgkoop::ad::lift(y, w)));
}

/// Worst relative error between tape gradients and central differences,
/// over all inputs.
inline double gradcheck(const LossBuilder& build, const std::vector<Tensor>& inputs, double h = 1e-5) {
  Tape tape;
  std::vector<Var> leaves;
  for (const auto& x : inputs) leaves.push_back(tape.variable(x));
  tape.backward(build(tape, leaves));
  double worst = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto f = [&](const Tensor& xi) {
      Tape t;
      std::vector<Var> ls;
      for (std::size_t j = 0; j < inputs.size(); ++j) ls.push_back(t.variable(j == i ? xi : inputs[j]));
      return build(t, ls).value().item();
    };
    const Tensor fd = fd_gradient(f, inputs[i], h);
    worst = std::max(worst, rel_error(tape.grad(leaves[i]), fd, 1e-6));
  }
  return worst;
}

}  // namespace oracle
