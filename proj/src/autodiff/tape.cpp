#include "cgkoop/autodiff/tape.hpp"

#include "cgkoop/errors.hpp"
#include "cgkoop/numcore/linalg.hpp"

namespace cgkoop::ad {

std::string_view to_string(OpKind kind) noexcept {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Constant: return "constant";
    case OpKind::MatMul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::ScalarMul: return "scalar-mul";
    case OpKind::Hadamard: return "hadamard";
    case OpKind::AddRow: return "add-row";
    case OpKind::Tanh: return "tanh";
    case OpKind::Square: return "square";
    case OpKind::Softplus: return "softplus";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::Slice: return "slice";
    case OpKind::Concat: return "concat";
    case OpKind::Transpose: return "transpose";
    case OpKind::SolveSpd: return "solve_spd";
    case OpKind::Reshape: return "reshape";
    case OpKind::DiagEmbed: return "diag-embed";
  }
  return "unknown";
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  Node n;
  n.kind = OpKind::Leaf;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.kind = OpKind::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::record(OpKind kind, Tensor value, std::initializer_list<Var> parents, Pullback pullback) {
  return record(kind, std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(pullback));
}

Var Tape::record(OpKind kind, Tensor value, std::span<const Var> parents, Pullback pullback) {
  Node n;
  n.kind = kind;
  n.value = std::move(value);
  for (const Var& p : parents) {
    if (p.tape() != this) throw ContractError("autodiff: operand recorded on a different tape");
    n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (n.requires_grad) n.pullback = std::move(pullback);
  return push(std::move(n));
}

void Tape::accumulate(Var v, const Tensor& g) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return;
  if (!n.has_grad) {
    n.grad = g;
    n.has_grad = true;
    return;
  }
  auto dst = n.grad.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::accumulate(Var v, Tensor&& g) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return;
  if (!n.has_grad) {
    n.grad = std::move(g);
    n.has_grad = true;
    return;
  }
  auto dst = n.grad.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::backward(Var root) {
  if (root.tape() != this) throw ContractError("autodiff: backward root belongs to another tape");
  if (nodes_[root.id()].value.size() != 1) {
    throw ContractError("autodiff: backward root must be scalar, got " + nodes_[root.id()].value.shape_string());
  }
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  Node& r = nodes_[root.id()];
  if (!r.requires_grad) return;
  r.grad = Tensor(r.value.dims(), 1.0);
  if (r.value.rank() == 0) r.grad = Tensor::scalar(1.0);
  r.has_grad = true;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.pullback) continue;
    n.pullback(*this, n.grad, n.value);
  }
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.has_grad) return n.grad;
  Tensor z = n.value;
  for (double& x : z.data()) x = 0.0;
  return z;
}

}  // namespace cgkoop::ad
