#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string_view>

#include "cgkoop/numcore/tensor.hpp"

namespace cgkoop::ad {

using num::Tensor;

enum class OpKind {
  Leaf,
  Constant,
  MatMul,
  Add,
  Sub,
  ScalarMul,
  Hadamard,
  AddRow,
  Tanh,
  Square,
  Softplus,
  Sum,
  Mean,
  Slice,
  Concat,
  Transpose,
  SolveSpd,
  Reshape,
  DiagEmbed,
};

std::string_view to_string(OpKind kind) noexcept;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Eagerly evaluated reverse-mode tape. Nodes are appended in evaluation
/// order, which is a topological order, so backward is a single reverse sweep.
///
/// A tape is single-threaded; concurrent work uses one tape per task.
class Tape {
 public:
  /// Receives the gradient of the node's output (and the output itself) and
  /// pushes contributions to its parents through Tape::accumulate.
  using Pullback = std::function<void(Tape&, const Tensor& grad_out, const Tensor& value_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Trainable leaf.
  Var variable(Tensor value);
  /// Leaf excluded from differentiation.
  Var constant(Tensor value);
  /// Appends an op node. The pullback is kept only if a parent needs gradients.
  Var record(OpKind kind, Tensor value, std::initializer_list<Var> parents, Pullback pullback);
  Var record(OpKind kind, Tensor value, std::span<const Var> parents, Pullback pullback);

  /// Reverse sweep from a scalar root. Gradients from earlier sweeps are cleared.
  void backward(Var root);

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  /// Gradient of the last backward root w.r.t. v; zeros if v was not reached.
  Tensor grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  OpKind kind(Var v) const { return nodes_[v.id()].kind; }
  std::size_t size() const noexcept { return nodes_.size(); }

  void accumulate(Var v, const Tensor& g);
  void accumulate(Var v, Tensor&& g);

 private:
  struct Node {
    OpKind kind;
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    Pullback pullback;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }

}  // namespace cgkoop::ad
