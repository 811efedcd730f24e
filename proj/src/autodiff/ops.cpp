#include "cgkoop/autodiff/ops.hpp"

#include <cmath>
#include <memory>

#include "cgkoop/errors.hpp"
#include "cgkoop/numcore/linalg.hpp"

namespace cgkoop::ad {

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw ContractError("autodiff: operation on an empty Var");
  return *a.tape();
}

// Gradients arrive in the output's layout; parents keep their own dims.
Tensor like(const Tensor& g, const Tensor& target) {
  if (g.same_shape(target)) return g;
  return g.reshaped(target.dims().empty() ? std::span<const std::size_t>() : target.dims());
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  Tensor out = num::matmul(a.value(), b.value());
  return t.record(OpKind::MatMul, std::move(out), {a, b}, [a, b](Tape& tp, const Tensor& g, const Tensor&) {
    if (tp.requires_grad(a)) tp.accumulate(a, like(num::matmul(g, num::transpose(b.value())), a.value()));
    if (tp.requires_grad(b)) tp.accumulate(b, like(num::matmul(num::transpose(a.value()), g), b.value()));
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  return t.record(OpKind::Transpose, num::transpose(a.value()), {a}, [a](Tape& tp, const Tensor& g, const Tensor&) {
    tp.accumulate(a, like(num::transpose(g), a.value()));
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a);
  return t.record(OpKind::Add, num::add(a.value(), b.value()), {a, b}, [a, b](Tape& tp, const Tensor& g, const Tensor&) {
    tp.accumulate(a, like(g, a.value()));
    tp.accumulate(b, like(g, b.value()));
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a);
  return t.record(OpKind::Sub, num::sub(a.value(), b.value()), {a, b}, [a, b](Tape& tp, const Tensor& g, const Tensor&) {
    tp.accumulate(a, like(g, a.value()));
    if (tp.requires_grad(b)) tp.accumulate(b, like(num::scale(g, -1.0), b.value()));
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  return t.record(OpKind::ScalarMul, num::scale(a.value(), s), {a}, [a, s](Tape& tp, const Tensor& g, const Tensor&) {
    tp.accumulate(a, like(num::scale(g, s), a.value()));
  });
}

Var hadamard(Var a, Var b) {
  Tape& t = tape_of(a);
  return t.record(OpKind::Hadamard, num::hadamard(a.value(), b.value()), {a, b},
                  [a, b](Tape& tp, const Tensor& g, const Tensor&) {
                    if (tp.requires_grad(a)) tp.accumulate(a, like(num::hadamard(g, like(b.value(), g)), a.value()));
                    if (tp.requires_grad(b)) tp.accumulate(b, like(num::hadamard(g, like(a.value(), g)), b.value()));
                  });
}

Var add_row(Var x, Var bias) {
  Tape& t = tape_of(x);
  return t.record(OpKind::AddRow, num::add_row(x.value(), bias.value()), {x, bias},
                  [x, bias](Tape& tp, const Tensor& g, const Tensor&) {
                    tp.accumulate(x, like(g, x.value()));
                    if (!tp.requires_grad(bias)) return;
                    Tensor gb = bias.value();
                    auto out = gb.data();
                    std::fill(out.begin(), out.end(), 0.0);
                    const std::size_t n = g.cols();
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                      for (std::size_t j = 0; j < n; ++j) out[j] += g[r * n + j];
                    }
                    tp.accumulate(bias, std::move(gb));
                  });
}

Var tanh(Var a) {
  Tape& t = tape_of(a);
  return t.record(OpKind::Tanh, num::tanh(a.value()), {a}, [a](Tape& tp, const Tensor& g, const Tensor& y) {
    Tensor d = like(g, a.value());
    auto dd = d.data();
    for (std::size_t i = 0; i < dd.size(); ++i) dd[i] *= 1.0 - y[i] * y[i];
    tp.accumulate(a, std::move(d));
  });
}

Var square(Var a) {
  Tape& t = tape_of(a);
  return t.record(OpKind::Square, num::square(a.value()), {a}, [a](Tape& tp, const Tensor& g, const Tensor&) {
    Tensor d = like(g, a.value());
    const auto x = a.value().data();
    auto dd = d.data();
    for (std::size_t i = 0; i < dd.size(); ++i) dd[i] *= 2.0 * x[i];
    tp.accumulate(a, std::move(d));
  });
}

Var softplus(Var a) {
  Tape& t = tape_of(a);
  return t.record(OpKind::Softplus, num::softplus(a.value()), {a}, [a](Tape& tp, const Tensor& g, const Tensor&) {
    Tensor d = like(g, a.value());
    const auto x = a.value().data();
    auto dd = d.data();
    for (std::size_t i = 0; i < dd.size(); ++i) dd[i] *= 1.0 / (1.0 + std::exp(-x[i]));
    tp.accumulate(a, std::move(d));
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  return t.record(OpKind::Sum, num::sum(a.value()), {a}, [a](Tape& tp, const Tensor& g, const Tensor&) {
    Tensor d = a.value();
    for (double& v : d.data()) v = g.item();
    tp.accumulate(a, std::move(d));
  });
}

Var mean(Var a) {
  Tape& t = tape_of(a);
  return t.record(OpKind::Mean, num::mean(a.value()), {a}, [a](Tape& tp, const Tensor& g, const Tensor&) {
    Tensor d = a.value();
    const double s = g.item() / static_cast<double>(d.size());
    for (double& v : d.data()) v = s;
    tp.accumulate(a, std::move(d));
  });
}

Var slice(Var a, std::size_t offset, std::size_t count) {
  Tape& t = tape_of(a);
  return t.record(OpKind::Slice, num::slice(a.value(), offset, count), {a},
                  [a, offset, count](Tape& tp, const Tensor& g, const Tensor&) {
                    Tensor d = a.value();
                    auto dd = d.data();
                    std::fill(dd.begin(), dd.end(), 0.0);
                    for (std::size_t i = 0; i < count; ++i) dd[offset + i] = g[i];
                    tp.accumulate(a, std::move(d));
                  });
}

Var reshape(Var a, std::initializer_list<std::size_t> dims) {
  Tape& t = tape_of(a);
  return t.record(OpKind::Reshape, a.value().reshaped(dims), {a},
                  [a](Tape& tp, const Tensor& g, const Tensor&) { tp.accumulate(a, like(g, a.value())); });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  Tape& t = tape_of(parts.front());
  std::vector<Tensor> values;
  values.reserve(parts.size());
  for (const Var& p : parts) values.push_back(p.value());
  std::vector<Var> ps(parts.begin(), parts.end());
  return t.record(OpKind::Concat, num::concat(values), parts, [ps](Tape& tp, const Tensor& g, const Tensor&) {
    std::size_t offset = 0;
    for (const Var& p : ps) {
      const std::size_t n = p.value().size();
      if (tp.requires_grad(p)) tp.accumulate(p, like(num::slice(g, offset, n), p.value()));
      offset += n;
    }
  });
}

Var diag_embed(Var v) {
  Tape& t = tape_of(v);
  return t.record(OpKind::DiagEmbed, num::diag_embed(v.value()), {v}, [v](Tape& tp, const Tensor& g, const Tensor&) {
    Tensor d = v.value();
    const std::size_t n = d.size();
    for (std::size_t i = 0; i < n; ++i) d[i] = g(i, i);
    tp.accumulate(v, std::move(d));
  });
}

Var solve_spd(Var a, Var b) {
  Tape& t = tape_of(a);
  auto factor = std::make_shared<num::Ldlt>(num::ldlt(a.value()));
  Tensor x = factor->solve(b.value());
  return t.record(OpKind::SolveSpd, std::move(x), {a, b}, [a, b, factor](Tape& tp, const Tensor& g, const Tensor& x) {
    Tensor gb = factor->solve(g);
    if (tp.requires_grad(a)) {
      Tensor ga = num::scale(num::symmetrize(num::matmul(gb, num::transpose(x))), -1.0);
      tp.accumulate(a, like(ga, a.value()));
    }
    if (tp.requires_grad(b)) tp.accumulate(b, like(gb, b.value()));
  });
}

Var symmetrize(Var a) {
  return scale(add(a, transpose(a)), 0.5);
}

}  // namespace cgkoop::ad
