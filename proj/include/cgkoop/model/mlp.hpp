#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "cgkoop/numcore/rng.hpp"
#include "cgkoop/numcore/tensor.hpp"

namespace cgkoop::model {

using num::Tensor;

enum class Activation { Tanh, Identity };
enum class OutputTransform { None, Softplus };

std::string_view to_string(Activation a) noexcept;
std::string_view to_string(OutputTransform o) noexcept;
Activation parse_activation(std::string_view s);
OutputTransform parse_output_transform(std::string_view s);

/// Fully connected network. Rows are samples: x [B × in] -> [B × out].
/// Hidden layers apply `hidden`; the last layer is affine, optionally
/// followed by `output`.
struct Mlp {
  std::vector<Tensor> weights;  // [in × out]
  std::vector<Tensor> biases;   // [1 × out]
  Activation hidden = Activation::Tanh;
  OutputTransform output = OutputTransform::None;

  /// Glorot-uniform weights, zero biases. `widths` = {in, h1, ..., out}.
  static Mlp glorot(const std::vector<std::size_t>& widths, num::RngStream& rng);
  static Mlp zeros(const std::vector<std::size_t>& widths);

  std::size_t layers() const noexcept { return weights.size(); }
  std::size_t in_dim() const;
  std::size_t out_dim() const;
  std::size_t parameter_count() const noexcept;
  std::vector<std::size_t> widths() const;
};

/// Parameters of an Mlp as either plain tensors or tape variables.
template <class T>
struct MlpView {
  std::vector<T> weights;
  std::vector<T> biases;
  Activation hidden = Activation::Tanh;
  OutputTransform output = OutputTransform::None;
};

inline MlpView<Tensor> view(const Mlp& m) { return {m.weights, m.biases, m.hidden, m.output}; }

template <class T>
T forward(const MlpView<T>& net, T x) {
  const std::size_t n = net.weights.size();
  for (std::size_t l = 0; l < n; ++l) {
    x = add_row(matmul(x, net.weights[l]), net.biases[l]);
    if (l + 1 < n && net.hidden == Activation::Tanh) x = tanh(x);
  }
  if (net.output == OutputTransform::Softplus) x = softplus(x);
  return x;
}

}  // namespace cgkoop::model
