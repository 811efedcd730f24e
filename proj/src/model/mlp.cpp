#include "cgkoop/model/mlp.hpp"

#include <cmath>
#include <string>

#include "cgkoop/errors.hpp"
#include "cgkoop/numcore/linalg.hpp"

namespace cgkoop::model {

std::string_view to_string(Activation a) noexcept { return a == Activation::Tanh ? "tanh" : "identity"; }

std::string_view to_string(OutputTransform o) noexcept { return o == OutputTransform::Softplus ? "softplus" : "none"; }

Activation parse_activation(std::string_view s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

OutputTransform parse_output_transform(std::string_view s) {
  if (s == "none") return OutputTransform::None;
  if (s == "softplus") return OutputTransform::Softplus;
  throw ConfigError("unknown output transform '" + std::string(s) + "'");
}

Mlp Mlp::zeros(const std::vector<std::size_t>& widths) {
  if (widths.size() < 2) throw ConfigError("mlp: need at least input and output widths");
  Mlp m;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    if (widths[l] == 0 || widths[l + 1] == 0) throw ConfigError("mlp: layer widths must be positive");
    m.weights.push_back(Tensor::matrix(widths[l], widths[l + 1]));
    m.biases.push_back(Tensor::matrix(1, widths[l + 1]));
  }
  return m;
}

Mlp Mlp::glorot(const std::vector<std::size_t>& widths, num::RngStream& rng) {
  Mlp m = zeros(widths);
  for (auto& w : m.weights) {
    const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (double& v : w.data()) v = a * (2.0 * rng.uniform() - 1.0);
  }
  return m;
}

std::size_t Mlp::in_dim() const {
  if (weights.empty()) throw ContractError("mlp: empty network");
  return weights.front().rows();
}

std::size_t Mlp::out_dim() const {
  if (weights.empty()) throw ContractError("mlp: empty network");
  return weights.back().cols();
}

std::size_t Mlp::parameter_count() const noexcept {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

std::vector<std::size_t> Mlp::widths() const {
  std::vector<std::size_t> w{in_dim()};
  for (const auto& t : weights) w.push_back(t.cols());
  return w;
}

}  // namespace cgkoop::model
