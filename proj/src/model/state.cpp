#include "cgkoop/model/state.hpp"

#include <string>

#include "cgkoop/errors.hpp"

namespace cgkoop::model {

StateSpec::StateSpec(std::size_t d_, std::vector<std::size_t> observed_, std::size_t dv_)
    : d(d_), dv(dv_), observed(std::move(observed_)) {
  validate();
  std::size_t k = 0;
  for (std::size_t i = 0; i < d; ++i) {
    if (k < observed.size() && observed[k] == i) {
      ++k;
      continue;
    }
    unobserved_.push_back(i);
  }
}

void StateSpec::validate() const {
  if (d == 0) throw ConfigError("state: d must be positive");
  if (dv == 0) throw ConfigError("state: d_v must be at least 1");
  if (observed.empty()) throw ConfigError("state: at least one observed index is required");
  if (observed.size() >= d) throw ConfigError("state: d1 must be smaller than d");
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (observed[i] >= d) {
      throw ConfigError("state: observed index " + std::to_string(observed[i]) + " out of range for d = " +
                        std::to_string(d));
    }
    if (i > 0 && observed[i] <= observed[i - 1]) throw ConfigError("state: observed indices must be strictly increasing");
  }
}

namespace {

Tensor gather_columns(const Tensor& states, const std::vector<std::size_t>& cols, std::size_t d) {
  if (states.cols() != d) throw ShapeError("state: expected trailing dim " + std::to_string(d) + ", got " + states.shape_string());
  const std::size_t t = states.rows();
  Tensor out = Tensor::matrix(t, cols.size());
  for (std::size_t r = 0; r < t; ++r) {
    for (std::size_t j = 0; j < cols.size(); ++j) out(r, j) = states(r, cols[j]);
  }
  return out;
}

}  // namespace

Tensor StateSpec::observed_part(const Tensor& states) const { return gather_columns(states, observed, d); }

Tensor StateSpec::unobserved_part(const Tensor& states) const { return gather_columns(states, unobserved_, d); }

Tensor StateSpec::merge(const Tensor& u1, const Tensor& u2) const {
  if (u1.cols() != d1() || u2.cols() != d2() || u1.rows() != u2.rows()) {
    throw ShapeError("state: cannot merge " + u1.shape_string() + " and " + u2.shape_string());
  }
  Tensor out = Tensor::matrix(u1.rows(), d);
  for (std::size_t r = 0; r < u1.rows(); ++r) {
    for (std::size_t j = 0; j < d1(); ++j) out(r, observed[j]) = u1(r, j);
    for (std::size_t j = 0; j < d2(); ++j) out(r, unobserved_[j]) = u2(r, j);
  }
  return out;
}

}  // namespace cgkoop::model
