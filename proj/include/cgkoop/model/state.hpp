#pragma once

#include <cstddef>
#include <vector>

#include "cgkoop/numcore/tensor.hpp"

namespace cgkoop::model {

using num::Tensor;

/// Partition of a d-dimensional grid state into observed (u1) and
/// unobserved (u2) entries, plus the latent width d_v.
struct StateSpec {
  std::size_t d = 0;
  std::size_t dv = 0;
  std::vector<std::size_t> observed;  // 0-based, strictly increasing

  StateSpec() = default;
  StateSpec(std::size_t d, std::vector<std::size_t> observed, std::size_t dv);

  std::size_t d1() const noexcept { return observed.size(); }
  std::size_t d2() const noexcept { return d - observed.size(); }
  const std::vector<std::size_t>& unobserved() const noexcept { return unobserved_; }
  /// Length of the flat η output: d1 + d1·dv + dv + dv².
  std::size_t coeff_size() const noexcept { return d1() + d1() * dv + dv + dv * dv; }

  /// Throws ConfigError naming the violated constraint.
  void validate() const;

  /// Rows of `states` [T × d] restricted to the observed / unobserved columns.
  Tensor observed_part(const Tensor& states) const;
  Tensor unobserved_part(const Tensor& states) const;
  /// Inverse of the split: [T × d1], [T × d2] -> [T × d].
  Tensor merge(const Tensor& u1, const Tensor& u2) const;

 private:
  std::vector<std::size_t> unobserved_;
};

}  // namespace cgkoop::model
