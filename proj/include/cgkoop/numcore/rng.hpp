#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string_view>

#include "cgkoop/numcore/tensor.hpp"

namespace cgkoop::num {

/// Counter-based generator: the k-th 64-bit word is a bijective mix of
/// (seed, k), so a stream is fully described by its seed and position.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t counter = 0) : seed_(seed), counter_(counter) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform on the open interval (0, 1).
  double uniform() noexcept;
  /// Standard normal via Box–Muller; the paired variate is kept for the next call.
  double normal() noexcept;
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
  std::optional<double> spare_;
};

/// Tensor of i.i.d. N(0, 1) entries.
Tensor gaussian(RngStream& rng, std::initializer_list<std::size_t> dims);
Tensor gaussian(RngStream& rng, std::span<const std::size_t> dims);

/// Derives an independent stream seed from (seed, role tag, index).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) noexcept;

}  // namespace cgkoop::num
