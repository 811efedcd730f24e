#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cgkoop {

/// Dimension mismatch between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Violated API precondition that is not a shape problem.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid user configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Factorization breakdown. `pivot_index` is the failing pivot, `pivot` its value,
/// `step` the time step when raised from inside a recursion (npos otherwise).
class NumericalError : public std::runtime_error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  NumericalError(const std::string& what, std::size_t pivot_index, double pivot,
                 std::size_t step = npos)
      : std::runtime_error(what), pivot_index_(pivot_index), pivot_(pivot), step_(step) {}

  std::size_t pivot_index() const noexcept { return pivot_index_; }
  double pivot() const noexcept { return pivot_; }
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t pivot_index_;
  double pivot_;
  std::size_t step_;
};

/// Non-finite values appeared during a time integration or rollout.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace cgkoop
