#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rijke4dvar {

/// Invalid parameters, malformed configuration, or inconsistent problem setup.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a forward step produces a non-finite state.
class IntegrationDiverged : public std::runtime_error {
 public:
  explicit IntegrationDiverged(std::size_t step)
      : std::runtime_error("integration diverged at step " + std::to_string(step)),
        step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Dense-output request outside the integrated window.
class OutOfWindow : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Non-finite cost, gradient or adjoint.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rijke4dvar
