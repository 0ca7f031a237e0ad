#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace simrep {

/// Layer or dataset dimensions do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input values are unusable (non-finite, empty, out of range).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A model simulation failed numerically.
class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, double failure_time = 0.0)
      : std::runtime_error(what), failure_time_(failure_time) {}
  double failure_time() const noexcept { return failure_time_; }

 private:
  double failure_time_;
};

/// Contrastive training diverged or a member failed.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Run configuration failed validation.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace simrep
