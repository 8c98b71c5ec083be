#ifndef TSDOA_ERRORS_HPP
#define TSDOA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace tsdoa {

/// Configuration file / parameter validation failure.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A gain estimate too close to zero to divide by.
class DegenerateGainError : public std::runtime_error {
public:
  DegenerateGainError(int sensor, const std::string& what)
      : std::runtime_error(what), sensor_(sensor) {}
  int sensor() const noexcept { return sensor_; }

private:
  int sensor_;
};

/// Predicted array response too close to zero at some sensor.
class DegenerateResponseError : public std::runtime_error {
public:
  DegenerateResponseError(int sensor, const std::string& what)
      : std::runtime_error(what), sensor_(sensor) {}
  int sensor() const noexcept { return sensor_; }

private:
  int sensor_;
};

/// Least-squares system too ill-conditioned to trust.
class IllConditionedError : public std::runtime_error {
public:
  explicit IllConditionedError(const std::string& what) : std::runtime_error(what) {}
};

/// A solver produced a non-finite value.
class NumericalFailureError : public std::runtime_error {
public:
  explicit NumericalFailureError(const std::string& what) : std::runtime_error(what) {}
};

/// Wraps any error thrown inside the two-stage pipeline with the stage name.
class PipelineError : public std::runtime_error {
public:
  PipelineError(std::string stage, const std::string& what)
      : std::runtime_error("[" + stage + "] " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

private:
  std::string stage_;
};

}  // namespace tsdoa

#endif
