#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace regime_tagger {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kSuccess = 0,
  kConfig = 2,
  kData = 3,
  kDivergence = 4,
};

/// Base class for all library errors. Each subclass maps onto one exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  [[nodiscard]] virtual ExitCode exit_code() const noexcept = 0;
};

/// Invalid parameters, malformed configuration, violated preconditions.
class ConfigError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::kConfig; }
};

/// Bad input data: unparsable CSV cells, duplicate timestamps, short series.
class DataError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::kData; }
};

/// A numerical integrator produced a non-finite state.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t step, const std::string& what)
      : Error("divergence at step " + std::to_string(step) + ": " + what), step_(step), detail_(what) {}

  [[nodiscard]] std::size_t step() const noexcept { return step_; }
  /// The message without the step prefix.
  [[nodiscard]] const std::string& detail() const noexcept { return detail_; }
  [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::kDivergence; }

 private:
  std::size_t step_;
  std::string detail_;
};

}  // namespace regime_tagger
