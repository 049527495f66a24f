#pragma once

#include <stdexcept>
#include <string>

namespace nglare {

// Error categories map onto distinct CLI exit codes.
enum class ErrorKind { Config, Data, Numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, std::string hint = {})
      : std::runtime_error(what), kind_(kind), hint_(std::move(hint)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& hint() const noexcept { return hint_; }

 private:
  ErrorKind kind_;
  std::string hint_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what, std::string hint = {})
      : Error(ErrorKind::Config, what, std::move(hint)) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what, std::string hint = {})
      : Error(ErrorKind::Data, what, std::move(hint)) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what, std::string hint = {})
      : Error(ErrorKind::Numeric, what, std::move(hint)) {}
};

// Raised when a trajectory has no usable arc length.
class DegenerateTrajectoryError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Raised when benign samples span no variance.
class DegenerateManifoldError : public NumericError {
 public:
  using NumericError::NumericError;
};

// A ratio or statistic whose denominator vanished. Distinct from a value of 0.
class UndefinedMetricError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace nglare
