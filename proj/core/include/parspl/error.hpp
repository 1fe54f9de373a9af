#pragma once

#include <stdexcept>
#include <string>

namespace parspl {

enum class ErrorCode {
  dimension,
  invalid_argument,
  factorization,
  format,
  version,
  io,
  internal,
  no_candidate,
};

const char* to_string(ErrorCode code) noexcept;

/// Base exception for everything thrown by the library.
///
/// The message is always a single line so that the command-line tool can
/// forward it verbatim as a machine-parsable diagnostic.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& message)
      : Error(ErrorCode::dimension, message) {}
};

class FactorizationError : public Error {
 public:
  FactorizationError(const std::string& message, int column)
      : Error(ErrorCode::factorization, message), column_(column) {}

  /// Column (in permuted order) whose pivot failed.
  [[nodiscard]] int column() const noexcept { return column_; }

 private:
  int column_;
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& message)
      : Error(ErrorCode::format, message) {}
};

class VersionError : public Error {
 public:
  explicit VersionError(const std::string& message)
      : Error(ErrorCode::version, message) {}
};

}  // namespace parspl
