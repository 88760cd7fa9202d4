#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mmseq {

// Machine-readable category carried by every library exception. The CLI maps
// these onto exit codes and prints them as `error: <kind>: <detail>`.
enum class ErrorKind {
  kInvalidInput,
  kDomain,
  kNumericalDegeneracy,
  kConvergence,
  kLinearAlgebra,
  kConfig,
  kIo,
  kConstruction,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(detail), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidInputError : public Error {
 public:
  explicit InvalidInputError(const std::string& detail)
      : Error(ErrorKind::kInvalidInput, detail) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& detail)
      : Error(ErrorKind::kDomain, detail) {}
};

class NumericalDegeneracyError : public Error {
 public:
  explicit NumericalDegeneracyError(const std::string& detail)
      : Error(ErrorKind::kNumericalDegeneracy, detail) {}
};

class LinearAlgebraError : public Error {
 public:
  explicit LinearAlgebraError(const std::string& detail)
      : Error(ErrorKind::kLinearAlgebra, detail) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& detail)
      : Error(ErrorKind::kConfig, detail) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& detail) : Error(ErrorKind::kIo, detail) {}
};

// Raised when a construction self-check fails (e.g. the covering audit).
class ConstructionError : public Error {
 public:
  explicit ConstructionError(const std::string& detail)
      : Error(ErrorKind::kConstruction, detail) {}
};

// Iterative design did not settle; carries the last iterate so callers can
// inspect or reuse it.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& detail, std::vector<double> last_iterate)
      : Error(ErrorKind::kConvergence, detail),
        last_iterate_(std::move(last_iterate)) {}

  const std::vector<double>& last_iterate() const noexcept {
    return last_iterate_;
  }

 private:
  std::vector<double> last_iterate_;
};

}  // namespace mmseq
