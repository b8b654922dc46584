#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace optforecast {

/// Coarse error classes; the CLI maps each to an exit code.
enum class ErrorKind {
  usage,       // bad flags or config keys
  validation,  // input data violates a documented invariant
  domain,      // argument outside a function's mathematical domain
  numerical,   // iterative method failed to converge / diverged
  io,          // filesystem
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::size_t row = 0, std::string field = {})
      : Error(ErrorKind::validation, what), row_(row), field_(std::move(field)) {}
  /// 1-based data row (0 when not row-specific).
  std::size_t row() const noexcept { return row_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t row_;
  std::string field_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorKind::domain, what) {}
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(ErrorKind::numerical, what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

}  // namespace optforecast
