#pragma once

#include <stdexcept>
#include <string>

namespace gmmproj {

enum class ErrorKind { validation, numerical };

// Base for every error the library raises. `code` is a stable
// machine-readable identifier (e.g. "dimension_mismatch").
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& message)
      : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

class ValidationError : public Error {
 public:
  ValidationError(std::string code, const std::string& message)
      : Error(ErrorKind::validation, std::move(code), message) {}
};

class NumericalError : public Error {
 public:
  NumericalError(std::string code, const std::string& message)
      : Error(ErrorKind::numerical, std::move(code), message) {}
};

// Covariance that cannot be factored even after diagonal regularization.
class SingularModelError : public NumericalError {
 public:
  explicit SingularModelError(const std::string& message)
      : NumericalError("singular_model", message) {}
};

inline void require(bool cond, const char* code, const std::string& message) {
  if (!cond) throw ValidationError(code, message);
}

}  // namespace gmmproj
