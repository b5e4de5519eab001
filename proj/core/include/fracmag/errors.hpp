#pragma once

#include <stdexcept>
#include <string>

namespace fracmag {

enum class ErrorKind {
  config,        // malformed or inconsistent scenario
  precondition,  // caller violated an operation's precondition
  numeric,       // solver breakdown, non-convergence, ill-conditioning
  hypothesis,    // geometric hypothesis of the uniqueness theorems fails
  domain,        // evaluation outside the domain of a formula
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct PreconditionError : Error {
  explicit PreconditionError(const std::string& what) : Error(ErrorKind::precondition, what) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

struct HypothesisError : Error {
  explicit HypothesisError(const std::string& what) : Error(ErrorKind::hypothesis, what) {}
};

struct DomainError : Error {
  explicit DomainError(const std::string& what) : Error(ErrorKind::domain, what) {}
};

}  // namespace fracmag
