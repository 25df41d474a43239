#pragma once

#include <stdexcept>
#include <string>

namespace twinsync {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite or out-of-domain numeric input.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an operation precondition (dimension mismatch, bad dt, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

class UnreachableTarget : public Error {
 public:
  UnreachableTarget(const std::string& what, double best_residual)
      : Error(what), best_residual_(best_residual) {}
  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

class ReplanInfeasible : public Error {
 public:
  using Error::Error;
};

class RejectedCommand : public Error {
 public:
  using Error::Error;
};

class LinkTimeout : public Error {
 public:
  using Error::Error;
};

class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

class UndefinedRehearsal : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

class Conflict : public Error {
 public:
  using Error::Error;
};

/// Invalid scenario document. `field` is a JSON pointer (or "line N, column M"
/// for syntax errors).
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class CsvError : public Error {
 public:
  using Error::Error;
};

}  // namespace twinsync
