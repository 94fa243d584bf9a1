#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace csats {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents that do not conform for an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition (non-scalar loss, missing grad, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Invalid model or experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced by a forward operation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Label outside the class vocabulary or out of range.
class LabelError : public Error {
 public:
  using Error::Error;
};

/// Malformed dataset text; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Input the pipeline deliberately does not handle (unequal lengths, baseline feature export, ...).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Statistics that are undefined for the given input (empty reduction, zero marginal, zero baseline).
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace csats
