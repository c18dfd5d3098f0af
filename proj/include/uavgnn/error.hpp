#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace uavgnn {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Invalid user-facing configuration (counts, ranges, unknown keys).
class ConfigError : public Error {
public:
  using Error::Error;
};

// Inconsistent array shapes between cooperating structures.
class DimensionError : public Error {
public:
  using Error::Error;
};

// Math domain violation inside a traced computation (log of non-positive, division by zero).
class DomainError : public Error {
public:
  DomainError(const std::string& what, double offending)
      : Error(what + " (operand = " + std::to_string(offending) + ")"), operand_(offending) {}

  double operand() const noexcept { return operand_; }

private:
  double operand_;
};

// Malformed dataset or checkpoint file. Carries the 1-based line and the field at fault.
class ParseError : public Error {
public:
  ParseError(std::size_t line, std::string field, const std::string& detail)
      : Error("line " + std::to_string(line) + ", field '" + field + "': " + detail),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

private:
  std::size_t line_;
  std::string field_;
};

// Numerical failure during optimization (non-finite gradient, divergence).
class NumericError : public Error {
public:
  using Error::Error;
};

}  // namespace uavgnn
