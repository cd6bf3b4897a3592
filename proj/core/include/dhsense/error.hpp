#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dhsense {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters, unresolvable sensor maps, bad CLI/config values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A file parsed fine but does not carry the columns/kinds we require.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error(what + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Iterative solver gave up; carries the last residual it saw.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what + " (last residual " + std::to_string(residual) + ")"), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Physically meaningless request (zero flow where a division needs flow, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, imaginary residue, diverging loss.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace dhsense
