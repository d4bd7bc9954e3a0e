#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ocreg {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Evaluation outside the domain of log, sqrt, pow or division.
class DomainError : public Error {
 public:
  DomainError(const std::string& what, std::string subexpr, std::string point)
      : Error(what + " in '" + subexpr + "' at " + point),
        subexpr_(std::move(subexpr)),
        point_(std::move(point)) {}
  const std::string& subexpr() const noexcept { return subexpr_; }
  const std::string& point() const noexcept { return point_; }

 private:
  std::string subexpr_;
  std::string point_;
};

/// A derivative was requested inside the guard band of a sqrt/abs kink.
class NonDifferentiableError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Problem file or configuration does not validate. `line` is 0 when unknown.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::string key = {}, std::size_t line = 0)
      : Error(format(what, key, line)), key_(std::move(key)), line_(line) {}
  const std::string& key() const noexcept { return key_; }
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& what, const std::string& key, std::size_t line) {
    std::string s = what;
    if (!key.empty()) s += " (key '" + key + "')";
    if (line != 0) s += " (line " + std::to_string(line) + ")";
    return s;
  }
  std::string key_;
  std::size_t line_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A domain-type invariant (box on v, multiplier sign, monotone time, ...) is violated.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace ocreg
