#pragma once

#include <stdexcept>
#include <string>

namespace defw {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (non-symmetric W, infeasible
/// point, mismatched dimensions, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class DisconnectedTopology : public Error {
 public:
  using Error::Error;
};

/// An iterative routine hit its iteration cap before reaching tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, int iterations)
      : Error(what + " (after " + std::to_string(iterations) + " iterations)"),
        base_(what),
        iterations_(iterations) {}

  int iterations() const noexcept { return iterations_; }
  /// Message without the iteration-count suffix.
  const std::string& base_message() const noexcept { return base_; }

 private:
  std::string base_;
  int iterations_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace defw
