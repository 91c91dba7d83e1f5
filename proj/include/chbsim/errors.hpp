#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace chbsim {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller broke an operation's precondition (dimension mismatch, empty shard, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Parameter values outside their admissible range.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A loss evaluation produced a non-finite intermediate.
class NumericDomainError : public Error {
 public:
  NumericDomainError(const std::string& what, std::size_t sample_index)
      : Error(what + " (sample " + std::to_string(sample_index) + ")"),
        sample_index_(sample_index) {}
  std::size_t sample_index() const noexcept { return sample_index_; }

 private:
  std::size_t sample_index_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : Error(what + " (last residual " + std::to_string(last_residual) + ")"),
        last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

class UnsupportedModelError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; line numbers are 1-based.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line), detail_(what) {}
  std::size_t line() const noexcept { return line_; }
  /// Message without the line prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

/// Dataset-level problems: empty input, degenerate shards, unreadable files.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Broken protocol bookkeeping (duplicate sender, non-monotone trace, ...).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(long k, double theta_norm)
      : Error("iterate diverged at k=" + std::to_string(k) +
              " (|theta|=" + std::to_string(theta_norm) + ")"),
        k_(k),
        theta_norm_(theta_norm) {}
  long k() const noexcept { return k_; }
  double theta_norm() const noexcept { return theta_norm_; }

 private:
  long k_;
  double theta_norm_;
};

/// Rate constant requested for parameters that do not certify a linear rate.
class RateUndefinedError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::size_t line)
      : Error(line ? "config line " + std::to_string(line) + ": " + what
                   : "config: " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace chbsim
