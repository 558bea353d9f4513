#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace blindsr {

/// Bad argument to a public operation (wrong shape, out-of-range level, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ParseErrorKind {
  io,
  malformed_header,
  truncated_payload,
  dtype_mismatch,
  dimension_mismatch,
};

inline const char* to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::io: return "io";
    case ParseErrorKind::malformed_header: return "malformed-header";
    case ParseErrorKind::truncated_payload: return "truncated-payload";
    case ParseErrorKind::dtype_mismatch: return "dtype-mismatch";
    case ParseErrorKind::dimension_mismatch: return "dimension-mismatch";
  }
  return "unknown";
}

/// Failure to decode an on-disk artifact (tensor file, image, config).
class ParseError : public std::runtime_error {
 public:
  ParseError(ParseErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ParseErrorKind kind() const noexcept { return kind_; }

 private:
  ParseErrorKind kind_;
};

/// Non-finite values appeared during training or sampling.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::int64_t step, const std::string& what)
      : std::runtime_error("diverged at step " + std::to_string(step) + ": " + what), step_(step) {}

  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

/// The schedule produced sqrt(alpha) == 0, so x cannot be recovered from z_t.
class SingularScheduleError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class EmptyCorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace blindsr
