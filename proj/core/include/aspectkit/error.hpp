#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace aspectkit {

enum class ErrorKind {
  Input,            // malformed or missing input data
  Config,           // invalid configuration
  Parse,            // model output violates the JSON contract
  Unscripted,       // scripted backend has no entry for a prompt
  Backend,          // backend answered, but not usefully (bad status, bad payload)
  Auth,             // credential rejected
  Unavailable,      // backend unreachable after retries
  UndefinedMetric,  // metric has no defined value for the input
  Numeric,          // non-finite values during optimization
  Checkpoint,       // checkpoint file inconsistent with the run
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Auth and Unavailable mean no further calls can succeed; everything else
  // is scoped to the single request that produced it.
  bool aborts_run() const noexcept {
    return kind_ == ErrorKind::Auth || kind_ == ErrorKind::Unavailable;
  }

 private:
  ErrorKind kind_;
};

// Parse failure that keeps the offending model output for diagnostics.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::string raw)
      : Error(ErrorKind::Parse, message), raw_(std::move(raw)) {}

  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

}  // namespace aspectkit
