#pragma once

#include <stdexcept>
#include <string>

namespace dv {

enum class ErrorCode {
  Argument = 1,
  Format,
  Unsupported,
  Dimensionality,
  Io,
  Geometry,
  DegenerateMetric,
  RegistrationFailed,
  Spec,
  Config,
  EmptyReference,
  EmptySurface,
  Normalization,
  DegenerateHistogram,
  Stage,
  Locked,
  Internal,
};

/// Stable lower-case name used in CLI error lines ("error: <name>: ...").
const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace dv
