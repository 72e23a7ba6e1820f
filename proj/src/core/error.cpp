#include "dynavessel/error.hpp"

namespace dv {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Argument: return "argument";
    case ErrorCode::Format: return "format";
    case ErrorCode::Unsupported: return "unsupported";
    case ErrorCode::Dimensionality: return "dimensionality";
    case ErrorCode::Io: return "io";
    case ErrorCode::Geometry: return "geometry";
    case ErrorCode::DegenerateMetric: return "degenerate_metric";
    case ErrorCode::RegistrationFailed: return "registration_failed";
    case ErrorCode::Spec: return "spec";
    case ErrorCode::Config: return "config";
    case ErrorCode::EmptyReference: return "empty_reference";
    case ErrorCode::EmptySurface: return "empty_surface";
    case ErrorCode::Normalization: return "normalization";
    case ErrorCode::DegenerateHistogram: return "degenerate_histogram";
    case ErrorCode::Stage: return "stage";
    case ErrorCode::Locked: return "locked";
    case ErrorCode::Internal: return "internal";
  }
  return "internal";
}

}  // namespace dv
