#include "kadapt/errors.hpp"

namespace kadapt {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonPositiveDefinite: return "NonPositiveDefinite";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kSingularInnovation: return "SingularInnovation";
    case ErrorCode::kWindowTooShort: return "WindowTooShort";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kSingularSystem: return "SingularSystem";
    case ErrorCode::kMissingTruth: return "MissingTruth";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

StepError::StepError(std::size_t step, const Error& cause)
    : Error(cause.code(), "step " + std::to_string(step) + ": " + cause.what()), step_(step) {}

}  // namespace kadapt
