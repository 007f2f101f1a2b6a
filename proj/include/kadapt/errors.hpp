#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kadapt {

enum class ErrorCode {
  kNonPositiveDefinite,
  kDimensionMismatch,
  kSingularInnovation,
  kWindowTooShort,
  kLengthMismatch,
  kSingularSystem,
  kMissingTruth,
  kConfigInvalid,
  kInsufficientData,
  kIoError,
  kInvalidArgument,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by run_filter when step `step` fails; code() is the cause.
class StepError : public Error {
 public:
  StepError(std::size_t step, const Error& cause);

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace kadapt
