#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace uniap {

/// Named failure cases. The CLI prints the name on standard error.
enum class ErrorCode {
  kDegenerateFeature,
  kInvalidTemperature,
  kEmptyMask,
  kDimensionMismatch,
  kNotNormalized,
  kInvalidAssignment,
  kIndexOutOfRange,
  kSelfLoop,
  kLengthMismatch,
  kBoxOutOfRange,
  kMalformedRle,
  kBadMagic,
  kUnsupportedVersion,
  kTruncatedPayload,
  kIoFailure,
  kMalformedJson,
  kInvalidConfig,
  kInvalidParams,
  kGridMismatch,
};

std::string_view error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_name(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace uniap
