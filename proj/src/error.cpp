#include "uniap/error.hpp"

namespace uniap {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateFeature: return "DegenerateFeature";
    case ErrorCode::kInvalidTemperature: return "InvalidTemperature";
    case ErrorCode::kEmptyMask: return "EmptyMask";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNotNormalized: return "NotNormalized";
    case ErrorCode::kInvalidAssignment: return "InvalidAssignment";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kSelfLoop: return "SelfLoop";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kBoxOutOfRange: return "BoxOutOfRange";
    case ErrorCode::kMalformedRle: return "MalformedRle";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kUnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::kTruncatedPayload: return "TruncatedPayload";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kMalformedJson: return "MalformedJson";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kInvalidParams: return "InvalidParams";
    case ErrorCode::kGridMismatch: return "GridMismatch";
  }
  return "Unknown";
}

}  // namespace uniap
