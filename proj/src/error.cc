#include "mprt/error.h"

namespace mprt {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kFormat: return "FormatError";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kTrainingDiverged: return "TrainingDiverged";
    case ErrorCode::kAllZeroAttribution: return "AllZeroAttribution";
    case ErrorCode::kDegenerateComplexity: return "DegenerateComplexity";
    case ErrorCode::kZeroVariance: return "ZeroVariance";
    case ErrorCode::kUnsupported: return "Unsupported";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

void Fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace mprt
