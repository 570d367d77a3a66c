#ifndef MPRT_ERROR_H_
#define MPRT_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace mprt {

// Error classes reported in experiment manifests. Keep names stable: they are
// written to disk.
enum class ErrorCode {
  kInvalidArgument,
  kShapeMismatch,
  kNonFinite,
  kFormat,
  kVersionMismatch,
  kTrainingDiverged,
  kAllZeroAttribution,
  kDegenerateComplexity,
  kZeroVariance,
  kUnsupported,
  kIo,
};

std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }
  std::string_view code_name() const { return ErrorCodeName(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] void Fail(ErrorCode code, const std::string& message);

inline void Require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) Fail(code, message);
}

}  // namespace mprt

#endif  // MPRT_ERROR_H_
