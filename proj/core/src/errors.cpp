#include "rba/errors.hpp"

namespace rba {

const char* to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kConfig: return "config";
    case ErrorCategory::kIo: return "io";
    case ErrorCategory::kFormat: return "format";
    case ErrorCategory::kMismatch: return "mismatch";
    case ErrorCategory::kInvalid: return "invalid_argument";
    case ErrorCategory::kNumeric: return "numeric";
    case ErrorCategory::kInternal: return "internal";
  }
  return "internal";
}

int exit_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kConfig: return 2;
    case ErrorCategory::kIo: return 3;
    case ErrorCategory::kFormat: return 4;
    case ErrorCategory::kMismatch: return 5;
    case ErrorCategory::kInvalid: return 6;
    case ErrorCategory::kNumeric: return 7;
    case ErrorCategory::kInternal: return 1;
  }
  return 1;
}

void fail(ErrorCategory category, const std::string& message) {
  throw EngineError(category, message);
}

}  // namespace rba
