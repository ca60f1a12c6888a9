#pragma once

#include <stdexcept>
#include <string>

namespace rba {

// Error categories surfaced by the CLI as machine-readable tags and
// distinct exit codes.
enum class ErrorCategory {
  kConfig,    // bad or unknown configuration key/value
  kIo,        // missing file, unreadable path
  kFormat,    // bad magic, truncated payload, malformed text document
  kMismatch,  // checkpoint/config/shape disagreement
  kInvalid,   // precondition violation on an API call
  kNumeric,   // non-finite value produced from finite inputs
  kInternal,
};

const char* to_string(ErrorCategory category);
int exit_code(ErrorCategory category);

class EngineError : public std::runtime_error {
 public:
  EngineError(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] void fail(ErrorCategory category, const std::string& message);

inline void require(bool condition, ErrorCategory category, const std::string& message) {
  if (!condition) fail(category, message);
}

}  // namespace rba
