#pragma once

#include <stdexcept>
#include <string>

namespace raps {

enum class ErrorCode {
  Config,
  Schema,
  Range,
  NonIntegerRatio,
  CapacityViolation,
  DuplicateJob,
  UnknownJob,
  SchedulerViolation,
  StarvationGuard,
  SessionState,
  Protocol,
  Io,
  InvalidArgument,
};

const char* error_code_name(ErrorCode code) noexcept;

/// Every failure raised by the simulator core carries one of the codes above;
/// the C API maps them one-to-one onto raps_status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace raps
