#include "raps/error.hpp"

namespace raps {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Config: return "ConfigError";
    case ErrorCode::Schema: return "SchemaError";
    case ErrorCode::Range: return "RangeError";
    case ErrorCode::NonIntegerRatio: return "NonIntegerRatio";
    case ErrorCode::CapacityViolation: return "CapacityViolation";
    case ErrorCode::DuplicateJob: return "DuplicateJob";
    case ErrorCode::UnknownJob: return "UnknownJob";
    case ErrorCode::SchedulerViolation: return "SchedulerViolation";
    case ErrorCode::StarvationGuard: return "StarvationGuard";
    case ErrorCode::SessionState: return "SessionStateError";
    case ErrorCode::Protocol: return "ProtocolError";
    case ErrorCode::Io: return "IoError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "UnknownError";
}

}  // namespace raps
