#pragma once

#include <functional>
#include <string>

namespace raps {

enum class LogLevel { Info = 0, Warning = 1, Error = 2 };

using LogSink = std::function<void(LogLevel, const std::string&)>;

/// Replaces the process-wide sink (default: stderr). Pass nullptr to restore
/// the default.
void set_log_sink(LogSink sink);
void log_message(LogLevel level, const std::string& message);
inline void log_warning(const std::string& message) { log_message(LogLevel::Warning, message); }

}  // namespace raps
