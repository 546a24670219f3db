#include "raps/log.hpp"

#include <iostream>
#include <mutex>

namespace raps {

namespace {
std::mutex g_mutex;
LogSink g_sink;
}  // namespace

void set_log_sink(LogSink sink) {
  std::lock_guard lock(g_mutex);
  g_sink = std::move(sink);
}

void log_message(LogLevel level, const std::string& message) {
  std::lock_guard lock(g_mutex);
  if (g_sink) {
    g_sink(level, message);
    return;
  }
  static constexpr const char* kTags[] = {"info", "warning", "error"};
  std::cerr << "raps " << kTags[static_cast<int>(level)] << ": " << message << '\n';
}

}  // namespace raps
