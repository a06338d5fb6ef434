#pragma once

#include <functional>
#include <string>

namespace r2ad2 {

// Warnings and progress notes. The default sink writes to stderr; tests and
// the CLI may replace it.
using LogSink = std::function<void(const std::string&)>;

/// An empty sink restores the stderr default.
void set_log_sink(LogSink sink);
void log_info(const std::string& msg);
void log_warn(const std::string& msg);

}  // namespace r2ad2
