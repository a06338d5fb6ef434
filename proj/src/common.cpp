#include "r2ad2/hash.hpp"
#include "r2ad2/log.hpp"

#include <cstdio>
#include <iostream>
#include <mutex>

namespace r2ad2 {

std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                          std::uint64_t index) {
  return Hasher{}.u64(base).str(tag).u64(index).digest();
}

namespace {
std::mutex g_log_mutex;
void to_stderr(const std::string& m) { std::cerr << m << '\n'; }
LogSink& sink() {
  static LogSink s = to_stderr;
  return s;
}
}  // namespace

void set_log_sink(LogSink s) {
  std::lock_guard lock(g_log_mutex);
  sink() = s ? std::move(s) : LogSink(to_stderr);
}

void log_info(const std::string& msg) {
  std::lock_guard lock(g_log_mutex);
  if (sink()) sink()(msg);
}

void log_warn(const std::string& msg) {
  std::lock_guard lock(g_log_mutex);
  if (sink()) sink()("warning: " + msg);
}

}  // namespace r2ad2
