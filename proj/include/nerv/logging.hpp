#pragma once

#include <string>

namespace nerv {

enum class LogLevel { debug = 0, info = 1, warning = 2, error = 3, off = 4 };

void set_log_level(LogLevel level);
LogLevel log_level();

void log(LogLevel level, const std::string& message);
inline void log_info(const std::string& m) { log(LogLevel::info, m); }
inline void log_warning(const std::string& m) { log(LogLevel::warning, m); }

/// Emits `message` at warning level the first time it is seen.
void warn_once(const std::string& message);

}  // namespace nerv
