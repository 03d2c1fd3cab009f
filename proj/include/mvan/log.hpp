#pragma once

#include <functional>
#include <string>

namespace mvan {

enum class LogLevel { Debug = 0, Info = 1, Warning = 2, Error = 3 };

/// Messages below this level are dropped. Defaults to Info.
void set_log_level(LogLevel level);
LogLevel log_level();

/// Replaces the sink (stderr by default). Pass an empty function to restore it.
void set_log_sink(std::function<void(LogLevel, const std::string&)> sink);

void log_message(LogLevel level, const std::string& msg);
inline void log_debug(const std::string& msg) { log_message(LogLevel::Debug, msg); }
inline void log_info(const std::string& msg) { log_message(LogLevel::Info, msg); }
inline void log_warning(const std::string& msg) { log_message(LogLevel::Warning, msg); }

}  // namespace mvan
