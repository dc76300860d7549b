#pragma once

#include <string>

namespace kgfuse {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

/// Level parsed once from KGFUSE_LOG (error|info|debug); defaults to info.
LogLevel log_level();

void log_error(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

} // namespace kgfuse
