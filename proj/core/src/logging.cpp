#include "kgfuse/logging.hpp"

#include <cstdlib>
#include <iostream>

namespace kgfuse {

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("KGFUSE_LOG");
        if (!env) return LogLevel::Info;
        const std::string s(env);
        if (s == "error") return LogLevel::Error;
        if (s == "debug") return LogLevel::Debug;
        return LogLevel::Info;
    }();
    return level;
}

namespace {

void emit(LogLevel at, const char* tag, const std::string& msg) {
    if (static_cast<int>(log_level()) >= static_cast<int>(at)) {
        std::cerr << tag << msg << "\n";
    }
}

} // namespace

void log_error(const std::string& msg) { emit(LogLevel::Error, "[error] ", msg); }
void log_info(const std::string& msg) { emit(LogLevel::Info, "[info] ", msg); }
void log_debug(const std::string& msg) { emit(LogLevel::Debug, "[debug] ", msg); }

} // namespace kgfuse
