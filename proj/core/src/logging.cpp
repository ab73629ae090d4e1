#include "fluxfed/logging.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>
#include <stdexcept>

namespace fluxfed {

namespace {
std::atomic<int> g_level{static_cast<int>(LogLevel::Warn)};
std::mutex g_write_mutex;

const char* tag(LogLevel level) {
    switch (level) {
        case LogLevel::Debug: return "debug";
        case LogLevel::Info: return "info";
        case LogLevel::Warn: return "warn";
        case LogLevel::Error: return "error";
        case LogLevel::Off: return "off";
    }
    return "?";
}
}  // namespace

void set_log_level(LogLevel level) { g_level.store(static_cast<int>(level)); }

LogLevel log_level() { return static_cast<LogLevel>(g_level.load()); }

LogLevel log_level_from_string(const std::string& s) {
    if (s == "debug") return LogLevel::Debug;
    if (s == "info") return LogLevel::Info;
    if (s == "warn") return LogLevel::Warn;
    if (s == "error") return LogLevel::Error;
    if (s == "off") return LogLevel::Off;
    throw std::invalid_argument("log level: expected debug|info|warn|error|off, got \"" + s + "\"");
}

void log_line(LogLevel level, const std::string& message) {
    std::lock_guard<std::mutex> lock(g_write_mutex);
    std::fprintf(stderr, "[%s] %s\n", tag(level), message.c_str());
    std::fflush(stderr);
}

}  // namespace fluxfed
