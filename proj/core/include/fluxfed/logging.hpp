#pragma once

#include <sstream>
#include <string>

namespace fluxfed {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

void set_log_level(LogLevel level);
LogLevel log_level();
LogLevel log_level_from_string(const std::string& s);

// Writes one line to stderr; never stdout, which belongs to machine-readable
// output. Thread-safe (single formatted write under a mutex).
void log_line(LogLevel level, const std::string& message);

}  // namespace fluxfed

#define FLUX_FED_LOG(level, expr)                                    \
    do {                                                             \
        if (static_cast<int>(level) >= static_cast<int>(::fluxfed::log_level())) { \
            std::ostringstream fluxfed_log_os_;                      \
            fluxfed_log_os_ << expr;                                 \
            ::fluxfed::log_line(level, fluxfed_log_os_.str());       \
        }                                                            \
    } while (0)
