#pragma once

#include <cstdlib>
#include <iostream>
#include <string>
#include <string_view>

namespace primhand::log {

enum class Level : int { Error = 0, Warn = 1, Info = 2, Debug = 3 };

inline Level parse_level(std::string_view v, Level fallback) {
    if (v == "error") return Level::Error;
    if (v == "warn") return Level::Warn;
    if (v == "info") return Level::Info;
    if (v == "debug") return Level::Debug;
    return fallback;
}

// Verbosity comes from the PRIMHAND_LOG environment variable
// (error|warn|info|debug), default warn; configs may override at run start.
inline Level& threshold_ref() {
    static Level level = [] {
        const char* env = std::getenv("PRIMHAND_LOG");
        return env == nullptr ? Level::Warn : parse_level(env, Level::Warn);
    }();
    return level;
}

inline Level threshold() { return threshold_ref(); }

inline void set_threshold(Level level) { threshold_ref() = level; }

inline void emit(Level level, const std::string& message) {
    if (static_cast<int>(level) > static_cast<int>(threshold())) return;
    static constexpr const char* names[] = {"error", "warn", "info", "debug"};
    std::cerr << "[primhand:" << names[static_cast<int>(level)] << "] " << message << '\n';
}

inline void error(const std::string& m) { emit(Level::Error, m); }
inline void warn(const std::string& m) { emit(Level::Warn, m); }
inline void info(const std::string& m) { emit(Level::Info, m); }
inline void debug(const std::string& m) { emit(Level::Debug, m); }

}  // namespace primhand::log
