#pragma once

#include <atomic>
#include <functional>
#include <iostream>
#include <mutex>
#include <string>

namespace emfg::log {

enum class Level { debug = 0, info = 1, warning = 2, silent = 3 };

namespace detail {
inline std::atomic<int> threshold{static_cast<int>(Level::warning)};
inline std::mutex sink_mutex;
inline std::function<void(Level, const std::string&)>& sink() {
    static std::function<void(Level, const std::string&)> s;
    return s;
}
} // namespace detail

inline void set_level(Level level) { detail::threshold = static_cast<int>(level); }

/// Redirect messages (tests capture warnings this way). Empty function restores std::clog.
inline void set_sink(std::function<void(Level, const std::string&)> sink) {
    std::lock_guard lock(detail::sink_mutex);
    detail::sink() = std::move(sink);
}

inline void write(Level level, const std::string& message) {
    if (static_cast<int>(level) < detail::threshold.load()) return;
    std::lock_guard lock(detail::sink_mutex);
    if (detail::sink()) {
        detail::sink()(level, message);
        return;
    }
    static constexpr const char* tags[] = {"DEBUG", "INFO", "WARN"};
    std::clog << tags[static_cast<int>(level)] << ' ' << message << '\n';
}

inline void debug(const std::string& m) { write(Level::debug, m); }
inline void info(const std::string& m) { write(Level::info, m); }
inline void warning(const std::string& m) { write(Level::warning, m); }

} // namespace emfg::log
