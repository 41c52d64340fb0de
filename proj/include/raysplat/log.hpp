// Leveled stderr logging, level from RAYSPLAT_LOG={error|info|debug}.
#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace raysplat {

enum class LogLevel : int { error = 0, info = 1, debug = 2 };

inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("RAYSPLAT_LOG");
        if (!env) return LogLevel::info;
        if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
        if (std::strcmp(env, "error") == 0) return LogLevel::error;
        return LogLevel::info;
    }();
    return level;
}

} // namespace raysplat

#define RAYSPLAT_LOG_ERROR(...)                                              \
    do {                                                                     \
        std::fprintf(stderr, "[raysplat] error: " __VA_ARGS__);              \
        std::fputc('\n', stderr);                                            \
    } while (0)

#define RAYSPLAT_LOG_INFO(...)                                               \
    do {                                                                     \
        if (::raysplat::log_level() >= ::raysplat::LogLevel::info) {         \
            std::fprintf(stderr, "[raysplat] " __VA_ARGS__);                 \
            std::fputc('\n', stderr);                                        \
        }                                                                    \
    } while (0)

#define RAYSPLAT_LOG_DEBUG(...)                                              \
    do {                                                                     \
        if (::raysplat::log_level() >= ::raysplat::LogLevel::debug) {        \
            std::fprintf(stderr, "[raysplat] debug: " __VA_ARGS__);          \
            std::fputc('\n', stderr);                                        \
        }                                                                    \
    } while (0)
