// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

namespace dw2 {
namespace log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

Level level();
void set_level(Level l);
Level parse_level(const std::string& name);  // "error"|"warn"|"info"|"debug"

// Serialized printf-style write to stderr with a level prefix. Cheap enough
// for the control plane; never used on the per-tile hot path above debug.
#if defined(__GNUC__) || defined(__clang__)
__attribute__((format(printf, 2, 3)))
#endif
void writef(Level l, const char* fmt, ...);

}  // namespace log
}  // namespace dw2

#define DW2_LOG(lvl, ...)                                                      \
  do {                                                                         \
    if (static_cast<int>(lvl) <= static_cast<int>(::dw2::log::level()))        \
      ::dw2::log::writef(lvl, __VA_ARGS__);                                    \
  } while (0)

#define LOG_ERROR(...) DW2_LOG(::dw2::log::Level::error, __VA_ARGS__)
#define LOG_WARN(...) DW2_LOG(::dw2::log::Level::warn, __VA_ARGS__)
#define LOG_INFO(...) DW2_LOG(::dw2::log::Level::info, __VA_ARGS__)
#define LOG_DEBUG(...) DW2_LOG(::dw2::log::Level::debug, __VA_ARGS__)
