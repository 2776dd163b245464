// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#include "dw2/log.hpp"

#include <atomic>
#include <cstdarg>
#include <cstdio>
#include <mutex>

#include "dw2/error.hpp"

namespace dw2 {
namespace log {

namespace {
std::atomic<int> g_level{static_cast<int>(Level::warn)};
std::mutex g_mutex;

const char* prefix(Level l) {
  switch (l) {
    case Level::error: return "[error] ";
    case Level::warn: return "[warn ] ";
    case Level::info: return "[info ] ";
    case Level::debug: return "[debug] ";
  }
  return "";
}
}  // namespace

Level level() {
  return static_cast<Level>(g_level.load(std::memory_order_relaxed));
}

void set_level(Level l) {
  g_level.store(static_cast<int>(l), std::memory_order_relaxed);
}

Level parse_level(const std::string& name) {
  if (name == "error") return Level::error;
  if (name == "warn") return Level::warn;
  if (name == "info") return Level::info;
  if (name == "debug") return Level::debug;
  throw Error("unknown log level: " + name);
}

void writef(Level l, const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  std::lock_guard<std::mutex> lock(g_mutex);
  std::fprintf(stderr, "%s%s\n", prefix(l), buf);
}

}  // namespace log
}  // namespace dw2
