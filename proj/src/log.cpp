#include "mrag/log.hpp"

#include <iostream>
#include <mutex>

namespace mrag::log {

namespace {

std::mutex g_mutex;
Level g_level = Level::warn;
Sink g_sink;

const char* label(Level level) {
  switch (level) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warning";
    case Level::error: return "error";
    case Level::off: break;
  }
  return "";
}

}  // namespace

void set_sink(Sink sink) {
  std::lock_guard lock(g_mutex);
  g_sink = std::move(sink);
}

void set_level(Level level) {
  std::lock_guard lock(g_mutex);
  g_level = level;
}

void write(Level level, const std::string& message) {
  std::lock_guard lock(g_mutex);
  if (level < g_level || level == Level::off) return;
  if (g_sink) {
    g_sink(level, message);
  } else {
    std::cerr << "mrag " << label(level) << ": " << message << '\n';
  }
}

}  // namespace mrag::log
