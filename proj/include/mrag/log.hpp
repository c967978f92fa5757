#pragma once

#include <functional>
#include <string>

namespace mrag::log {

enum class Level { debug, info, warn, error, off };

using Sink = std::function<void(Level, const std::string&)>;

/// Replaces the process-wide sink (default: stderr). Thread-safe.
void set_sink(Sink sink);
void set_level(Level level);

void write(Level level, const std::string& message);
inline void debug(const std::string& m) { write(Level::debug, m); }
inline void info(const std::string& m) { write(Level::info, m); }
inline void warn(const std::string& m) { write(Level::warn, m); }
inline void error(const std::string& m) { write(Level::error, m); }

}  // namespace mrag::log
