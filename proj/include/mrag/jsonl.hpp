#pragma once

#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace mrag::jsonl {

/// Calls `fn` for every non-blank line of a JSONL file. Parse errors carry the
/// file name and 1-based line number.
void for_each(const std::string& path, const std::function<void(const nlohmann::json&)>& fn);

template <typename T>
std::vector<T> read_all(const std::string& path) {
  std::vector<T> out;
  for_each(path, [&](const nlohmann::json& j) { out.push_back(j.get<T>()); });
  return out;
}

/// Removes an unterminated final line left by an interrupted writer. Returns
/// true when something was removed.
bool drop_torn_tail(const std::string& path);

/// One compact JSON object per line; keys are emitted in sorted order so the
/// output is byte-stable.
std::string dump_line(const nlohmann::json& j);

class Writer {
 public:
  /// Opens for truncation, or for appending when `append` is set.
  Writer(const std::string& path, bool append = false);
  void write(const nlohmann::json& j);
  void flush() { out_.flush(); }

 private:
  std::string path_;
  std::ofstream out_;
};

template <typename T>
void write_all(const std::string& path, const std::vector<T>& items) {
  Writer w(path);
  for (const auto& item : items) w.write(nlohmann::json(item));
}

}  // namespace mrag::jsonl
