#include "mrag/jsonl.hpp"

#include <filesystem>
#include <iterator>

#include "mrag/error.hpp"

namespace mrag::jsonl {

void for_each(const std::string& path, const std::function<void(const nlohmann::json&)>& fn) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    try {
      fn(j);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

bool drop_torn_tail(const std::string& path) {
  std::string content;
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    content.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  if (content.empty() || content.back() == '\n') return false;
  const auto keep = content.rfind('\n');
  std::filesystem::resize_file(path, keep == std::string::npos ? 0 : keep + 1);
  return true;
}

std::string dump_line(const nlohmann::json& j) {
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

Writer::Writer(const std::string& path, bool append)
    : path_(path), out_(path, append ? std::ios::app : std::ios::trunc) {
  if (!out_) throw PreconditionError("cannot open " + path + " for writing");
}

void Writer::write(const nlohmann::json& j) {
  out_ << dump_line(j) << '\n';
  if (!out_) throw Error("write failed: " + path_);
}

}  // namespace mrag::jsonl
