#pragma once

#include <string>

#include "json.hpp"
#include "mrag/error.hpp"

namespace mrag::json_fields {

/// Reads a required field, turning type/presence errors into ConfigError
/// messages that name the field.
template <typename T>
T require(const nlohmann::json& j, const char* field) {
  if (!j.is_object()) throw ConfigError(std::string("expected an object while reading '") + field + "'");
  const auto it = j.find(field);
  if (it == j.end()) throw ConfigError(std::string("missing field '") + field + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("field '") + field + "' has the wrong type");
  }
}

template <typename T>
T optional(const nlohmann::json& j, const char* field, T fallback) {
  if (!j.is_object()) return fallback;
  const auto it = j.find(field);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("field '") + field + "' has the wrong type");
  }
}

}  // namespace mrag::json_fields
