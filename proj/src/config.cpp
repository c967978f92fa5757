#include "mrag/config.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <thread>

#include "mrag/error.hpp"
#include "mrag/hash.hpp"
#include "mrag/json_fields.hpp"

namespace mrag {

using nlohmann::json;

std::string interpolate_env(const std::string& text) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text.compare(i, 2, "${") == 0) {
      const auto close = text.find('}', i + 2);
      if (close == std::string::npos) throw ConfigError("unterminated ${ in '" + text + "'");
      const std::string name = text.substr(i + 2, close - i - 2);
      const char* value = std::getenv(name.c_str());
      if (value == nullptr) throw ConfigError("environment variable '" + name + "' is not set");
      out += value;
      i = close + 1;
    } else {
      out += text[i++];
    }
  }
  return out;
}

namespace {

json interpolate_all(const json& j) {
  if (j.is_string()) return interpolate_env(j.get<std::string>());
  if (j.is_array()) {
    json out = json::array();
    for (const auto& v : j) out.push_back(interpolate_all(v));
    return out;
  }
  if (j.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : j.items()) out[k] = interpolate_all(v);
    return out;
  }
  return j;
}

std::string env_key(const std::string& name, const char* suffix) {
  std::string key = "MRAG_";
  for (char c : name) {
    key += (c == '-' || c == '.') ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  key += '_';
  key += suffix;
  return key;
}

services::EndpointConfig parse_endpoint(const std::string& name, const json& j) {
  const std::string where = "endpoints." + name;
  services::EndpointConfig e;
  e.name = name;
  try {
    e.url = json_fields::require<std::string>(j, "url");
    e.auth = json_fields::optional<std::string>(j, "auth", "");
    e.timeout = std::chrono::milliseconds(
        static_cast<long long>(json_fields::optional<double>(j, "timeout_s", 30.0) * 1000.0));
    e.retries = json_fields::optional<int>(j, "retries", 3);
    e.max_in_flight = json_fields::optional<std::size_t>(j, "max_in_flight", 8);
    e.retry_backoff = std::chrono::milliseconds(json_fields::optional<long long>(j, "retry_backoff_ms", 200));
  } catch (const ConfigError& err) {
    throw ConfigError(where + ": " + err.what());
  }
  if (e.retries < 1) throw ConfigError(where + ".retries must be >= 1");
  if (e.max_in_flight < 1) throw ConfigError(where + ".max_in_flight must be >= 1");
  if (const char* url = std::getenv(env_key(name, "URL").c_str())) e.url = url;
  if (const char* auth = std::getenv(env_key(name, "AUTH").c_str())) e.auth = auth;
  return e;
}

}  // namespace

RunConfig parse_config(const json& raw) {
  if (!raw.is_object()) throw ConfigError("config must be a JSON object");
  const json j = interpolate_all(raw);
  RunConfig c;
  using json_fields::optional;
  c.language_set = optional<std::vector<LanguageCode>>(j, "language_set", c.language_set);
  if (c.language_set.empty()) throw ConfigError("language_set must not be empty");
  c.char_segmented_languages = optional<std::set<LanguageCode>>(j, "char_segmented_languages", c.char_segmented_languages);

  const json endpoints = optional<json>(j, "endpoints", json::object());
  if (!endpoints.is_object()) throw ConfigError("endpoints must be an object");
  for (const auto& [role, value] : endpoints.items()) {
    if (role == "retriever") {
      c.retriever = parse_endpoint("retriever", value);
    } else if (role == "reranker") {
      c.reranker = parse_endpoint("reranker", value);
    } else if (role == "generators") {
      if (!value.is_object()) throw ConfigError("endpoints.generators must be an object keyed by generator id");
      for (const auto& [id, g] : value.items()) c.generators.emplace(id, parse_endpoint(id, g));
    } else {
      throw ConfigError("endpoints." + role + ": unknown role (expected retriever, reranker, generators)");
    }
  }

  c.retrieval_top_k = optional<std::size_t>(j, "retrieval_top_k", c.retrieval_top_k);
  c.laura_retrieval_top_k = optional<std::size_t>(j, "laura_retrieval_top_k", c.laura_retrieval_top_k);
  c.rerank_top_k = optional<std::size_t>(j, "rerank_top_k", c.rerank_top_k);
  c.theta = optional<double>(j, "theta", c.theta);
  c.inclusive_threshold = optional<bool>(j, "inclusive_threshold", c.inclusive_threshold);
  c.k_negatives = optional<std::size_t>(j, "k_negatives", c.k_negatives);
  c.seed = optional<std::uint64_t>(j, "seed", c.seed);
  c.prompt_template = optional<std::string>(j, "prompt_template", c.prompt_template);
  c.casefold = optional<bool>(j, "casefold", c.casefold);
  c.log_base = optional<double>(j, "log_base", c.log_base);
  const auto direction = optional<std::string>(j, "kl_direction", "vanilla_to_oracle");
  if (direction == "vanilla_to_oracle") {
    c.kl_direction = distributions::KlDirection::vanilla_to_oracle;
  } else if (direction == "oracle_to_vanilla") {
    c.kl_direction = distributions::KlDirection::oracle_to_vanilla;
  } else {
    throw ConfigError("kl_direction must be vanilla_to_oracle or oracle_to_vanilla");
  }
  c.parallelism = optional<std::size_t>(j, "parallelism", c.parallelism);
  c.paths = optional<std::map<std::string, std::string>>(j, "paths", {});

  if (c.retrieval_top_k < 1) throw ConfigError("retrieval_top_k must be >= 1");
  if (c.laura_retrieval_top_k < 1) throw ConfigError("laura_retrieval_top_k must be >= 1");
  if (c.rerank_top_k < 1) throw ConfigError("rerank_top_k must be >= 1");
  if (c.theta < 0.0 || c.theta > 1.0) throw ConfigError("theta must lie in [0, 1]");
  if (c.k_negatives < 1) throw ConfigError("k_negatives must be >= 1");
  if (!(c.log_base > 0.0) || c.log_base == 1.0) throw ConfigError("log_base must be positive and != 1");
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(j);
}

json semantic_config(const RunConfig& c) {
  json endpoints = json::object();
  if (c.retriever) endpoints["retriever"] = c.retriever->url;
  if (c.reranker) endpoints["reranker"] = c.reranker->url;
  for (const auto& [id, g] : c.generators) endpoints["generators"][id] = g.url;
  return json{{"language_set", c.language_set},
              {"char_segmented_languages", c.char_segmented_languages},
              {"endpoints", endpoints},
              {"retrieval_top_k", c.retrieval_top_k},
              {"laura_retrieval_top_k", c.laura_retrieval_top_k},
              {"rerank_top_k", c.rerank_top_k},
              {"theta", c.theta},
              {"inclusive_threshold", c.inclusive_threshold},
              {"k_negatives", c.k_negatives},
              {"seed", c.seed},
              {"prompt_template", c.prompt_template},
              {"casefold", c.casefold},
              {"log_base", c.log_base},
              {"kl_direction", c.kl_direction == distributions::KlDirection::vanilla_to_oracle
                                   ? "vanilla_to_oracle"
                                   : "oracle_to_vanilla"}};
}

std::string config_hash(const RunConfig& config) {
  return hash::hex(hash::fnv1a(semantic_config(config).dump()));
}

void to_json(json& j, const RunManifest& m) {
  json failures = json::array();
  for (const auto& [id, reason] : m.failures) failures.push_back(json{{"id", id}, {"reason", reason}});
  j = json{{"subcommand", m.subcommand}, {"config_hash", m.config_hash}, {"version", m.version},
           {"started_at", m.started_at}, {"finished_at", m.finished_at}, {"seed", m.seed},
           {"counts", m.counts},         {"failures", failures}};
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

std::size_t effective_parallelism(const RunConfig& config, std::size_t requested) {
  std::size_t width = requested != 0 ? requested : config.parallelism;
  if (width == 0) width = std::max(1u, std::thread::hardware_concurrency());
  auto cap = [&](const services::EndpointConfig& e) { width = std::min(width, e.max_in_flight); };
  if (config.retriever) cap(*config.retriever);
  if (config.reranker) cap(*config.reranker);
  for (const auto& [id, g] : config.generators) cap(g);
  return std::max<std::size_t>(width, 1);
}

}  // namespace mrag
