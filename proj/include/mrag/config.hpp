#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "mrag/distributions.hpp"
#include "mrag/pipeline.hpp"
#include "mrag/services.hpp"

namespace mrag {

inline const std::vector<LanguageCode> kDefaultLanguageSet = {"ar", "de", "en", "es", "fi", "fr", "it",
                                                              "ja", "ko", "pt", "ru", "th", "zh"};

inline constexpr const char* kToolkitVersion = "0.1.0";

struct RunConfig {
  std::vector<LanguageCode> language_set = kDefaultLanguageSet;
  std::set<LanguageCode> char_segmented_languages = kDefaultCharSegmentedLanguages;

  std::optional<services::EndpointConfig> retriever;
  std::optional<services::EndpointConfig> reranker;
  std::map<std::string, services::EndpointConfig> generators;

  std::size_t retrieval_top_k = 50;         // vanilla / oracle runs
  std::size_t laura_retrieval_top_k = 100;  // LAURA construction
  std::size_t rerank_top_k = 5;
  double theta = 0.8;
  bool inclusive_threshold = true;
  std::size_t k_negatives = 1;
  std::uint64_t seed = 0;
  std::string prompt_template;
  bool casefold = false;
  double log_base = 2.0;
  distributions::KlDirection kl_direction = distributions::KlDirection::vanilla_to_oracle;
  std::size_t parallelism = 0;  // 0 = hardware concurrency

  std::map<std::string, std::string> paths;
};

/// Replaces ${VAR} with the environment value; unset variables are a
/// ConfigError naming the variable.
std::string interpolate_env(const std::string& text);

/// Parses a config object. String values are env-interpolated and endpoint
/// url/auth can be overridden by MRAG_<NAME>_URL / MRAG_<NAME>_AUTH
/// (NAME upper-cased, '-' and '.' mapped to '_').
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

/// Canonical form of the fields that change results (auth, timeouts, retry
/// policy, parallelism and paths are excluded).
nlohmann::json semantic_config(const RunConfig& config);
std::string config_hash(const RunConfig& config);

struct RunManifest {
  std::string subcommand;
  std::string config_hash;
  std::string version = kToolkitVersion;
  std::string started_at;
  std::string finished_at;
  std::uint64_t seed = 0;
  nlohmann::json counts = nlohmann::json::object();
  std::vector<std::pair<std::string, std::string>> failures;  // (id, reason)
};

void to_json(nlohmann::json& j, const RunManifest& m);

std::string utc_timestamp();

/// Effective worker count: requested (or hardware concurrency when 0), capped
/// by the smallest max_in_flight among the configured endpoints.
std::size_t effective_parallelism(const RunConfig& config, std::size_t requested);

}  // namespace mrag
