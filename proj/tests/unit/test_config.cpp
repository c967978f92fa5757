#include <cstdlib>

#include "doctest.h"
#include "helpers.hpp"
#include "mrag/config.hpp"
#include "mrag/error.hpp"

using namespace mrag;
using nlohmann::json;

namespace {

json base_config() {
  return json::parse(R"({
    "language_set": ["en", "de", "zh"],
    "endpoints": {
      "retriever": {"url": "http://127.0.0.1:9000", "timeout_s": 5, "retries": 2, "max_in_flight": 4},
      "reranker": {"url": "http://127.0.0.1:9000"},
      "generators": {"g1": {"url": "http://127.0.0.1:9000", "auth": "${MRAG_TEST_TOKEN}"}}
    },
    "theta": 0.7,
    "k_negatives": 3,
    "seed": 9
  })");
}

}  // namespace

TEST_CASE("defaults follow the documented settings") {
  const RunConfig c;
  CHECK(c.language_set.size() == 13);
  CHECK(c.retrieval_top_k == 50);
  CHECK(c.laura_retrieval_top_k == 100);
  CHECK(c.rerank_top_k == 5);
  CHECK(c.theta == 0.8);
  CHECK(c.inclusive_threshold);
}

TEST_CASE("config parsing, interpolation and overrides") {
  setenv("MRAG_TEST_TOKEN", "s3cret", 1);
  const RunConfig c = parse_config(base_config());
  CHECK(c.language_set == std::vector<LanguageCode>{"en", "de", "zh"});
  REQUIRE(c.retriever);
  CHECK(c.retriever->timeout == std::chrono::milliseconds(5000));
  CHECK(c.retriever->retries == 2);
  CHECK(c.retriever->max_in_flight == 4);
  CHECK(c.generators.at("g1").auth == "s3cret");
  CHECK(c.theta == 0.7);
  CHECK(c.k_negatives == 3);

  setenv("MRAG_RERANKER_URL", "http://10.0.0.1:1", 1);
  CHECK(parse_config(base_config()).reranker->url == "http://10.0.0.1:1");
  unsetenv("MRAG_RERANKER_URL");

  unsetenv("MRAG_TEST_TOKEN");
  try {
    parse_config(base_config());
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("MRAG_TEST_TOKEN") != std::string::npos);
  }
}

TEST_CASE("schema violations name the field") {
  setenv("MRAG_TEST_TOKEN", "x", 1);
  auto j = base_config();
  j["theta"] = "high";
  try {
    parse_config(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("theta") != std::string::npos);
  }
  j = base_config();
  j["endpoints"]["retriever"].erase("url");
  CHECK_THROWS_AS(parse_config(j), ConfigError);
}

TEST_CASE("config hash tracks semantic fields only") {
  setenv("MRAG_TEST_TOKEN", "x", 1);
  const RunConfig a = parse_config(base_config());
  const RunConfig reparsed = parse_config(json::parse(base_config().dump(4)));
  CHECK(config_hash(a) == config_hash(reparsed));

  setenv("MRAG_TEST_TOKEN", "other", 1);
  CHECK(config_hash(parse_config(base_config())) == config_hash(a));  // auth is not semantic

  auto changed = base_config();
  changed["theta"] = 0.75;
  CHECK(config_hash(parse_config(changed)) != config_hash(a));
  changed = base_config();
  changed["seed"] = 10;
  CHECK(config_hash(parse_config(changed)) != config_hash(a));
  changed = base_config();
  changed["parallelism"] = 3;
  CHECK(config_hash(parse_config(changed)) == config_hash(a));
}

TEST_CASE("config files may carry comments") {
  setenv("MRAG_TEST_TOKEN", "x", 1);
  testing::TempDir dir("config");
  testing::write_text(dir.file("c.json"), "// run settings\n" + base_config().dump(2));
  CHECK(load_config(dir.file("c.json")).seed == 9);
}

TEST_CASE("parallelism is capped by endpoint limits") {
  setenv("MRAG_TEST_TOKEN", "x", 1);
  const RunConfig c = parse_config(base_config());
  CHECK(effective_parallelism(c, 16) == 4);
  CHECK(effective_parallelism(c, 2) == 2);
  CHECK(effective_parallelism(c, 0) >= 1);
}
