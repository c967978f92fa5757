#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mrag/corpus.hpp"
#include "mrag/ranking.hpp"

namespace mrag::services {

// ---- wire types -----------------------------------------------------------

struct RetrieveRequest {
  std::string query;
  std::size_t top_k = 0;
};

struct RetrieveResponse {
  std::vector<std::string> chunk_ids;
  std::vector<double> scores;
};

struct RerankRequest {
  std::string query;
  std::vector<std::string> documents;  // rendered chunk text
  std::vector<std::string> chunk_ids;  // parallel to documents
};

struct RerankResponse {
  std::vector<double> scores;  // parallel to the request's documents
};

struct GenerateRequest {
  std::string question;
  std::string context;
  std::string generator_id;
  /// Filled from the configured prompt template; omitted from the wire when empty.
  std::string prompt;
};

struct GenerateResponse {
  std::string answer;
};

void to_json(nlohmann::json& j, const RetrieveRequest& r);
void from_json(const nlohmann::json& j, RetrieveRequest& r);
void to_json(nlohmann::json& j, const RetrieveResponse& r);
void from_json(const nlohmann::json& j, RetrieveResponse& r);
void to_json(nlohmann::json& j, const RerankRequest& r);
void from_json(const nlohmann::json& j, RerankRequest& r);
void to_json(nlohmann::json& j, const RerankResponse& r);
void from_json(const nlohmann::json& j, RerankResponse& r);
void to_json(nlohmann::json& j, const GenerateRequest& r);
void from_json(const nlohmann::json& j, GenerateRequest& r);
void to_json(nlohmann::json& j, const GenerateResponse& r);
void from_json(const nlohmann::json& j, GenerateResponse& r);

// ---- service roles --------------------------------------------------------

class RetrieverService {
 public:
  virtual ~RetrieverService() = default;
  virtual RetrieveResponse retrieve(const RetrieveRequest& request) = 0;
  virtual std::string endpoint_name() const = 0;
};

class RerankerService {
 public:
  virtual ~RerankerService() = default;
  virtual RerankResponse rerank(const RerankRequest& request) = 0;
  virtual std::string endpoint_name() const = 0;
};

class GeneratorService {
 public:
  virtual ~GeneratorService() = default;
  virtual GenerateResponse generate(const GenerateRequest& request) = 0;
  virtual std::string endpoint_name() const = 0;
};

// ---- contract-checked operations ------------------------------------------

/// Ranked list of at most `top_k` ids with non-increasing scores. Throws
/// PreconditionError for top_k == 0 and ProtocolError for responses that break
/// the contract.
RankedList retrieve(RetrieverService& service, const std::string& query, std::size_t top_k);

/// Scores `chunks` in one request and returns them sorted by descending score,
/// ties kept in input order. Throws PreconditionError on an empty list.
RankedList rerank(RerankerService& service, const std::string& query,
                  const std::vector<DocumentChunk>& chunks);

/// Returns the service's answer verbatim. Throws PreconditionError on an empty
/// question.
std::string generate(GeneratorService& service, const std::string& question, const std::string& context,
                     const std::string& generator_id, const std::string& prompt_template = {});

/// Substitutes {question} and {context} in a prompt template.
std::string render_prompt(const std::string& prompt_template, const std::string& question,
                          const std::string& context);

// ---- HTTP clients ---------------------------------------------------------

struct EndpointConfig {
  std::string name;
  std::string url;  // scheme://host[:port][/prefix]
  std::string auth;  // bearer token, optional
  std::chrono::milliseconds timeout{30'000};
  int retries = 3;  // total attempts
  std::size_t max_in_flight = 8;
  std::chrono::milliseconds retry_backoff{200};
};

/// Bounds concurrent requests to one endpoint.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(std::size_t limit) : limit_(limit == 0 ? 1 : limit) {}
  void acquire();
  void release();
  std::size_t peak() const;

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::size_t limit_;
  std::size_t active_ = 0;
  std::size_t peak_ = 0;
};

/// POSTs JSON to `{url}{path}` with timeout, bounded retries on transport
/// failures and 5xx responses, and a shared in-flight limit. Safe to share
/// across threads.
class HttpJsonClient {
 public:
  explicit HttpJsonClient(EndpointConfig config);
  nlohmann::json post(const std::string& path, const nlohmann::json& body);
  const EndpointConfig& config() const { return config_; }

 private:
  EndpointConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  InFlightLimiter limiter_;
};

class HttpRetriever final : public RetrieverService {
 public:
  explicit HttpRetriever(EndpointConfig config) : client_(std::move(config)) {}
  RetrieveResponse retrieve(const RetrieveRequest& request) override;
  std::string endpoint_name() const override { return client_.config().name; }

 private:
  HttpJsonClient client_;
};

class HttpReranker final : public RerankerService {
 public:
  explicit HttpReranker(EndpointConfig config) : client_(std::move(config)) {}
  RerankResponse rerank(const RerankRequest& request) override;
  std::string endpoint_name() const override { return client_.config().name; }

 private:
  HttpJsonClient client_;
};

class HttpGenerator final : public GeneratorService {
 public:
  explicit HttpGenerator(EndpointConfig config) : client_(std::move(config)) {}
  GenerateResponse generate(const GenerateRequest& request) override;
  std::string endpoint_name() const override { return client_.config().name; }

 private:
  HttpJsonClient client_;
};

// ---- deterministic mocks --------------------------------------------------

/// Lowercased tokens of `text`: maximal runs of non-whitespace with ASCII
/// punctuation treated as a separator.
std::vector<std::string> mock_tokens(const std::string& text);

/// Scores every chunk by the number of distinct query tokens found in its
/// rendered text; ties keep corpus order.
class MockRetriever final : public RetrieverService {
 public:
  explicit MockRetriever(std::shared_ptr<const CorpusIndex> corpus);
  RetrieveResponse retrieve(const RetrieveRequest& request) override;
  std::string endpoint_name() const override { return "mock-retriever"; }

 private:
  std::shared_ptr<const CorpusIndex> corpus_;
  std::vector<std::vector<std::string>> chunk_tokens_;  // sorted, unique
};

struct MockRerankerConfig {
  std::uint64_t seed = 0;
  /// query -> chunk_id -> score; overrides the hash score when present.
  std::map<std::string, std::map<std::string, double>> scores;
  /// Added to the score of chunks of the given language (needs a corpus).
  std::map<std::string, double> language_bias;
};

/// Scores are a seeded hash of (query, chunk_id) in [0, 1), plus any language
/// bias, unless the explicit table has an entry.
class MockReranker final : public RerankerService {
 public:
  explicit MockReranker(MockRerankerConfig config, std::shared_ptr<const CorpusIndex> corpus = nullptr);
  RerankResponse rerank(const RerankRequest& request) override;
  std::string endpoint_name() const override { return "mock-reranker"; }
  double score(const std::string& query, const std::string& chunk_id) const;

 private:
  MockRerankerConfig config_;
  std::shared_ptr<const CorpusIndex> corpus_;
};

enum class MockGeneratorMode {
  table,     // answer looked up by question; "" with a warning when absent
  echo,      // first `echo_chars` scalar values of the context
  grounded,  // table answer only when the context contains it, else `fallback`
};

struct MockGeneratorConfig {
  MockGeneratorMode mode = MockGeneratorMode::table;
  std::map<std::string, std::string> answers;
  std::size_t echo_chars = 20;
  std::string fallback;
};

class MockGenerator final : public GeneratorService {
 public:
  MockGenerator(std::string id, MockGeneratorConfig config);
  GenerateResponse generate(const GenerateRequest& request) override;
  std::string endpoint_name() const override { return id_; }
  std::size_t warnings() const;

 private:
  std::string id_;
  MockGeneratorConfig config_;
  mutable std::mutex mutex_;
  std::size_t warnings_ = 0;
};

/// Everything mock-serve hosts, loaded from one fixtures JSON file.
struct MockFixtures {
  std::shared_ptr<const CorpusIndex> corpus;
  MockRerankerConfig reranker;
  std::map<std::string, MockGeneratorConfig> generators;
};

/// Relative paths inside the file resolve against the file's directory.
MockFixtures load_mock_fixtures(const std::string& path);
MockFixtures parse_mock_fixtures(const nlohmann::json& j, const std::string& base_dir);

/// Hosts the mock services over the HTTP wire protocol: POST /retrieve,
/// /rerank, /generate (dispatching on generator_id), GET /health.
class MockServer {
 public:
  explicit MockServer(MockFixtures fixtures);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  /// Binds and serves on a background thread; port 0 picks a free port.
  /// Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Serves on the calling thread until stop() is called from elsewhere.
  void serve_blocking(const std::string& host, int port);
  void stop();
  std::size_t request_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mrag::services
