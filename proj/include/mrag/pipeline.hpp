#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "mrag/corpus.hpp"
#include "mrag/metrics.hpp"
#include "mrag/ranking.hpp"
#include "mrag/services.hpp"

namespace mrag {

struct Query {
  std::string query_id;
  std::string text;
  LanguageCode language;
  std::vector<std::string> reference_answers;
};

struct GenerationRecord {
  std::string generator_id;
  std::string answer;
  double score = 0.0;  // best character 3-gram recall over the references
};

struct VanillaRunRecord {
  std::string query_id;
  LanguageCode query_language;
  RankedList retrieved;    // retriever output, at most retrieval_top_k
  RankedList rerank_pool;  // the whole retrieved pool in reranked order
  RankedList reranked;     // first rerank_top_k of rerank_pool
  std::map<LanguageCode, int> context_language_counts;
  double mean_top5_score = 0.0;
  std::map<std::string, GenerationRecord> answers;
  bool empty_retrieval = false;
};

struct LanguageGroupRun {
  RankedList reranked_top5;
  std::map<std::string, GenerationRecord> answers;
  double score = 0.0;  // mean of the answers' scores
};

struct OracleRunRecord {
  std::string query_id;
  LanguageCode query_language;
  RankedList retrieved;
  std::map<LanguageCode, LanguageGroupRun> per_language;
  double best_score = 0.0;
  std::set<LanguageCode> best_languages;
  std::vector<std::string> excluded_languages;  // groups whose generation failed
  bool empty_retrieval = false;
};

/// The model endpoints one run talks to. Generators are keyed by generator_id.
struct ServiceSet {
  std::shared_ptr<services::RetrieverService> retriever;
  std::shared_ptr<services::RerankerService> reranker;
  std::map<std::string, std::shared_ptr<services::GeneratorService>> generators;
};

struct PipelineOptions {
  std::size_t retrieval_top_k = 50;
  std::size_t rerank_top_k = 5;
  std::string prompt_template;
  metrics::NgramOptions ngram;
};

/// Rendered chunks in rank order separated by a blank line.
std::string build_context(const std::vector<const DocumentChunk*>& chunks);

/// Retrieve, rerank the pool globally, keep the top 5, generate with every
/// generator on the concatenated context. Service failures propagate as
/// exceptions (ServiceError / ProtocolError).
VanillaRunRecord run_vanilla(const Query& query, const ServiceSet& services, const CorpusIndex& corpus,
                             const PipelineOptions& opts = {});

/// Retrieve, partition the pool by chunk language, rerank each group
/// independently, keep up to 5 per group and generate per group. The group
/// score is the mean over generators; best_score is the max over groups that
/// generated successfully, best_languages the languages attaining it.
OracleRunRecord run_oracle(const Query& query, const ServiceSet& services, const CorpusIndex& corpus,
                           const PipelineOptions& opts = {});

/// Group languages attaining the maximum group score (exact comparison).
std::set<LanguageCode> argmax_languages(const std::map<LanguageCode, double>& scores, double* best = nullptr);

void to_json(nlohmann::json& j, const Query& q);
void from_json(const nlohmann::json& j, Query& q);
void to_json(nlohmann::json& j, const GenerationRecord& g);
void from_json(const nlohmann::json& j, GenerationRecord& g);
void to_json(nlohmann::json& j, const VanillaRunRecord& r);
void from_json(const nlohmann::json& j, VanillaRunRecord& r);
void to_json(nlohmann::json& j, const OracleRunRecord& r);
void from_json(const nlohmann::json& j, OracleRunRecord& r);

std::vector<Query> load_queries(const std::string& path);

// ---- batch runs -----------------------------------------------------------

struct QueryFailure {
  std::string query_id;
  std::string reason;
};

struct BatchSummary {
  std::size_t total = 0;
  std::size_t completed = 0;  // newly written this invocation
  std::size_t resumed = 0;    // already present in the output file
  std::size_t flagged_empty = 0;
  std::vector<QueryFailure> failures;
};

enum class RunKind { vanilla, oracle };

/// Runs every query through one setting and appends records to `output_path`
/// in query-input order. Query ids already present in the file are skipped, so
/// an interrupted run resumes where it stopped. Failed queries are not written
/// and are reported in the summary.
BatchSummary run_batch(RunKind kind, const std::vector<Query>& queries, const ServiceSet& services,
                       const CorpusIndex& corpus, const PipelineOptions& opts, const std::string& output_path,
                       std::size_t parallelism);

}  // namespace mrag
