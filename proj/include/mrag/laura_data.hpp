#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "mrag/corpus.hpp"
#include "mrag/metrics.hpp"
#include "mrag/pipeline.hpp"
#include "mrag/ranking.hpp"

namespace mrag::laura {

/// Answer utility of one context (a single chunk, or a language group's
/// concatenated top chunks): per-generator 3-gram recall and their mean.
struct UtilityScore {
  std::string chunk_id;  // empty for group-level scores
  std::map<std::string, double> per_generator;
  double mean = 0.0;
};

struct GroupUtility {
  std::vector<std::string> chunk_ids;  // reranked order, at most per_language_top_k
  UtilityScore utility;
  bool failed = false;
};

struct BalancedCandidateSet {
  std::string query_id;
  std::map<LanguageCode, GroupUtility> by_language;
  std::set<LanguageCode> selected_languages;
  std::vector<std::string> d_balanced;
  /// Per-document utilities computed during Stage 1 (document evaluation mode only).
  std::vector<UtilityScore> document_utilities;
};

enum class Stage { stage1_only, full, self_training };

/// How Stage 1 scores the retained candidates: one generation per language
/// group over its concatenated context, or one per document.
enum class Stage1Evaluation { group, document };

struct LabeledQuery {
  std::string query_id;
  std::vector<std::string> positives;
  std::vector<std::string> negatives;
  double theta = 0.0;
  Stage stage = Stage::full;
};

struct TrainingInstance {
  std::string query_id;
  std::string query_text;
  std::string positive_id;
  std::string positive;  // rendered chunk text
  std::vector<std::string> negative_ids;
  std::vector<std::string> negatives;  // rendered chunk text
};

struct LauraOptions {
  std::size_t retrieval_top_k = 100;
  std::size_t per_language_top_k = 5;
  double theta = 0.8;
  bool inclusive_threshold = true;
  std::size_t k_negatives = 1;
  std::uint64_t seed = 0;
  Stage mode = Stage::full;
  Stage1Evaluation stage1_evaluation = Stage1Evaluation::group;
  std::size_t self_training_top_k = 5;
  std::string prompt_template;
  metrics::NgramOptions ngram;
};

/// Generates with every generator on a context and scores the answers against
/// the query's references. Results are memoised per context so Stage 2 can
/// reuse Stage 1 document evaluations. One instance per query; not thread-safe.
class UtilityEstimator {
 public:
  UtilityEstimator(const Query& query, const ServiceSet& services, const LauraOptions& opts);
  /// nullopt when any generator fails (ServiceError / ProtocolError).
  std::optional<UtilityScore> evaluate(const std::string& context);
  std::size_t generation_calls() const { return calls_; }

 private:
  const Query& query_;
  const ServiceSet& services_;
  const LauraOptions& opts_;
  std::map<std::string, std::optional<UtilityScore>> cache_;
  std::size_t calls_ = 0;
};

/// Stage 1: partition the pool by language, rerank each partition
/// independently, keep the top 5 per language and select the language groups
/// (or documents, in document mode) of maximal mean utility. Ties keep every
/// maximal group. Groups whose generation fails are excluded with a warning.
BalancedCandidateSet stage1_select(const Query& query, const RankedList& retrieved, const ServiceSet& services,
                                   const CorpusIndex& corpus, UtilityEstimator& estimator,
                                   const LauraOptions& opts);

struct Stage2Result {
  LabeledQuery labels;
  std::vector<UtilityScore> utilities;  // one per evaluable d_balanced chunk
};

/// Stage 2: score each d_balanced chunk on its own; positives are chunks whose
/// mean utility meets θ, negatives every other pool candidate. A chunk whose
/// generation fails becomes a negative.
Stage2Result stage2_filter(const Query& query, const std::vector<std::string>& d_balanced,
                           const RankedList& retrieved, const CorpusIndex& corpus, UtilityEstimator& estimator,
                           const LauraOptions& opts);

/// Thresholding half of stage2_filter, usable on persisted utilities.
LabeledQuery apply_threshold(const std::string& query_id, const std::vector<UtilityScore>& utilities,
                             const std::vector<std::string>& pool_ids, double theta, bool inclusive = true);

/// Self-Training baseline: the reranker's top-5 become positives, the rest of
/// the pool negatives. Throws PreconditionError for an empty reranked list.
LabeledQuery self_training_label(const std::string& query_id, const RankedList& reranked_top5,
                                 const RankedList& retrieved_pool);

/// One instance per positive with k negatives drawn uniformly without
/// replacement from the sorted negative list. The draw depends only on
/// (seed, query_id, positive index). nullopt when fewer than k negatives exist.
std::optional<std::vector<TrainingInstance>> emit_training_instances(const LabeledQuery& labeled,
                                                                     const std::string& query_text,
                                                                     std::size_t k, std::uint64_t seed,
                                                                     const CorpusIndex& corpus);

/// Seeded uniform sample of `k` distinct indices from [0, n), in draw order.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, std::uint64_t seed);

struct DatasetStatistics {
  std::size_t queries = 0;
  std::size_t positives = 0;
  double avg_languages_per_query = 0.0;
};

DatasetStatistics dataset_statistics(const std::vector<LabeledQuery>& labeled, const CorpusIndex& corpus);

/// Everything persisted about one query's construction, enough to re-run the
/// θ filter without generating again.
struct UtilityRecord {
  std::string query_id;
  std::vector<std::string> pool;  // retrieved ids, retrieval order
  std::map<LanguageCode, GroupUtility> stage1_groups;
  std::set<LanguageCode> selected_languages;
  std::vector<std::string> d_balanced;
  std::vector<UtilityScore> documents;
};

struct DroppedQuery {
  std::string query_id;
  std::string reason;
};

struct LauraDataset {
  std::vector<LabeledQuery> labeled;  // sorted by query_id
  std::vector<UtilityRecord> utilities;
  std::vector<TrainingInstance> instances;
  std::vector<DroppedQuery> dropped;
  DatasetStatistics statistics;
};

/// Runs the configured mode over every query with a bounded worker pool.
LauraDataset build_laura_dataset(const std::vector<Query>& queries, const ServiceSet& services,
                                 const CorpusIndex& corpus, const LauraOptions& opts, std::size_t parallelism);

/// Re-labels persisted utilities at a new θ (full mode) without any service calls.
LauraDataset relabel_from_utilities(const std::vector<UtilityRecord>& utilities, const std::vector<Query>& queries,
                                    const CorpusIndex& corpus, const LauraOptions& opts);

std::string to_string(Stage stage);
Stage stage_from_string(const std::string& s);

void to_json(nlohmann::json& j, const UtilityScore& u);
void from_json(const nlohmann::json& j, UtilityScore& u);
void to_json(nlohmann::json& j, const LabeledQuery& l);
void from_json(const nlohmann::json& j, LabeledQuery& l);
void to_json(nlohmann::json& j, const UtilityRecord& u);
void from_json(const nlohmann::json& j, UtilityRecord& u);
/// {"query", "pos", "neg": [...]} plus query_id and the chunk ids.
void to_json(nlohmann::json& j, const TrainingInstance& t);
void from_json(const nlohmann::json& j, TrainingInstance& t);
void to_json(nlohmann::json& j, const DatasetStatistics& s);

}  // namespace mrag::laura
