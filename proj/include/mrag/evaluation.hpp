#pragma once

#include <map>
#include <string>
#include <vector>

#include "mrag/corpus.hpp"
#include "mrag/distributions.hpp"
#include "mrag/metrics.hpp"
#include "mrag/pipeline.hpp"
#include "mrag/tsv.hpp"

namespace mrag::evaluation {

using JudgmentMap = std::map<std::string, metrics::RelevanceJudgments>;

/// Reads {"query_id", "relevant_chunk_ids": [...]} lines.
JudgmentMap load_judgments(const std::string& path);

struct EvalTables {
  tsv::Table per_query;
  tsv::Table per_language;
  tsv::Table correlation;  // vanilla runs only
};

struct EvalOptions {
  std::size_t k = 5;
};

/// Per-query rows carry the mean-over-generators score, each generator's
/// score, the mean top-5 reranker score and, when judgments exist,
/// Precision@k / NDCG@k. Per-language rows average those over queries and add
/// PEER over the reranked pool (needs `corpus` for chunk languages). The
/// correlation table pairs mean_top5_score with each generator's score.
EvalTables evaluate_vanilla(const std::vector<VanillaRunRecord>& records, const JudgmentMap& judgments,
                            const CorpusIndex* corpus, const EvalOptions& opts = {});

/// Per-query best_score and best languages; per-language mean best_score.
EvalTables evaluate_oracle(const std::vector<OracleRunRecord>& records);

struct SignificanceOptions {
  std::string metric = "score";
  double alpha = 0.05;
};

/// Joins two per-query TSVs on query_id and runs a paired t-test per query
/// language and overall. Δ% is the relative change of the means,
/// (treatment − baseline) / baseline · 100.
tsv::Table significance_table(const tsv::Table& baseline, const tsv::Table& treatment,
                              const SignificanceOptions& opts = {});

/// "*" p < 0.05, "**" p < 0.01, "***" p < 0.001.
std::string significance_stars(double p);

tsv::Table matrix_table(const distributions::DistributionMatrix& m);
tsv::Table divergence_table(const distributions::DistributionReport& report);

}  // namespace mrag::evaluation
