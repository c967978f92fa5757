#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mrag/ranking.hpp"

namespace mrag::metrics {

/// Multiset of contiguous character 3-grams, keyed by the UTF-8 encoding of
/// the three scalar values.
using NgramMultiset = std::map<std::string, std::size_t>;

struct NgramOptions {
  bool casefold = false;
};

NgramMultiset char_ngrams(std::string_view text, std::size_t n = 3, NgramOptions opts = {});

/// Size of the multiset intersection (per-gram minimum of counts).
std::size_t intersection_size(const NgramMultiset& a, const NgramMultiset& b);
std::size_t total_count(const NgramMultiset& m);

/// |C_gen ∩ C_ref| / |C_ref| over character 3-grams. Returns 0 when either
/// string has fewer than three scalar values.
double char_3gram_recall(std::string_view generated, std::string_view reference,
                         NgramOptions opts = {});

/// Best recall over all references; 0 for an empty reference list.
double best_char_3gram_recall(std::string_view generated, const std::vector<std::string>& references,
                              NgramOptions opts = {});

struct RelevanceJudgments {
  std::string query_id;
  std::set<std::string> relevant_chunk_ids;
};

/// (1/k) * number of relevant ids in the first k positions; missing positions
/// count as non-relevant. Throws PreconditionError for k == 0.
double precision_at_k(const RankedList& ranked, const RelevanceJudgments& judgments, std::size_t k);

/// Binary-relevance NDCG@k with log2 discounts. nullopt when the judgment set
/// is empty (IDCG is zero).
std::optional<double> ndcg_at_k(const RankedList& ranked, const RelevanceJudgments& judgments,
                                std::size_t k);

}  // namespace mrag::metrics
