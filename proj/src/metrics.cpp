#include "mrag/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "mrag/error.hpp"
#include "mrag/log.hpp"
#include "mrag/unicode.hpp"

namespace mrag::metrics {

NgramMultiset char_ngrams(std::string_view text, std::size_t n, NgramOptions opts) {
  NgramMultiset grams;
  std::u32string scalars = unicode::decode(text);
  if (opts.casefold) scalars = unicode::to_lower(scalars);
  if (n == 0 || scalars.size() < n) return grams;
  for (std::size_t i = 0; i + n <= scalars.size(); ++i) {
    ++grams[unicode::encode(std::u32string_view(scalars).substr(i, n))];
  }
  return grams;
}

std::size_t intersection_size(const NgramMultiset& a, const NgramMultiset& b) {
  std::size_t total = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      total += std::min(ia->second, ib->second);
      ++ia;
      ++ib;
    }
  }
  return total;
}

std::size_t total_count(const NgramMultiset& m) {
  std::size_t total = 0;
  for (const auto& [gram, count] : m) total += count;
  return total;
}

double char_3gram_recall(std::string_view generated, std::string_view reference, NgramOptions opts) {
  const NgramMultiset ref = char_ngrams(reference, 3, opts);
  const std::size_t denom = total_count(ref);
  if (denom == 0) {
    log::warn("reference has fewer than 3 characters; 3-gram recall defined as 0");
    return 0.0;
  }
  const NgramMultiset gen = char_ngrams(generated, 3, opts);
  return static_cast<double>(intersection_size(gen, ref)) / static_cast<double>(denom);
}

double best_char_3gram_recall(std::string_view generated, const std::vector<std::string>& references,
                              NgramOptions opts) {
  double best = 0.0;
  for (const auto& ref : references) best = std::max(best, char_3gram_recall(generated, ref, opts));
  return best;
}

double precision_at_k(const RankedList& ranked, const RelevanceJudgments& judgments, std::size_t k) {
  if (k == 0) throw PreconditionError("precision_at_k requires k >= 1");
  std::size_t hits = 0;
  const std::size_t n = std::min(k, ranked.entries.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (judgments.relevant_chunk_ids.contains(ranked.entries[i].chunk_id)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

std::optional<double> ndcg_at_k(const RankedList& ranked, const RelevanceJudgments& judgments,
                                std::size_t k) {
  if (k == 0) throw PreconditionError("ndcg_at_k requires k >= 1");
  if (judgments.relevant_chunk_ids.empty()) return std::nullopt;
  double dcg = 0.0;
  const std::size_t n = std::min(k, ranked.entries.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (judgments.relevant_chunk_ids.contains(ranked.entries[i].chunk_id)) {
      dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    }
  }
  double idcg = 0.0;
  const std::size_t ideal = std::min(k, judgments.relevant_chunk_ids.size());
  for (std::size_t i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

}  // namespace mrag::metrics
