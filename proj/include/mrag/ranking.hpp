#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace mrag {

struct RankedEntry {
  std::string chunk_id;
  double score = 0.0;

  bool operator==(const RankedEntry&) const = default;
};

/// Entries are kept in descending score order; equal scores keep input order.
struct RankedList {
  std::string query_id;
  std::vector<RankedEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  std::vector<std::string> ids() const;
  /// First `k` entries (or all of them when the list is shorter).
  RankedList top(std::size_t k) const;

  bool operator==(const RankedList&) const = default;
};

/// Builds a RankedList from parallel id/score vectors with a stable
/// descending sort.
RankedList rank_by_score(std::string query_id, const std::vector<std::string>& chunk_ids,
                         const std::vector<double>& scores);

void to_json(nlohmann::json& j, const RankedList& r);
void from_json(const nlohmann::json& j, RankedList& r);

}  // namespace mrag
