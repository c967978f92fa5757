#include "mrag/ranking.hpp"

#include <algorithm>
#include <numeric>

#include "mrag/error.hpp"
#include "mrag/json_fields.hpp"

namespace mrag {

std::vector<std::string> RankedList::ids() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.chunk_id);
  return out;
}

RankedList RankedList::top(std::size_t k) const {
  RankedList out{query_id, {}};
  const std::size_t n = std::min(k, entries.size());
  out.entries.assign(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

RankedList rank_by_score(std::string query_id, const std::vector<std::string>& chunk_ids,
                         const std::vector<double>& scores) {
  if (chunk_ids.size() != scores.size()) {
    throw ProtocolError("score count " + std::to_string(scores.size()) + " does not match " +
                        std::to_string(chunk_ids.size()) + " documents");
  }
  std::vector<std::size_t> order(chunk_ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  RankedList out{std::move(query_id), {}};
  out.entries.reserve(order.size());
  for (std::size_t i : order) out.entries.push_back({chunk_ids[i], scores[i]});
  return out;
}

void to_json(nlohmann::json& j, const RankedList& r) {
  j = nlohmann::json::array();
  for (const auto& e : r.entries) j.push_back(nlohmann::json::array({e.chunk_id, e.score}));
}

void from_json(const nlohmann::json& j, RankedList& r) {
  if (!j.is_array()) throw ConfigError("ranked list must be an array of [chunk_id, score] pairs");
  r.entries.clear();
  for (const auto& pair : j) {
    if (!pair.is_array() || pair.size() != 2) throw ConfigError("ranked entry must be [chunk_id, score]");
    r.entries.push_back({pair[0].get<std::string>(), pair[1].get<double>()});
  }
}

}  // namespace mrag
