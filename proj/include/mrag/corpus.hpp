#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace mrag {

using LanguageCode = std::string;

/// Languages without whitespace word segmentation are chunked by scalar value.
inline const std::set<LanguageCode> kDefaultCharSegmentedLanguages = {"ja", "th", "zh"};

inline constexpr std::size_t kChunkUnits = 100;

struct RawDocument {
  std::string doc_id;
  std::string title;
  std::string body;
  LanguageCode language;
};

struct DocumentChunk {
  std::string chunk_id;  // "{doc_id}#{index}"
  std::string doc_id;
  std::string title;
  std::string text;  // body slice, title not included
  LanguageCode language;
  std::size_t index = 0;

  bool operator==(const DocumentChunk&) const = default;
};

std::string make_chunk_id(std::string_view doc_id, std::size_t index);

/// Splits a document body into chunks of at most 100 words (or 100 scalar
/// values for char-segmented languages). Chunks are contiguous slices of the
/// trimmed body; the whitespace between word chunks is the only thing dropped.
/// Throws PreconditionError when the trimmed body is empty.
std::vector<DocumentChunk> chunk_document(
    const RawDocument& doc,
    const std::set<LanguageCode>& char_segmented_languages = kDefaultCharSegmentedLanguages,
    std::size_t units_per_chunk = kChunkUnits);

/// "{title}. {text}", the form every retriever, reranker and generator sees.
std::string render_chunk_text(const DocumentChunk& chunk);

/// Resolves chunk ids to chunks, preserving load order for deterministic iteration.
class CorpusIndex {
 public:
  CorpusIndex() = default;
  explicit CorpusIndex(std::vector<DocumentChunk> chunks);

  void add(DocumentChunk chunk);
  const DocumentChunk* find(std::string_view chunk_id) const;
  /// Throws ProtocolError when the id is unknown.
  const DocumentChunk& at(std::string_view chunk_id) const;

  const std::vector<DocumentChunk>& chunks() const { return chunks_; }
  std::size_t size() const { return chunks_.size(); }

 private:
  std::vector<DocumentChunk> chunks_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

void to_json(nlohmann::json& j, const RawDocument& d);
void from_json(const nlohmann::json& j, RawDocument& d);
void to_json(nlohmann::json& j, const DocumentChunk& c);
void from_json(const nlohmann::json& j, DocumentChunk& c);

/// Reads RawDocument JSONL, checking doc_id uniqueness and (when the set is
/// non-empty) language membership.
std::vector<RawDocument> load_documents(const std::string& path,
                                        const std::vector<LanguageCode>& language_set);
CorpusIndex load_chunks(const std::string& path);

}  // namespace mrag
