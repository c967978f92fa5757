#include "mrag/corpus.hpp"

#include <algorithm>
#include <unordered_set>

#include "mrag/error.hpp"
#include "mrag/json_fields.hpp"
#include "mrag/jsonl.hpp"
#include "mrag/unicode.hpp"

namespace mrag {

std::string make_chunk_id(std::string_view doc_id, std::size_t index) {
  std::string id(doc_id);
  id += '#';
  id += std::to_string(index);
  return id;
}

namespace {

DocumentChunk make_chunk(const RawDocument& doc, std::size_t index, std::string text) {
  DocumentChunk c;
  c.chunk_id = make_chunk_id(doc.doc_id, index);
  c.doc_id = doc.doc_id;
  c.title = doc.title;
  c.text = std::move(text);
  c.language = doc.language;
  c.index = index;
  return c;
}

}  // namespace

std::vector<DocumentChunk> chunk_document(const RawDocument& doc,
                                          const std::set<LanguageCode>& char_segmented_languages,
                                          std::size_t units_per_chunk) {
  if (units_per_chunk == 0) throw PreconditionError("units_per_chunk must be positive");
  const std::u32string body = unicode::decode(unicode::trim(doc.body));
  if (body.empty()) {
    throw PreconditionError("document '" + doc.doc_id + "' has an empty body after trimming");
  }

  std::vector<DocumentChunk> chunks;
  if (char_segmented_languages.contains(doc.language)) {
    for (std::size_t start = 0; start < body.size(); start += units_per_chunk) {
      const std::size_t len = std::min(units_per_chunk, body.size() - start);
      chunks.push_back(
          make_chunk(doc, chunks.size(), unicode::encode(std::u32string_view(body).substr(start, len))));
    }
    return chunks;
  }

  // [begin, end) scalar offsets of each maximal non-whitespace run
  std::vector<std::pair<std::size_t, std::size_t>> words;
  std::size_t i = 0;
  while (i < body.size()) {
    while (i < body.size() && unicode::is_whitespace(body[i])) ++i;
    const std::size_t begin = i;
    while (i < body.size() && !unicode::is_whitespace(body[i])) ++i;
    if (i > begin) words.emplace_back(begin, i);
  }
  for (std::size_t w = 0; w < words.size(); w += units_per_chunk) {
    const std::size_t last = std::min(w + units_per_chunk, words.size()) - 1;
    const std::size_t begin = words[w].first;
    const std::size_t end = words[last].second;
    chunks.push_back(
        make_chunk(doc, chunks.size(), unicode::encode(std::u32string_view(body).substr(begin, end - begin))));
  }
  return chunks;
}

std::string render_chunk_text(const DocumentChunk& chunk) {
  std::string out;
  out.reserve(chunk.title.size() + 2 + chunk.text.size());
  out += chunk.title;
  out += ". ";
  out += chunk.text;
  return out;
}

CorpusIndex::CorpusIndex(std::vector<DocumentChunk> chunks) {
  chunks_.reserve(chunks.size());
  for (auto& c : chunks) add(std::move(c));
}

void CorpusIndex::add(DocumentChunk chunk) {
  if (by_id_.contains(chunk.chunk_id)) {
    throw PreconditionError("duplicate chunk_id '" + chunk.chunk_id + "'");
  }
  by_id_.emplace(chunk.chunk_id, chunks_.size());
  chunks_.push_back(std::move(chunk));
}

const DocumentChunk* CorpusIndex::find(std::string_view chunk_id) const {
  const auto it = by_id_.find(std::string(chunk_id));
  return it == by_id_.end() ? nullptr : &chunks_[it->second];
}

const DocumentChunk& CorpusIndex::at(std::string_view chunk_id) const {
  const DocumentChunk* c = find(chunk_id);
  if (c == nullptr) throw ProtocolError("unknown chunk_id '" + std::string(chunk_id) + "'");
  return *c;
}

void to_json(nlohmann::json& j, const RawDocument& d) {
  j = nlohmann::json{{"doc_id", d.doc_id}, {"title", d.title}, {"body", d.body}, {"language", d.language}};
}

void from_json(const nlohmann::json& j, RawDocument& d) {
  using json_fields::require;
  d.doc_id = require<std::string>(j, "doc_id");
  d.title = require<std::string>(j, "title");
  d.body = require<std::string>(j, "body");
  d.language = require<std::string>(j, "language");
}

void to_json(nlohmann::json& j, const DocumentChunk& c) {
  j = nlohmann::json{{"chunk_id", c.chunk_id}, {"doc_id", c.doc_id},     {"title", c.title},
                     {"text", c.text},         {"language", c.language}, {"index", c.index}};
}

void from_json(const nlohmann::json& j, DocumentChunk& c) {
  using json_fields::require;
  c.chunk_id = require<std::string>(j, "chunk_id");
  c.doc_id = require<std::string>(j, "doc_id");
  c.title = require<std::string>(j, "title");
  c.text = require<std::string>(j, "text");
  c.language = require<std::string>(j, "language");
  c.index = require<std::size_t>(j, "index");
  if (c.chunk_id != make_chunk_id(c.doc_id, c.index)) {
    throw ConfigError("chunk_id '" + c.chunk_id + "' does not match doc_id/index");
  }
}

std::vector<RawDocument> load_documents(const std::string& path,
                                        const std::vector<LanguageCode>& language_set) {
  std::vector<RawDocument> docs;
  std::unordered_set<std::string> seen;
  jsonl::for_each(path, [&](const nlohmann::json& j) {
    auto d = j.get<RawDocument>();
    if (d.doc_id.empty()) throw ConfigError("empty doc_id");
    if (!seen.insert(d.doc_id).second) throw ConfigError("duplicate doc_id '" + d.doc_id + "'");
    if (!language_set.empty() &&
        std::find(language_set.begin(), language_set.end(), d.language) == language_set.end()) {
      throw ConfigError("document '" + d.doc_id + "' has language '" + d.language +
                        "' outside the configured language set");
    }
    docs.push_back(std::move(d));
  });
  return docs;
}

CorpusIndex load_chunks(const std::string& path) {
  CorpusIndex index;
  jsonl::for_each(path, [&](const nlohmann::json& j) { index.add(j.get<DocumentChunk>()); });
  return index;
}

}  // namespace mrag
