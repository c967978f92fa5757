#include "mrag/services.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "mrag/error.hpp"
#include "mrag/hash.hpp"
#include "mrag/json_fields.hpp"
#include "mrag/log.hpp"
#include "mrag/unicode.hpp"

namespace mrag::services {

using json_fields::require;
using nlohmann::json;

// ---- wire types -----------------------------------------------------------

void to_json(json& j, const RetrieveRequest& r) { j = json{{"query", r.query}, {"top_k", r.top_k}}; }

void from_json(const json& j, RetrieveRequest& r) {
  r.query = require<std::string>(j, "query");
  const auto top_k = require<long long>(j, "top_k");
  if (top_k < 1) throw ConfigError("field 'top_k' must be a positive integer");
  r.top_k = static_cast<std::size_t>(top_k);
}

void to_json(json& j, const RetrieveResponse& r) { j = json{{"chunk_ids", r.chunk_ids}, {"scores", r.scores}}; }

void from_json(const json& j, RetrieveResponse& r) {
  r.chunk_ids = require<std::vector<std::string>>(j, "chunk_ids");
  r.scores = require<std::vector<double>>(j, "scores");
}

void to_json(json& j, const RerankRequest& r) {
  j = json{{"query", r.query}, {"documents", r.documents}, {"chunk_ids", r.chunk_ids}};
}

void from_json(const json& j, RerankRequest& r) {
  r.query = require<std::string>(j, "query");
  r.documents = require<std::vector<std::string>>(j, "documents");
  r.chunk_ids = require<std::vector<std::string>>(j, "chunk_ids");
  if (r.documents.size() != r.chunk_ids.size()) {
    throw ConfigError("fields 'documents' and 'chunk_ids' differ in length");
  }
}

void to_json(json& j, const RerankResponse& r) { j = json{{"scores", r.scores}}; }
void from_json(const json& j, RerankResponse& r) { r.scores = require<std::vector<double>>(j, "scores"); }

void to_json(json& j, const GenerateRequest& r) {
  j = json{{"question", r.question}, {"context", r.context}, {"generator_id", r.generator_id}};
  if (!r.prompt.empty()) j["prompt"] = r.prompt;
}

void from_json(const json& j, GenerateRequest& r) {
  r.question = require<std::string>(j, "question");
  r.context = require<std::string>(j, "context");
  r.generator_id = require<std::string>(j, "generator_id");
  r.prompt = json_fields::optional<std::string>(j, "prompt", "");
}

void to_json(json& j, const GenerateResponse& r) { j = json{{"answer", r.answer}}; }
void from_json(const json& j, GenerateResponse& r) { r.answer = require<std::string>(j, "answer"); }

// ---- contract-checked operations ------------------------------------------

RankedList retrieve(RetrieverService& service, const std::string& query, std::size_t top_k) {
  if (top_k == 0) throw PreconditionError("retrieve requires top_k >= 1");
  const RetrieveResponse response = service.retrieve({query, top_k});
  const std::string where = " from endpoint '" + service.endpoint_name() + "'";
  if (response.chunk_ids.size() != response.scores.size()) {
    throw ProtocolError("retrieve response has mismatched chunk_ids/scores" + where);
  }
  if (response.chunk_ids.size() > top_k) {
    throw ProtocolError("retrieve response exceeds top_k" + where);
  }
  RankedList out;
  for (std::size_t i = 0; i < response.chunk_ids.size(); ++i) {
    if (!std::isfinite(response.scores[i])) throw ProtocolError("non-finite retrieval score" + where);
    if (i > 0 && response.scores[i] > response.scores[i - 1]) {
      throw ProtocolError("retrieve scores are not non-increasing" + where);
    }
    out.entries.push_back({response.chunk_ids[i], response.scores[i]});
  }
  std::vector<std::string> ids = response.chunk_ids;
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw ProtocolError("retrieve response repeats a chunk id" + where);
  }
  return out;
}

RankedList rerank(RerankerService& service, const std::string& query,
                  const std::vector<DocumentChunk>& chunks) {
  if (chunks.empty()) throw PreconditionError("rerank requires a non-empty chunk list");
  RerankRequest request;
  request.query = query;
  request.documents.reserve(chunks.size());
  request.chunk_ids.reserve(chunks.size());
  for (const auto& c : chunks) {
    request.documents.push_back(render_chunk_text(c));
    request.chunk_ids.push_back(c.chunk_id);
  }
  const RerankResponse response = service.rerank(request);
  if (response.scores.size() != chunks.size()) {
    throw ProtocolError("rerank endpoint '" + service.endpoint_name() + "' returned " +
                        std::to_string(response.scores.size()) + " scores for " +
                        std::to_string(chunks.size()) + " documents");
  }
  for (double s : response.scores) {
    if (!std::isfinite(s)) {
      throw ProtocolError("rerank endpoint '" + service.endpoint_name() + "' returned a non-finite score");
    }
  }
  return rank_by_score({}, request.chunk_ids, response.scores);
}

std::string render_prompt(const std::string& prompt_template, const std::string& question,
                          const std::string& context) {
  std::string out;
  out.reserve(prompt_template.size() + question.size() + context.size());
  std::size_t i = 0;
  while (i < prompt_template.size()) {
    if (prompt_template.compare(i, 10, "{question}") == 0) {
      out += question;
      i += 10;
    } else if (prompt_template.compare(i, 9, "{context}") == 0) {
      out += context;
      i += 9;
    } else {
      out += prompt_template[i++];
    }
  }
  return out;
}

std::string generate(GeneratorService& service, const std::string& question, const std::string& context,
                     const std::string& generator_id, const std::string& prompt_template) {
  if (question.empty()) throw PreconditionError("generate requires a non-empty question");
  GenerateRequest request{question, context, generator_id, {}};
  if (!prompt_template.empty()) request.prompt = render_prompt(prompt_template, question, context);
  return service.generate(request).answer;
}

// ---- mocks ----------------------------------------------------------------

std::vector<std::string> mock_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::u32string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(unicode::encode(current));
    current.clear();
  };
  for (char32_t c : unicode::decode(text)) {
    const bool ascii_punct = c < 0x80 && std::ispunct(static_cast<int>(c));
    if (unicode::is_whitespace(c) || ascii_punct) {
      flush();
    } else {
      current.push_back(unicode::to_lower(c));
    }
  }
  flush();
  return tokens;
}

namespace {

std::vector<std::string> unique_sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

MockRetriever::MockRetriever(std::shared_ptr<const CorpusIndex> corpus) : corpus_(std::move(corpus)) {
  if (!corpus_) throw PreconditionError("MockRetriever needs a corpus");
  chunk_tokens_.reserve(corpus_->size());
  for (const auto& c : corpus_->chunks()) chunk_tokens_.push_back(unique_sorted(mock_tokens(render_chunk_text(c))));
}

RetrieveResponse MockRetriever::retrieve(const RetrieveRequest& request) {
  if (request.top_k == 0) throw PreconditionError("top_k must be >= 1");
  const std::vector<std::string> query = unique_sorted(mock_tokens(request.query));
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(chunk_tokens_.size());
  for (std::size_t i = 0; i < chunk_tokens_.size(); ++i) {
    std::size_t overlap = 0;
    for (const auto& t : query) {
      if (std::binary_search(chunk_tokens_[i].begin(), chunk_tokens_[i].end(), t)) ++overlap;
    }
    scored.emplace_back(static_cast<double>(overlap), i);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  RetrieveResponse response;
  const std::size_t n = std::min(request.top_k, scored.size());
  for (std::size_t i = 0; i < n; ++i) {
    response.chunk_ids.push_back(corpus_->chunks()[scored[i].second].chunk_id);
    response.scores.push_back(scored[i].first);
  }
  return response;
}

MockReranker::MockReranker(MockRerankerConfig config, std::shared_ptr<const CorpusIndex> corpus)
    : config_(std::move(config)), corpus_(std::move(corpus)) {
  if (!config_.language_bias.empty() && !corpus_) {
    throw PreconditionError("MockReranker language bias needs a corpus to resolve chunk languages");
  }
}

double MockReranker::score(const std::string& query, const std::string& chunk_id) const {
  if (const auto q = config_.scores.find(query); q != config_.scores.end()) {
    if (const auto s = q->second.find(chunk_id); s != q->second.end()) return s->second;
  }
  std::uint64_t h = hash::fnv1a_u64(config_.seed);
  h = hash::fnv1a(query, h);
  h = hash::fnv1a(std::string_view("\x1f", 1), h);
  h = hash::fnv1a(chunk_id, h);
  double s = hash::unit_interval(hash::mix(h));
  if (!config_.language_bias.empty()) {
    if (const DocumentChunk* c = corpus_->find(chunk_id)) {
      if (const auto b = config_.language_bias.find(c->language); b != config_.language_bias.end()) {
        s += b->second;
      }
    }
  }
  return s;
}

RerankResponse MockReranker::rerank(const RerankRequest& request) {
  RerankResponse response;
  response.scores.reserve(request.chunk_ids.size());
  for (const auto& id : request.chunk_ids) response.scores.push_back(score(request.query, id));
  return response;
}

MockGenerator::MockGenerator(std::string id, MockGeneratorConfig config)
    : id_(std::move(id)), config_(std::move(config)) {}

std::size_t MockGenerator::warnings() const {
  std::lock_guard lock(mutex_);
  return warnings_;
}

GenerateResponse MockGenerator::generate(const GenerateRequest& request) {
  switch (config_.mode) {
    case MockGeneratorMode::echo: {
      const std::u32string ctx = unicode::decode(request.context);
      return {unicode::encode(std::u32string_view(ctx).substr(0, std::min(config_.echo_chars, ctx.size())))};
    }
    case MockGeneratorMode::table:
    case MockGeneratorMode::grounded: {
      const auto it = config_.answers.find(request.question);
      if (it == config_.answers.end()) {
        {
          std::lock_guard lock(mutex_);
          ++warnings_;
        }
        log::warn("mock generator '" + id_ + "' has no answer for question '" + request.question + "'");
        return {config_.mode == MockGeneratorMode::grounded ? config_.fallback : std::string()};
      }
      if (config_.mode == MockGeneratorMode::table) return {it->second};
      if (!it->second.empty() && request.context.find(it->second) != std::string::npos) return {it->second};
      return {config_.fallback};
    }
  }
  return {};
}

// ---- fixtures -------------------------------------------------------------

MockFixtures parse_mock_fixtures(const json& j, const std::string& base_dir) {
  MockFixtures fx;
  const auto chunks_path = require<std::string>(j, "chunks");
  std::filesystem::path p(chunks_path);
  if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
  fx.corpus = std::make_shared<const CorpusIndex>(load_chunks(p.string()));

  const json reranker = j.value("reranker", json::object());
  fx.reranker.seed = json_fields::optional<std::uint64_t>(reranker, "seed", 0);
  fx.reranker.scores =
      json_fields::optional<std::map<std::string, std::map<std::string, double>>>(reranker, "scores", {});
  fx.reranker.language_bias = json_fields::optional<std::map<std::string, double>>(reranker, "language_bias", {});

  const json generators = j.value("generators", json::object());
  for (const auto& [id, g] : generators.items()) {
    MockGeneratorConfig cfg;
    const auto mode = json_fields::optional<std::string>(g, "mode", "table");
    if (mode == "table") {
      cfg.mode = MockGeneratorMode::table;
    } else if (mode == "echo") {
      cfg.mode = MockGeneratorMode::echo;
    } else if (mode == "grounded") {
      cfg.mode = MockGeneratorMode::grounded;
    } else {
      throw ConfigError("generators." + id + ".mode: unknown mode '" + mode + "'");
    }
    cfg.answers = json_fields::optional<std::map<std::string, std::string>>(g, "answers", {});
    cfg.echo_chars = json_fields::optional<std::size_t>(g, "echo_chars", 20);
    cfg.fallback = json_fields::optional<std::string>(g, "fallback", "");
    fx.generators.emplace(id, std::move(cfg));
  }
  return fx;
}

MockFixtures load_mock_fixtures(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open fixtures file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_mock_fixtures(j, std::filesystem::path(path).parent_path().string());
}

}  // namespace mrag::services
