#include "mrag/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <unordered_set>

#include "mrag/error.hpp"
#include "mrag/executor.hpp"
#include "mrag/json_fields.hpp"
#include "mrag/jsonl.hpp"
#include "mrag/log.hpp"

namespace mrag {

using json_fields::require;
using nlohmann::json;

std::string build_context(const std::vector<const DocumentChunk*>& chunks) {
  std::string context;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    if (i > 0) context += "\n\n";
    context += render_chunk_text(*chunks[i]);
  }
  return context;
}

std::set<LanguageCode> argmax_languages(const std::map<LanguageCode, double>& scores, double* best) {
  std::set<LanguageCode> winners;
  double top = 0.0;
  bool first = true;
  for (const auto& [language, score] : scores) {
    if (first || score > top) {
      top = score;
      winners = {language};
      first = false;
    } else if (score == top) {
      winners.insert(language);
    }
  }
  if (best != nullptr) *best = first ? 0.0 : top;
  return winners;
}

namespace {

std::vector<const DocumentChunk*> resolve(const RankedList& list, const CorpusIndex& corpus) {
  std::vector<const DocumentChunk*> out;
  out.reserve(list.size());
  for (const auto& e : list.entries) out.push_back(&corpus.at(e.chunk_id));
  return out;
}

std::vector<DocumentChunk> copy_chunks(const std::vector<const DocumentChunk*>& ptrs) {
  std::vector<DocumentChunk> out;
  out.reserve(ptrs.size());
  for (const auto* c : ptrs) out.push_back(*c);
  return out;
}

std::map<std::string, GenerationRecord> generate_all(const Query& query, const ServiceSet& services,
                                                     const std::string& context, const PipelineOptions& opts) {
  std::map<std::string, GenerationRecord> answers;
  for (const auto& [generator_id, generator] : services.generators) {
    GenerationRecord rec;
    rec.generator_id = generator_id;
    rec.answer = services::generate(*generator, query.text, context, generator_id, opts.prompt_template);
    rec.score = metrics::best_char_3gram_recall(rec.answer, query.reference_answers, opts.ngram);
    answers.emplace(generator_id, std::move(rec));
  }
  return answers;
}

double mean_score(const std::map<std::string, GenerationRecord>& answers) {
  if (answers.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [id, rec] : answers) total += rec.score;
  return total / static_cast<double>(answers.size());
}

void check_services(const ServiceSet& services) {
  if (!services.retriever || !services.reranker) throw PreconditionError("retriever and reranker are required");
  if (services.generators.empty()) throw PreconditionError("at least one generator is required");
}

std::map<std::string, GenerationRecord> empty_answers(const ServiceSet& services) {
  std::map<std::string, GenerationRecord> answers;
  for (const auto& [id, g] : services.generators) answers.emplace(id, GenerationRecord{id, "", 0.0});
  return answers;
}

}  // namespace

VanillaRunRecord run_vanilla(const Query& query, const ServiceSet& services, const CorpusIndex& corpus,
                             const PipelineOptions& opts) {
  check_services(services);
  VanillaRunRecord rec;
  rec.query_id = query.query_id;
  rec.query_language = query.language;
  rec.retrieved = services::retrieve(*services.retriever, query.text, opts.retrieval_top_k);
  rec.retrieved.query_id = query.query_id;
  rec.rerank_pool.query_id = query.query_id;
  rec.reranked.query_id = query.query_id;

  if (rec.retrieved.empty()) {
    log::warn("query '" + query.query_id + "': retrieval returned no candidates");
    rec.empty_retrieval = true;
    rec.answers = empty_answers(services);
    return rec;
  }

  const auto pool = resolve(rec.retrieved, corpus);
  rec.rerank_pool = services::rerank(*services.reranker, query.text, copy_chunks(pool));
  rec.rerank_pool.query_id = query.query_id;
  rec.reranked = rec.rerank_pool.top(opts.rerank_top_k);

  const auto top = resolve(rec.reranked, corpus);
  double score_sum = 0.0;
  for (std::size_t i = 0; i < top.size(); ++i) {
    ++rec.context_language_counts[top[i]->language];
    score_sum += rec.reranked.entries[i].score;
  }
  rec.mean_top5_score = score_sum / static_cast<double>(top.size());
  rec.answers = generate_all(query, services, build_context(top), opts);
  return rec;
}

OracleRunRecord run_oracle(const Query& query, const ServiceSet& services, const CorpusIndex& corpus,
                           const PipelineOptions& opts) {
  check_services(services);
  OracleRunRecord rec;
  rec.query_id = query.query_id;
  rec.query_language = query.language;
  rec.retrieved = services::retrieve(*services.retriever, query.text, opts.retrieval_top_k);
  rec.retrieved.query_id = query.query_id;

  if (rec.retrieved.empty()) {
    log::warn("query '" + query.query_id + "': retrieval returned no candidates");
    rec.empty_retrieval = true;
    return rec;
  }

  // partition in retrieval order
  std::map<LanguageCode, std::vector<DocumentChunk>> groups;
  for (const auto* c : resolve(rec.retrieved, corpus)) groups[c->language].push_back(*c);

  std::map<LanguageCode, double> group_scores;
  for (const auto& [language, chunks] : groups) {
    LanguageGroupRun group;
    group.reranked_top5 = services::rerank(*services.reranker, query.text, chunks).top(opts.rerank_top_k);
    group.reranked_top5.query_id = query.query_id;
    try {
      group.answers = generate_all(query, services, build_context(resolve(group.reranked_top5, corpus)), opts);
    } catch (const ServiceError& e) {
      log::warn("query '" + query.query_id + "': language group '" + language +
                "' excluded, generation failed: " + e.what());
      rec.excluded_languages.push_back(language);
      continue;
    } catch (const ProtocolError& e) {
      log::warn("query '" + query.query_id + "': language group '" + language +
                "' excluded, generation failed: " + e.what());
      rec.excluded_languages.push_back(language);
      continue;
    }
    group.score = mean_score(group.answers);
    group_scores.emplace(language, group.score);
    rec.per_language.emplace(language, std::move(group));
  }
  if (group_scores.empty()) {
    throw ServiceError("query '" + query.query_id + "': generation failed for every language group");
  }
  rec.best_languages = argmax_languages(group_scores, &rec.best_score);
  return rec;
}

// ---- JSON -----------------------------------------------------------------

void to_json(json& j, const Query& q) {
  j = json{{"query_id", q.query_id},
           {"text", q.text},
           {"language", q.language},
           {"reference_answers", q.reference_answers}};
}

void from_json(const json& j, Query& q) {
  q.query_id = require<std::string>(j, "query_id");
  q.text = require<std::string>(j, "text");
  q.language = require<std::string>(j, "language");
  q.reference_answers = require<std::vector<std::string>>(j, "reference_answers");
}

void to_json(json& j, const GenerationRecord& g) {
  j = json{{"generator_id", g.generator_id}, {"answer", g.answer}, {"score", g.score}};
}

void from_json(const json& j, GenerationRecord& g) {
  g.generator_id = require<std::string>(j, "generator_id");
  g.answer = require<std::string>(j, "answer");
  g.score = require<double>(j, "score");
  if (g.score < 0.0 || g.score > 1.0) throw ConfigError("field 'score' must lie in [0, 1]");
}

void to_json(json& j, const VanillaRunRecord& r) {
  j = json{{"query_id", r.query_id},
           {"query_language", r.query_language},
           {"retrieved", r.retrieved},
           {"rerank_pool", r.rerank_pool},
           {"reranked", r.reranked},
           {"context_language_counts", r.context_language_counts},
           {"mean_top5_score", r.mean_top5_score},
           {"answers", r.answers},
           {"empty_retrieval", r.empty_retrieval}};
}

void from_json(const json& j, VanillaRunRecord& r) {
  r.query_id = require<std::string>(j, "query_id");
  r.query_language = require<std::string>(j, "query_language");
  r.retrieved = require<RankedList>(j, "retrieved");
  r.rerank_pool = json_fields::optional<RankedList>(j, "rerank_pool", RankedList{});
  r.reranked = require<RankedList>(j, "reranked");
  r.retrieved.query_id = r.rerank_pool.query_id = r.reranked.query_id = r.query_id;
  r.context_language_counts = require<std::map<LanguageCode, int>>(j, "context_language_counts");
  r.mean_top5_score = require<double>(j, "mean_top5_score");
  r.answers = require<std::map<std::string, GenerationRecord>>(j, "answers");
  r.empty_retrieval = json_fields::optional<bool>(j, "empty_retrieval", false);
}

void to_json(json& j, const OracleRunRecord& r) {
  json groups = json::object();
  for (const auto& [language, g] : r.per_language) {
    groups[language] = json{{"reranked_top5", g.reranked_top5}, {"answers", g.answers}, {"score", g.score}};
  }
  j = json{{"query_id", r.query_id},
           {"query_language", r.query_language},
           {"retrieved", r.retrieved},
           {"per_language", groups},
           {"best_score", r.best_score},
           {"best_languages", r.best_languages},
           {"excluded_languages", r.excluded_languages},
           {"empty_retrieval", r.empty_retrieval}};
}

void from_json(const json& j, OracleRunRecord& r) {
  r.query_id = require<std::string>(j, "query_id");
  r.query_language = require<std::string>(j, "query_language");
  r.retrieved = require<RankedList>(j, "retrieved");
  r.retrieved.query_id = r.query_id;
  r.per_language.clear();
  const json groups = require<json>(j, "per_language");
  for (const auto& [language, g] : groups.items()) {
    LanguageGroupRun group;
    group.reranked_top5 = require<RankedList>(g, "reranked_top5");
    group.reranked_top5.query_id = r.query_id;
    group.answers = require<std::map<std::string, GenerationRecord>>(g, "answers");
    group.score = require<double>(g, "score");
    r.per_language.emplace(language, std::move(group));
  }
  r.best_score = require<double>(j, "best_score");
  r.best_languages = require<std::set<LanguageCode>>(j, "best_languages");
  r.excluded_languages = json_fields::optional<std::vector<std::string>>(j, "excluded_languages", {});
  r.empty_retrieval = json_fields::optional<bool>(j, "empty_retrieval", false);
}

std::vector<Query> load_queries(const std::string& path) {
  std::vector<Query> queries;
  std::unordered_set<std::string> seen;
  jsonl::for_each(path, [&](const json& j) {
    auto q = j.get<Query>();
    if (!seen.insert(q.query_id).second) throw ConfigError("duplicate query_id '" + q.query_id + "'");
    queries.push_back(std::move(q));
  });
  return queries;
}

// ---- batch runs -----------------------------------------------------------

namespace {

struct Outcome {
  json record;
  std::string error;
  bool empty = false;
};

}  // namespace

BatchSummary run_batch(RunKind kind, const std::vector<Query>& queries, const ServiceSet& services,
                       const CorpusIndex& corpus, const PipelineOptions& opts, const std::string& output_path,
                       std::size_t parallelism) {
  BatchSummary summary;
  summary.total = queries.size();

  std::unordered_set<std::string> completed;
  if (std::filesystem::exists(output_path)) {
    if (jsonl::drop_torn_tail(output_path)) {
      log::warn(output_path + ": dropped an incomplete final record left by an interrupted run");
    }
    jsonl::for_each(output_path, [&](const json& j) { completed.insert(require<std::string>(j, "query_id")); });
  }
  std::vector<const Query*> pending;
  for (const auto& q : queries) {
    if (completed.contains(q.query_id)) {
      ++summary.resumed;
    } else {
      pending.push_back(&q);
    }
  }

  jsonl::Writer writer(output_path, /*append=*/true);
  ordered_parallel_for<Outcome>(
      pending.size(), parallelism,
      [&](std::size_t i) {
        Outcome out;
        try {
          if (kind == RunKind::vanilla) {
            auto rec = run_vanilla(*pending[i], services, corpus, opts);
            out.empty = rec.empty_retrieval;
            out.record = rec;
          } else {
            auto rec = run_oracle(*pending[i], services, corpus, opts);
            out.empty = rec.empty_retrieval;
            out.record = rec;
          }
        } catch (const Error& e) {
          out.error = e.what();
        } catch (const std::exception& e) {
          out.error = std::string("unexpected: ") + e.what();
        }
        return out;
      },
      [&](std::size_t i, Outcome& out) {
        if (!out.error.empty()) {
          log::warn("query '" + pending[i]->query_id + "' failed: " + out.error);
          summary.failures.push_back({pending[i]->query_id, out.error});
          return;
        }
        if (out.empty) ++summary.flagged_empty;
        writer.write(out.record);
        writer.flush();
        ++summary.completed;
      });
  return summary;
}

}  // namespace mrag
