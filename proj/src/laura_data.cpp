#include "mrag/laura_data.hpp"

#include <algorithm>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "mrag/error.hpp"
#include "mrag/executor.hpp"
#include "mrag/hash.hpp"
#include "mrag/json_fields.hpp"
#include "mrag/log.hpp"

namespace mrag::laura {

using json_fields::require;
using nlohmann::json;

// ---- utility estimation ---------------------------------------------------

UtilityEstimator::UtilityEstimator(const Query& query, const ServiceSet& services, const LauraOptions& opts)
    : query_(query), services_(services), opts_(opts) {
  if (services_.generators.empty()) throw PreconditionError("LAURA construction needs at least one generator");
}

std::optional<UtilityScore> UtilityEstimator::evaluate(const std::string& context) {
  if (const auto it = cache_.find(context); it != cache_.end()) return it->second;
  std::optional<UtilityScore> result;
  try {
    UtilityScore u;
    double total = 0.0;
    for (const auto& [generator_id, generator] : services_.generators) {
      ++calls_;
      const std::string answer =
          services::generate(*generator, query_.text, context, generator_id, opts_.prompt_template);
      const double score = metrics::best_char_3gram_recall(answer, query_.reference_answers, opts_.ngram);
      u.per_generator.emplace(generator_id, score);
      total += score;
    }
    u.mean = total / static_cast<double>(u.per_generator.size());
    result = std::move(u);
  } catch (const ServiceError& e) {
    log::warn("query '" + query_.query_id + "': generation failed: " + e.what());
  } catch (const ProtocolError& e) {
    log::warn("query '" + query_.query_id + "': generation failed: " + e.what());
  }
  cache_.emplace(context, result);
  return result;
}

namespace {

std::vector<const DocumentChunk*> resolve_ids(const std::vector<std::string>& ids, const CorpusIndex& corpus) {
  std::vector<const DocumentChunk*> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(&corpus.at(id));
  return out;
}

bool meets(double value, double theta, bool inclusive) { return inclusive ? value >= theta : value > theta; }

}  // namespace

// ---- stage 1 --------------------------------------------------------------

BalancedCandidateSet stage1_select(const Query& query, const RankedList& retrieved, const ServiceSet& services,
                                   const CorpusIndex& corpus, UtilityEstimator& estimator,
                                   const LauraOptions& opts) {
  if (!services.reranker) throw PreconditionError("stage1_select needs a reranker");
  BalancedCandidateSet set;
  set.query_id = query.query_id;

  std::map<LanguageCode, std::vector<DocumentChunk>> partitions;
  for (const auto& e : retrieved.entries) {
    const DocumentChunk& c = corpus.at(e.chunk_id);
    partitions[c.language].push_back(c);
  }
  for (const auto& [language, chunks] : partitions) {
    GroupUtility group;
    group.chunk_ids = services::rerank(*services.reranker, query.text, chunks).top(opts.per_language_top_k).ids();
    set.by_language.emplace(language, std::move(group));
  }

  if (opts.stage1_evaluation == Stage1Evaluation::group) {
    std::map<LanguageCode, double> utilities;
    for (auto& [language, group] : set.by_language) {
      const auto u = estimator.evaluate(build_context(resolve_ids(group.chunk_ids, corpus)));
      if (!u) {
        log::warn("query '" + query.query_id + "': language group '" + language + "' excluded from Stage 1");
        group.failed = true;
        continue;
      }
      group.utility = *u;
      utilities.emplace(language, u->mean);
    }
    set.selected_languages = argmax_languages(utilities);
    for (const auto& language : set.selected_languages) {
      const auto& ids = set.by_language.at(language).chunk_ids;
      set.d_balanced.insert(set.d_balanced.end(), ids.begin(), ids.end());
    }
    return set;
  }

  // document mode: every retained chunk scored on its own
  std::vector<std::pair<LanguageCode, UtilityScore>> scored;
  for (auto& [language, group] : set.by_language) {
    double group_best = 0.0;
    bool any = false;
    for (const auto& id : group.chunk_ids) {
      const auto u = estimator.evaluate(build_context({&corpus.at(id)}));
      if (!u) continue;
      UtilityScore doc = *u;
      doc.chunk_id = id;
      group_best = any ? std::max(group_best, doc.mean) : doc.mean;
      any = true;
      set.document_utilities.push_back(doc);
      scored.emplace_back(language, std::move(doc));
    }
    group.failed = !any;
    group.utility.mean = group_best;
  }
  if (scored.empty()) return set;
  double best = scored.front().second.mean;
  for (const auto& [language, u] : scored) best = std::max(best, u.mean);
  for (const auto& [language, u] : scored) {
    if (u.mean == best) {
      set.selected_languages.insert(language);
      set.d_balanced.push_back(u.chunk_id);
    }
  }
  return set;
}

// ---- stage 2 --------------------------------------------------------------

LabeledQuery apply_threshold(const std::string& query_id, const std::vector<UtilityScore>& utilities,
                             const std::vector<std::string>& pool_ids, double theta, bool inclusive) {
  if (theta < 0.0 || theta > 1.0) throw PreconditionError("theta must lie in [0, 1]");
  LabeledQuery labeled;
  labeled.query_id = query_id;
  labeled.theta = theta;
  labeled.stage = Stage::full;
  std::unordered_set<std::string> positive_set;
  for (const auto& u : utilities) {
    if (meets(u.mean, theta, inclusive) && positive_set.insert(u.chunk_id).second) {
      labeled.positives.push_back(u.chunk_id);
    }
  }
  for (const auto& id : pool_ids) {
    if (!positive_set.contains(id)) labeled.negatives.push_back(id);
  }
  return labeled;
}

Stage2Result stage2_filter(const Query& query, const std::vector<std::string>& d_balanced,
                           const RankedList& retrieved, const CorpusIndex& corpus, UtilityEstimator& estimator,
                           const LauraOptions& opts) {
  if (d_balanced.empty()) throw PreconditionError("stage2_filter requires a non-empty candidate set");
  if (opts.theta < 0.0 || opts.theta > 1.0) throw PreconditionError("theta must lie in [0, 1]");
  Stage2Result result;
  for (const auto& id : d_balanced) {
    auto u = estimator.evaluate(build_context({&corpus.at(id)}));
    if (!u) {
      log::warn("query '" + query.query_id + "': chunk '" + id + "' could not be scored; treated as negative");
      continue;
    }
    u->chunk_id = id;
    result.utilities.push_back(std::move(*u));
  }
  result.labels = apply_threshold(query.query_id, result.utilities, retrieved.ids(), opts.theta,
                                  opts.inclusive_threshold);
  return result;
}

// ---- self-training --------------------------------------------------------

LabeledQuery self_training_label(const std::string& query_id, const RankedList& reranked_top5,
                                 const RankedList& retrieved_pool) {
  if (reranked_top5.empty()) throw PreconditionError("self_training_label requires a non-empty reranked list");
  LabeledQuery labeled;
  labeled.query_id = query_id;
  labeled.stage = Stage::self_training;
  std::unordered_set<std::string> positive_set;
  for (const auto& e : reranked_top5.entries) {
    if (positive_set.insert(e.chunk_id).second) labeled.positives.push_back(e.chunk_id);
  }
  for (const auto& e : retrieved_pool.entries) {
    if (!positive_set.contains(e.chunk_id)) labeled.negatives.push_back(e.chunk_id);
  }
  return labeled;
}

// ---- training instances ---------------------------------------------------

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k > n) throw PreconditionError("cannot sample more items than available");
  std::mt19937_64 rng(seed);
  // bounded draw by rejection so the stream does not depend on the standard
  // library's distribution implementation
  auto below = [&rng](std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % bound;
  };
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

std::optional<std::vector<TrainingInstance>> emit_training_instances(const LabeledQuery& labeled,
                                                                     const std::string& query_text,
                                                                     std::size_t k, std::uint64_t seed,
                                                                     const CorpusIndex& corpus) {
  if (k == 0) throw PreconditionError("k_negatives must be >= 1");
  if (labeled.negatives.size() < k) return std::nullopt;
  std::vector<std::string> negatives = labeled.negatives;
  std::sort(negatives.begin(), negatives.end());

  std::vector<TrainingInstance> out;
  out.reserve(labeled.positives.size());
  for (std::size_t p = 0; p < labeled.positives.size(); ++p) {
    std::uint64_t h = hash::fnv1a_u64(seed);
    h = hash::fnv1a(labeled.query_id, h);
    h = hash::fnv1a_u64(p, h);
    TrainingInstance inst;
    inst.query_id = labeled.query_id;
    inst.query_text = query_text;
    inst.positive_id = labeled.positives[p];
    inst.positive = render_chunk_text(corpus.at(inst.positive_id));
    for (std::size_t i : sample_without_replacement(negatives.size(), k, hash::mix(h))) {
      inst.negative_ids.push_back(negatives[i]);
      inst.negatives.push_back(render_chunk_text(corpus.at(negatives[i])));
    }
    out.push_back(std::move(inst));
  }
  return out;
}

// ---- statistics -----------------------------------------------------------

DatasetStatistics dataset_statistics(const std::vector<LabeledQuery>& labeled, const CorpusIndex& corpus) {
  DatasetStatistics stats;
  stats.queries = labeled.size();
  double language_total = 0.0;
  for (const auto& q : labeled) {
    stats.positives += q.positives.size();
    std::set<LanguageCode> languages;
    for (const auto& id : q.positives) languages.insert(corpus.at(id).language);
    language_total += static_cast<double>(languages.size());
  }
  if (stats.queries > 0) stats.avg_languages_per_query = language_total / static_cast<double>(stats.queries);
  return stats;
}

// ---- dataset driver -------------------------------------------------------

namespace {

struct QueryOutcome {
  std::optional<LabeledQuery> labeled;
  std::optional<UtilityRecord> utilities;
  std::string drop_reason;
};

QueryOutcome label_one(const Query& query, const ServiceSet& services, const CorpusIndex& corpus,
                       const LauraOptions& opts) {
  QueryOutcome out;
  const RankedList retrieved = services::retrieve(*services.retriever, query.text, opts.retrieval_top_k);
  if (retrieved.empty()) {
    out.drop_reason = "retrieval returned no candidates";
    return out;
  }

  if (opts.mode == Stage::self_training) {
    std::vector<DocumentChunk> pool;
    for (const auto& e : retrieved.entries) pool.push_back(corpus.at(e.chunk_id));
    const RankedList reranked = services::rerank(*services.reranker, query.text, pool);
    out.labeled = self_training_label(query.query_id, reranked.top(opts.self_training_top_k), retrieved);
    return out;
  }

  UtilityEstimator estimator(query, services, opts);
  const BalancedCandidateSet balanced = stage1_select(query, retrieved, services, corpus, estimator, opts);
  UtilityRecord record;
  record.query_id = query.query_id;
  record.pool = retrieved.ids();
  record.stage1_groups = balanced.by_language;
  record.selected_languages = balanced.selected_languages;
  record.d_balanced = balanced.d_balanced;
  if (balanced.d_balanced.empty()) {
    out.utilities = std::move(record);
    out.drop_reason = "generation failed for every language group";
    return out;
  }

  if (opts.mode == Stage::stage1_only) {
    LabeledQuery labeled;
    labeled.query_id = query.query_id;
    labeled.stage = Stage::stage1_only;
    labeled.theta = opts.theta;
    labeled.positives = balanced.d_balanced;
    const std::unordered_set<std::string> pos(balanced.d_balanced.begin(), balanced.d_balanced.end());
    for (const auto& id : record.pool) {
      if (!pos.contains(id)) labeled.negatives.push_back(id);
    }
    record.documents = balanced.document_utilities;
    out.utilities = std::move(record);
    out.labeled = std::move(labeled);
    return out;
  }

  Stage2Result stage2 = stage2_filter(query, balanced.d_balanced, retrieved, corpus, estimator, opts);
  record.documents = stage2.utilities;
  out.utilities = std::move(record);
  if (stage2.labels.positives.empty()) {
    out.drop_reason = "no candidate reached the utility threshold";
    return out;
  }
  out.labeled = std::move(stage2.labels);
  return out;
}

void finish(LauraDataset& dataset, const std::vector<Query>& queries, const CorpusIndex& corpus,
            const LauraOptions& opts) {
  std::sort(dataset.labeled.begin(), dataset.labeled.end(),
            [](const LabeledQuery& a, const LabeledQuery& b) { return a.query_id < b.query_id; });
  std::sort(dataset.utilities.begin(), dataset.utilities.end(),
            [](const UtilityRecord& a, const UtilityRecord& b) { return a.query_id < b.query_id; });
  std::unordered_map<std::string, const Query*> by_id;
  for (const auto& q : queries) by_id.emplace(q.query_id, &q);

  std::vector<LabeledQuery> kept;
  for (auto& labeled : dataset.labeled) {
    const auto it = by_id.find(labeled.query_id);
    const std::string text = it == by_id.end() ? std::string() : it->second->text;
    auto instances = emit_training_instances(labeled, text, opts.k_negatives, opts.seed, corpus);
    if (!instances) {
      dataset.dropped.push_back({labeled.query_id, "only " + std::to_string(labeled.negatives.size()) +
                                                       " negatives, fewer than k=" +
                                                       std::to_string(opts.k_negatives)});
      continue;
    }
    dataset.instances.insert(dataset.instances.end(), instances->begin(), instances->end());
    kept.push_back(std::move(labeled));
  }
  dataset.labeled = std::move(kept);
  std::sort(dataset.dropped.begin(), dataset.dropped.end(),
            [](const DroppedQuery& a, const DroppedQuery& b) { return a.query_id < b.query_id; });
  dataset.statistics = dataset_statistics(dataset.labeled, corpus);
}

}  // namespace

LauraDataset build_laura_dataset(const std::vector<Query>& queries, const ServiceSet& services,
                                 const CorpusIndex& corpus, const LauraOptions& opts, std::size_t parallelism) {
  if (!services.retriever || !services.reranker) throw PreconditionError("retriever and reranker are required");
  if (opts.mode != Stage::self_training && services.generators.empty()) {
    throw PreconditionError("at least one generator is required");
  }
  if (opts.theta < 0.0 || opts.theta > 1.0) throw PreconditionError("theta must lie in [0, 1]");
  if (opts.k_negatives == 0) throw PreconditionError("k_negatives must be >= 1");

  LauraDataset dataset;
  ordered_parallel_for<QueryOutcome>(
      queries.size(), parallelism,
      [&](std::size_t i) {
        try {
          return label_one(queries[i], services, corpus, opts);
        } catch (const Error& e) {
          QueryOutcome failed;
          failed.drop_reason = std::string("failed: ") + e.what();
          return failed;
        }
      },
      [&](std::size_t i, QueryOutcome& out) {
        if (out.utilities) dataset.utilities.push_back(std::move(*out.utilities));
        if (out.labeled) {
          dataset.labeled.push_back(std::move(*out.labeled));
        } else {
          dataset.dropped.push_back({queries[i].query_id, out.drop_reason});
        }
      });
  finish(dataset, queries, corpus, opts);
  return dataset;
}

LauraDataset relabel_from_utilities(const std::vector<UtilityRecord>& utilities, const std::vector<Query>& queries,
                                    const CorpusIndex& corpus, const LauraOptions& opts) {
  LauraDataset dataset;
  for (const auto& record : utilities) {
    dataset.utilities.push_back(record);
    if (record.d_balanced.empty()) {
      dataset.dropped.push_back({record.query_id, "generation failed for every language group"});
      continue;
    }
    LabeledQuery labeled =
        apply_threshold(record.query_id, record.documents, record.pool, opts.theta, opts.inclusive_threshold);
    if (labeled.positives.empty()) {
      dataset.dropped.push_back({record.query_id, "no candidate reached the utility threshold"});
      continue;
    }
    dataset.labeled.push_back(std::move(labeled));
  }
  finish(dataset, queries, corpus, opts);
  return dataset;
}

// ---- JSON -----------------------------------------------------------------

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::stage1_only: return "stage1_only";
    case Stage::full: return "full";
    case Stage::self_training: return "self_training";
  }
  return "full";
}

Stage stage_from_string(const std::string& s) {
  if (s == "full") return Stage::full;
  if (s == "stage1_only" || s == "stage1-only") return Stage::stage1_only;
  if (s == "self_training" || s == "self-training") return Stage::self_training;
  throw ConfigError("unknown stage '" + s + "'");
}

void to_json(json& j, const UtilityScore& u) {
  j = json{{"per_generator", u.per_generator}, {"mean", u.mean}};
  if (!u.chunk_id.empty()) j["chunk_id"] = u.chunk_id;
}

void from_json(const json& j, UtilityScore& u) {
  u.chunk_id = json_fields::optional<std::string>(j, "chunk_id", "");
  u.per_generator = require<std::map<std::string, double>>(j, "per_generator");
  u.mean = require<double>(j, "mean");
}

void to_json(json& j, const LabeledQuery& l) {
  j = json{{"query_id", l.query_id},
           {"positives", l.positives},
           {"negatives", l.negatives},
           {"theta", l.theta},
           {"stage", to_string(l.stage)}};
}

void from_json(const json& j, LabeledQuery& l) {
  l.query_id = require<std::string>(j, "query_id");
  l.positives = require<std::vector<std::string>>(j, "positives");
  l.negatives = require<std::vector<std::string>>(j, "negatives");
  l.theta = require<double>(j, "theta");
  l.stage = stage_from_string(require<std::string>(j, "stage"));
}

void to_json(json& j, const UtilityRecord& u) {
  json groups = json::object();
  for (const auto& [language, g] : u.stage1_groups) {
    groups[language] = json{{"chunk_ids", g.chunk_ids}, {"utility", g.utility}, {"failed", g.failed}};
  }
  j = json{{"query_id", u.query_id},         {"pool", u.pool},
           {"stage1_groups", groups},         {"selected_languages", u.selected_languages},
           {"d_balanced", u.d_balanced},      {"documents", u.documents}};
}

void from_json(const json& j, UtilityRecord& u) {
  u.query_id = require<std::string>(j, "query_id");
  u.pool = require<std::vector<std::string>>(j, "pool");
  u.stage1_groups.clear();
  const json groups = require<json>(j, "stage1_groups");
  for (const auto& [language, g] : groups.items()) {
    GroupUtility group;
    group.chunk_ids = require<std::vector<std::string>>(g, "chunk_ids");
    group.utility = require<UtilityScore>(g, "utility");
    group.failed = json_fields::optional<bool>(g, "failed", false);
    u.stage1_groups.emplace(language, std::move(group));
  }
  u.selected_languages = require<std::set<LanguageCode>>(j, "selected_languages");
  u.d_balanced = require<std::vector<std::string>>(j, "d_balanced");
  u.documents = require<std::vector<UtilityScore>>(j, "documents");
}

void to_json(json& j, const TrainingInstance& t) {
  j = json{{"query_id", t.query_id}, {"query", t.query_text},         {"pos", t.positive},
           {"neg", t.negatives},     {"pos_id", t.positive_id},        {"neg_ids", t.negative_ids}};
}

void from_json(const json& j, TrainingInstance& t) {
  t.query_id = json_fields::optional<std::string>(j, "query_id", "");
  t.query_text = require<std::string>(j, "query");
  // external frameworks commonly store pos as a one-element list
  const json& pos = require<json>(j, "pos");
  if (pos.is_array()) {
    if (pos.size() != 1) throw ConfigError("field 'pos' must hold exactly one document");
    t.positive = pos[0].get<std::string>();
  } else {
    t.positive = require<std::string>(j, "pos");
  }
  t.negatives = require<std::vector<std::string>>(j, "neg");
  t.positive_id = json_fields::optional<std::string>(j, "pos_id", "");
  t.negative_ids = json_fields::optional<std::vector<std::string>>(j, "neg_ids", {});
}

void to_json(json& j, const DatasetStatistics& s) {
  j = json{{"queries", s.queries},
           {"positives", s.positives},
           {"avg_languages_per_query", s.avg_languages_per_query}};
}

}  // namespace mrag::laura
