#include "mrag/evaluation.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "mrag/error.hpp"
#include "mrag/json_fields.hpp"
#include "mrag/jsonl.hpp"
#include "mrag/log.hpp"
#include "mrag/stats.hpp"

namespace mrag::evaluation {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Accumulator {
  double sum = 0.0;
  std::size_t n = 0;
  void add(double v) {
    if (std::isnan(v)) return;
    sum += v;
    ++n;
  }
  double mean() const { return n == 0 ? kNaN : sum / static_cast<double>(n); }
};

std::vector<std::string> generator_ids(const std::vector<VanillaRunRecord>& records) {
  std::set<std::string> ids;
  for (const auto& r : records) {
    for (const auto& [id, g] : r.answers) ids.insert(id);
  }
  return {ids.begin(), ids.end()};
}

double mean_answer_score(const std::map<std::string, GenerationRecord>& answers) {
  if (answers.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [id, g] : answers) total += g.score;
  return total / static_cast<double>(answers.size());
}

std::string join(const std::set<std::string>& items, char sep) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += sep;
    out += s;
  }
  return out;
}

}  // namespace

JudgmentMap load_judgments(const std::string& path) {
  JudgmentMap out;
  jsonl::for_each(path, [&](const nlohmann::json& j) {
    metrics::RelevanceJudgments r;
    r.query_id = json_fields::require<std::string>(j, "query_id");
    const auto ids = json_fields::require<std::vector<std::string>>(j, "relevant_chunk_ids");
    r.relevant_chunk_ids.insert(ids.begin(), ids.end());
    out[r.query_id] = std::move(r);
  });
  return out;
}

EvalTables evaluate_vanilla(const std::vector<VanillaRunRecord>& records, const JudgmentMap& judgments,
                            const CorpusIndex* corpus, const EvalOptions& opts) {
  const auto generators = generator_ids(records);
  const std::string p_col = "precision@" + std::to_string(opts.k);
  const std::string n_col = "ndcg@" + std::to_string(opts.k);

  EvalTables out;
  out.per_query.header = {"query_id", "language", "score"};
  for (const auto& g : generators) out.per_query.header.push_back("score:" + g);
  out.per_query.header.insert(out.per_query.header.end(), {"mean_top5_score", p_col, n_col});

  struct LanguageAgg {
    Accumulator score, top5, precision, ndcg;
    std::map<std::string, Accumulator> per_generator;
    std::vector<stats::RankGroups> peer;
    std::size_t queries = 0;
  };
  std::map<std::string, LanguageAgg> by_language;
  LanguageAgg overall;

  std::vector<double> corr_x;
  std::map<std::string, std::vector<double>> corr_y;
  std::vector<double> corr_mean_y;

  for (const auto& r : records) {
    std::vector<std::string> row = {r.query_id, r.query_language};
    const double score = mean_answer_score(r.answers);
    row.push_back(tsv::fixed(score));
    for (const auto& g : generators) {
      const auto it = r.answers.find(g);
      row.push_back(it == r.answers.end() ? "NA" : tsv::fixed(it->second.score));
    }
    row.push_back(tsv::fixed(r.mean_top5_score));

    double precision = kNaN;
    double ndcg = kNaN;
    std::optional<stats::RankGroups> peer_groups;
    if (const auto j = judgments.find(r.query_id); j != judgments.end()) {
      precision = metrics::precision_at_k(r.reranked, j->second, opts.k);
      if (const auto n = metrics::ndcg_at_k(r.reranked, j->second, opts.k)) {
        ndcg = *n;
      } else {
        log::warn("query '" + r.query_id + "' has no relevant documents; NDCG skipped");
      }
      if (corpus != nullptr) {
        stats::RankGroups groups;
        groups.query_id = r.query_id;
        for (std::size_t i = 0; i < r.rerank_pool.entries.size(); ++i) {
          const auto& id = r.rerank_pool.entries[i].chunk_id;
          if (j->second.relevant_chunk_ids.contains(id)) {
            groups.groups[corpus->at(id).language].push_back(static_cast<int>(i) + 1);
          }
        }
        peer_groups = std::move(groups);
      }
    }
    row.push_back(tsv::fixed(precision));
    row.push_back(tsv::fixed(ndcg));
    out.per_query.rows.push_back(std::move(row));

    for (LanguageAgg* agg : {&by_language[r.query_language], &overall}) {
      ++agg->queries;
      agg->score.add(score);
      agg->top5.add(r.mean_top5_score);
      agg->precision.add(precision);
      agg->ndcg.add(ndcg);
      for (const auto& g : generators) {
        const auto it = r.answers.find(g);
        if (it != r.answers.end()) agg->per_generator[g].add(it->second.score);
      }
      if (peer_groups) agg->peer.push_back(*peer_groups);
    }

    if (!r.empty_retrieval) {
      corr_x.push_back(r.mean_top5_score);
      corr_mean_y.push_back(score);
      for (const auto& g : generators) {
        const auto it = r.answers.find(g);
        corr_y[g].push_back(it == r.answers.end() ? kNaN : it->second.score);
      }
    }
  }

  out.per_language.header = {"language", "queries", "score"};
  for (const auto& g : generators) out.per_language.header.push_back("score:" + g);
  out.per_language.header.insert(out.per_language.header.end(),
                                 {"mean_top5_score", p_col, n_col, "judged_queries", "peer", "peer_queries"});
  auto language_row = [&](const std::string& name, const LanguageAgg& agg) {
    std::vector<std::string> row = {name, std::to_string(agg.queries), tsv::fixed(agg.score.mean())};
    for (const auto& g : generators) {
      const auto it = agg.per_generator.find(g);
      row.push_back(tsv::fixed(it == agg.per_generator.end() ? kNaN : it->second.mean()));
    }
    row.push_back(tsv::fixed(agg.top5.mean()));
    row.push_back(tsv::fixed(agg.precision.mean()));
    row.push_back(tsv::fixed(agg.ndcg.mean()));
    row.push_back(std::to_string(agg.precision.n));
    const auto peer = stats::peer(agg.peer);
    row.push_back(peer ? tsv::fixed(peer->mean_p) : "NA");
    row.push_back(std::to_string(peer ? peer->evaluable : 0));
    out.per_language.rows.push_back(std::move(row));
  };
  for (const auto& [language, agg] : by_language) language_row(language, agg);
  language_row("overall", overall);

  out.correlation.header = {"generator", "n", "pearson_r", "p"};
  auto corr_row = [&](const std::string& name, const std::vector<double>& y) {
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (std::isnan(y[i])) continue;
      xs.push_back(corr_x[i]);
      ys.push_back(y[i]);
    }
    std::optional<stats::PearsonResult> r;
    if (xs.size() >= 3) r = stats::pearson(xs, ys);
    out.correlation.rows.push_back({name, std::to_string(xs.size()), r ? tsv::fixed(r->r) : "NA",
                                    r ? tsv::sci(r->p) : "NA"});
  };
  for (const auto& g : generators) corr_row(g, corr_y[g]);
  corr_row("mean", corr_mean_y);
  return out;
}

EvalTables evaluate_oracle(const std::vector<OracleRunRecord>& records) {
  EvalTables out;
  out.per_query.header = {"query_id", "language", "score", "best_languages", "groups"};
  std::map<std::string, Accumulator> by_language;
  Accumulator overall;
  for (const auto& r : records) {
    out.per_query.rows.push_back({r.query_id, r.query_language, tsv::fixed(r.best_score),
                                  r.best_languages.empty() ? "-" : join(r.best_languages, ','),
                                  std::to_string(r.per_language.size())});
    by_language[r.query_language].add(r.best_score);
    overall.add(r.best_score);
  }
  out.per_language.header = {"language", "queries", "score"};
  for (const auto& [language, acc] : by_language) {
    out.per_language.rows.push_back({language, std::to_string(acc.n), tsv::fixed(acc.mean())});
  }
  out.per_language.rows.push_back({"overall", std::to_string(overall.n), tsv::fixed(overall.mean())});
  out.correlation.header = {"generator", "n", "pearson_r", "p"};
  return out;
}

std::string significance_stars(double p) {
  if (std::isnan(p)) return "";
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

tsv::Table significance_table(const tsv::Table& baseline, const tsv::Table& treatment,
                              const SignificanceOptions& opts) {
  const std::size_t b_id = baseline.column("query_id");
  const std::size_t b_lang = baseline.column("language");
  const std::size_t b_val = baseline.column(opts.metric);
  const std::size_t t_id = treatment.column("query_id");
  const std::size_t t_val = treatment.column(opts.metric);

  std::unordered_map<std::string, double> treated;
  for (const auto& row : treatment.rows) {
    if (row[t_val] == "NA") continue;
    treated[row[t_id]] = std::stod(row[t_val]);
  }

  std::map<std::string, stats::PairedSample> by_language;
  stats::PairedSample overall;
  std::size_t unmatched = 0;
  for (const auto& row : baseline.rows) {
    if (row[b_val] == "NA") continue;
    const auto it = treated.find(row[b_id]);
    if (it == treated.end()) {
      ++unmatched;
      continue;
    }
    const double base = std::stod(row[b_val]);
    for (stats::PairedSample* s : {&by_language[row[b_lang]], &overall}) {
      s->labels.push_back(row[b_id]);
      s->a.push_back(it->second);  // treatment − baseline
      s->b.push_back(base);
    }
  }
  if (unmatched > 0) log::warn(std::to_string(unmatched) + " baseline queries have no treatment counterpart");

  tsv::Table out;
  out.header = {"language", "n", "baseline", "treatment", "delta_pct", "t", "p", "sig", "degenerate"};
  auto emit = [&](const std::string& name, const stats::PairedSample& s) {
    const double base_mean = stats::mean(s.b);
    const double treat_mean = stats::mean(s.a);
    const double delta = base_mean == 0.0 ? kNaN : (treat_mean - base_mean) / base_mean * 100.0;
    if (s.a.size() < 2) {
      out.rows.push_back({name, std::to_string(s.a.size()), tsv::fixed(base_mean), tsv::fixed(treat_mean),
                          tsv::fixed(delta, 4), "NA", "NA", "", "0"});
      return;
    }
    const auto r = stats::paired_t_test(s);
    out.rows.push_back({name, std::to_string(s.a.size()), tsv::fixed(base_mean), tsv::fixed(treat_mean),
                        tsv::fixed(delta, 4), std::isinf(r.t) ? (r.t > 0 ? "inf" : "-inf") : tsv::fixed(r.t),
                        tsv::sci(r.p, 3), significance_stars(r.p), r.degenerate ? "1" : "0"});
  };
  for (const auto& [language, s] : by_language) emit(language, s);
  emit("overall", overall);
  return out;
}

tsv::Table matrix_table(const distributions::DistributionMatrix& m) {
  tsv::Table t;
  t.header = {"doc_language"};
  t.header.insert(t.header.end(), m.query_languages.begin(), m.query_languages.end());
  for (std::size_t row = 0; row < m.doc_languages.size(); ++row) {
    std::vector<std::string> cells = {m.doc_languages[row]};
    for (double v : m.values[row]) cells.push_back(tsv::fixed(v, 9));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

tsv::Table divergence_table(const distributions::DistributionReport& report) {
  tsv::Table t;
  t.header = {"query_language", "js", "kl", "entropy"};
  for (const auto& row : report.per_query_language) {
    t.rows.push_back({row.query_language, tsv::fixed(row.js, 9), tsv::fixed(row.kl, 9), tsv::fixed(row.entropy, 9)});
  }
  const bool any = !report.per_query_language.empty();
  t.rows.push_back({"mean", any ? tsv::fixed(report.means.js, 9) : "NA", any ? tsv::fixed(report.means.kl, 9) : "NA",
                    any ? tsv::fixed(report.means.entropy, 9) : "NA"});
  return t;
}

}  // namespace mrag::evaluation
