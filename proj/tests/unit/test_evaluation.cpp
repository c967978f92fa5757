#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "mrag/evaluation.hpp"
#include "mrag/pipeline.hpp"
#include "mrag/tsv.hpp"

using namespace mrag;
using namespace mrag::evaluation;

namespace {

tsv::Table scores(const std::vector<std::tuple<std::string, std::string, double>>& rows) {
  tsv::Table t;
  t.header = {"query_id", "language", "score"};
  for (const auto& [id, lang, v] : rows) t.rows.push_back({id, lang, tsv::fixed(v)});
  return t;
}

std::string cell(const tsv::Table& t, const std::string& row_key, const std::string& column) {
  for (const auto& row : t.rows) {
    if (row[0] == row_key) return row[t.column(column)];
  }
  return "<missing>";
}

}  // namespace

TEST_CASE("TSV round trip and formatting") {
  testing::TempDir dir("tsv");
  tsv::Table t;
  t.header = {"a", "b"};
  t.rows = {{"1", "x"}, {"2", "y"}};
  tsv::write(dir.file("t.tsv"), t);
  const auto back = tsv::read(dir.file("t.tsv"));
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  CHECK(tsv::fixed(0.5, 3) == "0.500");
  CHECK(tsv::fixed(std::nan("")) == "NA");
  CHECK_THROWS(back.column("c"));
}

TEST_CASE("significance on identical inputs gives p = 1") {
  const auto t = scores({{"q1", "en", 0.5}, {"q2", "en", 0.7}, {"q3", "de", 0.2}, {"q4", "de", 0.9}});
  const auto sig = significance_table(t, t);
  REQUIRE(sig.rows.size() == 3);
  for (const auto& row : sig.rows) {
    CHECK(std::stod(row[sig.column("p")]) == 1.0);
    CHECK(row[sig.column("sig")].empty());
  }
}

TEST_CASE("significance reports the relative change of the means") {
  // Portuguese row arithmetic: 63.1 -> 65.9 is +4.44%
  const auto base = scores({{"q1", "pt", 0.621}, {"q2", "pt", 0.641}});
  const auto treat = scores({{"q1", "pt", 0.649}, {"q2", "pt", 0.669}});
  const auto sig = significance_table(base, treat);
  const double delta = std::stod(cell(sig, "pt", "delta_pct"));
  CHECK(std::abs(delta - (65.9 - 63.1) / 63.1 * 100.0) < 1e-4);
  CHECK(std::abs(delta - 4.4) < 0.05);
  CHECK(cell(sig, "pt", "degenerate") == "1");
  CHECK(cell(sig, "pt", "t") == "inf");
  CHECK(cell(sig, "pt", "sig") == "***");
}

TEST_CASE("significance stars") {
  CHECK(significance_stars(0.2).empty());
  CHECK(significance_stars(0.04) == "*");
  CHECK(significance_stars(0.009) == "**");
  CHECK(significance_stars(0.0009) == "***");
}

TEST_CASE("vanilla evaluation tables") {
  const CorpusIndex corpus({testing::chunk("a", "en", "x"), testing::chunk("b", "de", "x"), testing::chunk("c", "en", "x"),
                            testing::chunk("d", "de", "x")});
  std::vector<VanillaRunRecord> records(2);
  for (int i = 0; i < 2; ++i) {
    auto& r = records[i];
    r.query_id = "q" + std::to_string(i);
    r.query_language = "en";
    r.reranked.entries = {{"a#0", 0.9}, {"b#0", 0.8}, {"c#0", 0.7}};
    r.rerank_pool.entries = {{"a#0", 0.9}, {"b#0", 0.8}, {"c#0", 0.7}, {"d#0", 0.1}};
    r.retrieved = r.rerank_pool;
    r.mean_top5_score = 0.8 - 0.1 * i;
    r.answers["g"] = {"g", "ans", i == 0 ? 1.0 : 0.5};
  }
  JudgmentMap judgments;
  judgments["q0"] = {"q0", {"a#0", "b#0"}};
  const auto tables = evaluate_vanilla(records, judgments, &corpus, {3});
  CHECK(cell(tables.per_query, "q0", "score") == "1.000000");
  CHECK(std::stod(cell(tables.per_query, "q0", "precision@3")) == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
  CHECK(cell(tables.per_query, "q1", "ndcg@3") == "NA");
  CHECK(std::stod(cell(tables.per_language, "en", "score")) == doctest::Approx(0.75));
  CHECK(std::stod(cell(tables.per_language, "en", "judged_queries")) == 1);
  REQUIRE(tables.correlation.rows.size() >= 1);
}

TEST_CASE("oracle evaluation tables") {
  OracleRunRecord r;
  r.query_id = "q";
  r.query_language = "de";
  r.best_score = 0.9;
  r.best_languages = {"de", "en"};
  r.per_language["de"].score = 0.9;
  r.per_language["en"].score = 0.9;
  const auto tables = evaluate_oracle({r});
  CHECK(cell(tables.per_query, "q", "best_languages") == "de,en");
  CHECK(cell(tables.per_language, "de", "score") == "0.900000");
}
