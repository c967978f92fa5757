#include <cmath>
#include <random>

#include "doctest.h"
#include "mrag/error.hpp"
#include "mrag/metrics.hpp"
#include "mrag/unicode.hpp"

using namespace mrag;
using namespace mrag::metrics;

namespace {

RankedList ranked(std::vector<std::string> ids) {
  RankedList r;
  double s = 1.0;
  for (auto& id : ids) r.entries.push_back({std::move(id), s -= 0.01});
  return r;
}

RelevanceJudgments judged(std::set<std::string> ids) { return {"q", std::move(ids)}; }

}  // namespace

TEST_CASE("character 3-gram recall examples") {
  CHECK(char_3gram_recall("banana", "banana") == doctest::Approx(1.0));
  CHECK(char_3gram_recall("ana", "banana") == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(char_3gram_recall("xyzw", "banana") == 0.0);
  const auto ref = char_ngrams("banana");
  CHECK(ref.at("ban") == 1);
  CHECK(ref.at("ana") == 2);
  CHECK(ref.at("nan") == 1);
  CHECK(total_count(ref) == 4);
}

TEST_CASE("short references score 0") {
  CHECK(char_3gram_recall("ab", "ab") == 0.0);
  CHECK(char_3gram_recall("abc", "") == 0.0);
  CHECK(char_3gram_recall("", "abc") == 0.0);
}

TEST_CASE("3-grams are over scalar values, not bytes") {
  CHECK(char_3gram_recall("Maïwenn", "Maïwenn") == doctest::Approx(1.0));
  CHECK(total_count(char_ngrams("東京都庁")) == 2);
  CHECK(char_3gram_recall("東京都", "東京都庁") == doctest::Approx(0.5));
}

TEST_CASE("casefolding is opt-in") {
  CHECK(char_3gram_recall("PARIS", "paris") == 0.0);
  CHECK(char_3gram_recall("PARIS", "paris", {true}) == doctest::Approx(1.0));
}

TEST_CASE("best recall over references") {
  CHECK(best_char_3gram_recall("banana", {"xyz", "banana split"}) ==
        doctest::Approx(char_3gram_recall("banana", "banana split")));
  CHECK(best_char_3gram_recall("banana", {}) == 0.0);
}

TEST_CASE("precision at k") {
  CHECK(precision_at_k(ranked({"a", "b", "c", "d", "e"}), judged({"a", "b", "c", "d", "e"}), 5) == 1.0);
  CHECK(precision_at_k(ranked({"a", "b", "c", "d", "e"}), judged({"a", "c"}), 5) == doctest::Approx(0.4));
  CHECK(precision_at_k(ranked({"a", "b", "c"}), judged({"a", "b"}), 5) == doctest::Approx(0.4));
  CHECK_THROWS_AS(precision_at_k(ranked({"a"}), judged({"a"}), 0), PreconditionError);
}

TEST_CASE("NDCG at k") {
  const double expected = (1 / std::log2(3.0) + 1 / std::log2(4.0)) / (1 / std::log2(2.0) + 1 / std::log2(3.0));
  const auto v = ndcg_at_k(ranked({"x", "a", "b"}), judged({"a", "b"}), 3);
  REQUIRE(v);
  CHECK(*v == doctest::Approx(expected).epsilon(1e-12));
  CHECK(*v == doctest::Approx(0.69343).epsilon(1e-4));
  CHECK(*ndcg_at_k(ranked({"a", "b", "x"}), judged({"a", "b"}), 3) == doctest::Approx(1.0));
  CHECK(*ndcg_at_k(ranked({"x", "y", "z"}), judged({"a"}), 3) == 0.0);
  CHECK_FALSE(ndcg_at_k(ranked({"x"}), judged({}), 3).has_value());
}

#include "../oracles/brute_force.hpp"

TEST_CASE("metrics agree with the brute-force oracle on random cases") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const auto gen = oracle::random_scalars(rng, 40);
    const auto ref = oracle::random_scalars(rng, 40);
    CHECK(std::abs(char_3gram_recall(oracle::utf8(gen), oracle::utf8(ref)) - oracle::gram_recall(gen, ref)) < 1e-12);

    std::vector<std::string> ids;
    for (int i = 0; i < 12; ++i) ids.push_back("c" + std::to_string(i));
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(rng() % 9);
    std::set<std::string> rel;
    for (int i = 0; i < 12; ++i) {
      if (rng() % 3 == 0) rel.insert("c" + std::to_string(i));
    }
    const std::size_t k = 1 + rng() % 10;
    const auto list = ranked(ids);
    CHECK(std::abs(precision_at_k(list, judged(rel), k) - oracle::precision(ids, rel, k)) < 1e-12);
    const auto n = ndcg_at_k(list, judged(rel), k);
    CHECK(n.has_value() == !rel.empty());
    if (n) CHECK(std::abs(*n - oracle::ndcg(ids, rel, k)) < 1e-12);
  }
}
