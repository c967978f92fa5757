#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "mrag/error.hpp"
#include "mrag/special_functions.hpp"
#include "mrag/stats.hpp"
#include "json.hpp"

using namespace mrag;
using nlohmann::json;

namespace {

const json& reference() {
  static const json j = [] {
    std::ifstream in(testing::fixture("stats_reference.json"));
    return json::parse(in);
  }();
  return j;
}

std::vector<std::vector<double>> groups_of(const json& j) { return j.get<std::vector<std::vector<double>>>(); }

}  // namespace

TEST_CASE("special functions") {
  CHECK(special::log_gamma(1.0) == doctest::Approx(0.0));
  CHECK(special::log_gamma(5.0) == doctest::Approx(std::log(24.0)));
  CHECK(special::regularized_gamma_q(0.5, 3.0 / 14.0) == doctest::Approx(std::erfc(std::sqrt(3.0 / 14.0))));
  CHECK(special::chi_square_sf(3.0 / 7.0, 1) == doctest::Approx(0.5127).epsilon(1e-4));
  CHECK_THROWS_AS(special::log_gamma(-1.0), PreconditionError);
  CHECK_THROWS_AS(special::regularized_incomplete_beta(1.0, 1.0, 1.5), PreconditionError);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.05, 8.0), ux(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double a = u(rng), b = u(rng), x = ux(rng);
    CHECK(std::abs(special::regularized_incomplete_beta(a, b, x) -
                   (1.0 - special::regularized_incomplete_beta(b, a, 1.0 - x))) < 1e-12);
  }
}

TEST_CASE("special functions match the reference package") {
  for (const auto& c : reference()["log_gamma"]) {
    CHECK(std::abs(special::log_gamma(c["x"]) - c["v"].get<double>()) < 1e-12 * std::max(1.0, std::abs(c["v"].get<double>())));
  }
  for (const auto& c : reference()["gamma_q"]) {
    CHECK(std::abs(special::regularized_gamma_q(c["s"], c["x"]) - c["q"].get<double>()) < 1e-12);
  }
  for (const auto& c : reference()["incomplete_beta"]) {
    CHECK(std::abs(special::regularized_incomplete_beta(c["a"], c["b"], c["x"]) - c["i"].get<double>()) < 1e-12);
  }
  for (const auto& c : reference()["chi_square_sf"]) {
    CHECK(std::abs(special::chi_square_sf(c["x"], c["df"]) - c["p"].get<double>()) < 1e-12);
  }
  for (const auto& c : reference()["student_t"]) {
    CHECK(std::abs(special::student_t_two_tailed(c["t"], c["df"]) - c["p"].get<double>()) < 1e-12);
  }
}

TEST_CASE("Kruskal-Wallis worked example") {
  const auto r = stats::kruskal_wallis({{1, 3, 5}, {2, 4, 6}});
  REQUIRE(r);
  CHECK(r->h == doctest::Approx(3.0 / 7.0).epsilon(1e-12));
  CHECK(r->df == 1);
  CHECK(r->p == doctest::Approx(0.5127).epsilon(1e-4));
  CHECK(std::abs(r->p - reference()["kruskal_wallis_small"]["p"].get<double>()) < 1e-9);
}

TEST_CASE("Kruskal-Wallis edge cases") {
  const auto same = stats::kruskal_wallis({{2, 2, 2}, {2, 2, 2}});
  REQUIRE(same);
  CHECK(same->p == 1.0);
  CHECK(same->h == 0.0);
  CHECK_FALSE(stats::kruskal_wallis({{1, 2, 3}}).has_value());
  CHECK_FALSE(stats::kruskal_wallis({{1}, {2}}).has_value());
  CHECK_FALSE(stats::kruskal_wallis({{1, 2, 3}, {}}).has_value());
  const auto sep = stats::kruskal_wallis(groups_of(reference()["kruskal_wallis_separated"]["groups"]));
  REQUIRE(sep);
  CHECK(sep->p < 0.01);
}

TEST_CASE("Kruskal-Wallis matches the reference package") {
  for (const auto& c : reference()["kruskal_wallis"]) {
    const auto r = stats::kruskal_wallis(groups_of(c["groups"]));
    REQUIRE(r);
    CHECK(std::abs(r->h - c["h"].get<double>()) < 1e-9);
    CHECK(std::abs(r->p - c["p"].get<double>()) <= 1e-6);
  }
}

TEST_CASE("mid-ranks average ties") {
  const auto r = stats::mid_ranks({10, 20, 10, 30});
  CHECK(r == std::vector<double>{1.5, 3, 1.5, 4});
}

TEST_CASE("PEER conventions") {
  std::vector<stats::RankGroups> single = {{"q1", {{"en", {1, 2, 3}}}}, {"q2", {{"de", {4}}}}};
  CHECK_FALSE(stats::peer(single).has_value());

  std::vector<stats::RankGroups> tied = {{"q1", {{"en", {3, 3}}, {"de", {3, 3}}}},
                                         {"q2", {{"zh", {1, 1, 1}}, {"fr", {1}}, {"ko", {1}}}}};
  const auto t = stats::peer(tied);
  REQUIRE(t);
  CHECK(t->mean_p == 1.0);

  auto mixed = tied;
  mixed.push_back({"q3", {{"en", {5, 6}}}});
  const auto m = stats::peer(mixed);
  REQUIRE(m);
  CHECK(m->evaluable == 2);
  CHECK(m->skipped == 1);
  CHECK(m->mean_p == 1.0);
}

TEST_CASE("PEER matches the reference package on five synthetic queries") {
  const auto& fx = reference()["peer"];
  std::vector<stats::RankGroups> records;
  int i = 0;
  for (const auto& q : fx["queries"]) {
    stats::RankGroups g{"q" + std::to_string(i++), {}};
    for (const auto& [lang, ranks] : q.items()) g.groups[lang] = ranks.get<std::vector<int>>();
    records.push_back(g);
  }
  const auto r = stats::peer(records);
  REQUIRE(r);
  CHECK(r->evaluable == 5);
  for (std::size_t k = 0; k < 5; ++k) CHECK(std::abs(r->per_query[k] - fx["p_values"][k].get<double>()) < 1e-9);
  CHECK(std::abs(r->mean_p - fx["mean_p"].get<double>()) < 1e-9);
}

TEST_CASE("paired t-test conventions") {
  const auto same = stats::paired_t_test({{}, {0.1, 0.5, 0.9}, {0.1, 0.5, 0.9}});
  CHECK(same.p == 1.0);
  CHECK(same.t == 0.0);
  CHECK_FALSE(same.degenerate);

  const auto shift = stats::paired_t_test({{}, {0.2, 0.6, 1.0}, {0.1, 0.5, 0.9}});
  CHECK(shift.degenerate);
  CHECK(shift.p == 0.0);
  CHECK(std::isinf(shift.t));
  CHECK(shift.t > 0);

  CHECK_THROWS_AS(stats::paired_t_test({{}, {1.0}, {2.0}}), PreconditionError);
  CHECK_THROWS_AS(stats::paired_t_test({{}, {1.0, 2.0}, {2.0}}), PreconditionError);
}

TEST_CASE("paired t-test matches the reference package") {
  const auto& fx = reference()["paired_t_30"];
  const auto r = stats::paired_t_test({{}, fx["a"], fx["b"]});
  CHECK(r.df == 29);
  CHECK(std::abs(r.t - fx["t"].get<double>()) < 1e-9);
  CHECK(std::abs(r.p - fx["p"].get<double>()) < 1e-9);
  for (const auto& c : reference()["paired_t"]) {
    const auto q = stats::paired_t_test({{}, c["a"], c["b"]});
    CHECK(std::abs(q.t - c["t"].get<double>()) < 1e-9 * std::max(1.0, std::abs(q.t)));
    CHECK(std::abs(q.p - c["p"].get<double>()) <= 1e-6);
  }
}

TEST_CASE("Pearson correlation") {
  std::vector<double> x = {1, 2, 3, 4, 5}, y, neg;
  for (double v : x) {
    y.push_back(2 * v + 1);
    neg.push_back(-v);
  }
  CHECK(stats::pearson(x, y)->r == doctest::Approx(1.0));
  CHECK(stats::pearson(x, neg)->r == doctest::Approx(-1.0));
  CHECK_FALSE(stats::pearson(x, {3, 3, 3, 3, 3}).has_value());
  CHECK_THROWS_AS(stats::pearson({1, 2}, {1, 2}), PreconditionError);

  const auto& fx = reference()["pearson_50"];
  const auto r = stats::pearson(fx["x"], fx["y"]);
  REQUIRE(r);
  CHECK(std::abs(r->r - fx["r"].get<double>()) < 1e-9);
  CHECK(std::abs(r->p - fx["p"].get<double>()) < 1e-9);
  for (const auto& c : reference()["pearson"]) {
    const auto q = stats::pearson(c["x"], c["y"]);
    REQUIRE(q);
    CHECK(std::abs(q->r - c["r"].get<double>()) < 1e-9);
    CHECK(std::abs(q->p - c["p"].get<double>()) <= 1e-6);
  }
}
