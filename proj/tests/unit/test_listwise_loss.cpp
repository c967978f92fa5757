#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "mrag/error.hpp"
#include "mrag/laura_data.hpp"
#include "mrag/listwise_loss.hpp"

using namespace mrag::listwise;

namespace {

double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(std::max(na, nb)), 1e-300);
}

}  // namespace

TEST_CASE("uniform scores give ln n") {
  CHECK(loss({std::vector<double>(8, 0.0), 0}) == doctest::Approx(std::log(8.0)).epsilon(1e-12));
  CHECK(std::abs(loss({std::vector<double>(8, 0.0), 0}) - 2.0794415416798357) < 1e-12);
  CHECK(std::abs(loss({std::vector<double>(2, 0.0), 1}) - 0.6931471805599453) < 1e-12);
}

TEST_CASE("dominant positive") {
  // ln(1 + 2e^-10) evaluated at 50 digits with mpmath
  CHECK(std::abs(loss({{10.0, 0.0, 0.0}, 0}) - 9.0795737467244446e-5) < 1e-15);
  CHECK(std::abs(loss({{10.0, 0.0, 0.0}, 0}) - 9.0800e-5) < 5e-9);
}

TEST_CASE("stable for large scores") {
  const double l = loss({{1000.0, 999.0, -1000.0}, 1});
  CHECK(std::isfinite(l));
  CHECK(l == doctest::Approx(1.0 + std::log1p(std::exp(-1.0))));
}

TEST_CASE("precondition errors") {
  CHECK_THROWS_AS(loss({{}, 0}), mrag::PreconditionError);
  CHECK_THROWS_AS(loss({{1.0}, 1}), mrag::PreconditionError);
  CHECK_THROWS_AS(gradient({{1.0, 2.0}, 5}), mrag::PreconditionError);
}

TEST_CASE("gradient of uniform scores") {
  const auto g = gradient({std::vector<double>(4, 3.0), 2});
  CHECK(g[2] == doctest::Approx(0.25 - 1.0));
  CHECK(g[0] == doctest::Approx(0.25));
}

TEST_CASE("gradient sums to zero and matches finite differences") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    ScoredList list;
    list.scores.resize(2 + rng() % 15);
    for (auto& s : list.scores) s = normal(rng);
    list.positive_index = rng() % list.scores.size();
    const auto g = gradient(list);
    CHECK(std::abs(std::accumulate(g.begin(), g.end(), 0.0)) < 1e-12);
    CHECK(relative_error(g, finite_difference_gradient(list, 1e-5)) < 1e-6);
  }
}

TEST_CASE("loss is invariant to shifting every score") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 100; ++trial) {
    ScoredList list;
    list.scores.resize(2 + rng() % 8);
    for (auto& s : list.scores) s = u(rng);
    list.positive_index = rng() % list.scores.size();
    ScoredList shifted = list;
    const double c = u(rng) * 10;
    for (auto& s : shifted.scores) s += c;
    CHECK(std::abs(loss(list) - loss(shifted)) < 1e-12);
  }
}

namespace {

// Positives share many 3-grams with the query, negatives share none, so the
// all-positive weight vector separates every instance.
std::vector<FeaturizedInstance> separable_instances() {
  std::vector<FeaturizedInstance> out;
  const std::vector<std::string> topics = {"volcano", "glacier", "harbour", "orchard", "lantern",
                                           "meteor",  "citadel", "tundra",  "saffron", "quartz"};
  for (std::size_t i = 0; i < topics.size(); ++i) {
    mrag::laura::TrainingInstance inst;
    inst.query_id = "q" + std::to_string(i);
    inst.query_text = "what is the " + topics[i];
    inst.positive = "the " + topics[i] + " is described here";
    inst.negatives = {"zzzz yyyy", "1234 5678 90", "kkkk qqqq"};
    out.push_back(featurize(inst));
  }
  return out;
}

}  // namespace

TEST_CASE("toy features count shared 3-grams") {
  const auto f = toy_features("banana", "banana");
  CHECK(f.size() == kToyFeatureDim);
  CHECK(std::accumulate(f.begin(), f.end(), 0.0) == doctest::Approx(4.0));
  const auto none = toy_features("abc", "xyz");
  CHECK(std::accumulate(none.begin(), none.end(), 0.0) == 0.0);
}

TEST_CASE("toy trainer separates a separable fixture") {
  const auto data = separable_instances();
  const auto result = train_toy_scorer(data, {50, 0.1, 5, 0.01});
  REQUIRE(result.loss_curve.size() == 51);
  CHECK(result.loss_curve.back() < result.loss_curve.front());
  CHECK(result.positive_first_rate >= 0.95);
}

TEST_CASE("zero learning rate leaves the loss flat") {
  const auto data = separable_instances();
  const auto result = train_toy_scorer(data, {10, 0.0, 5, 0.01});
  for (double l : result.loss_curve) CHECK(l == result.loss_curve.front());
}

TEST_CASE("duplicating the dataset does not change the loss curve") {
  const auto data = separable_instances();
  auto doubled = data;
  doubled.insert(doubled.end(), data.begin(), data.end());
  const auto a = train_toy_scorer(data, {15, 0.2, 9, 0.01});
  const auto b = train_toy_scorer(doubled, {15, 0.2, 9, 0.01});
  REQUIRE(a.loss_curve.size() == b.loss_curve.size());
  for (std::size_t i = 0; i < a.loss_curve.size(); ++i) CHECK(a.loss_curve[i] == doctest::Approx(b.loss_curve[i]).epsilon(1e-12));
}

TEST_CASE("weight gradient of the mean loss matches finite differences") {
  const auto data = separable_instances();
  ToyScorer scorer{std::vector<double>(kToyFeatureDim, 0.0)};
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (auto& w : scorer.weights) w = u(rng);
  std::vector<double> grad;
  mean_loss(scorer, data, &grad);
  std::vector<double> fd(kToyFeatureDim);
  for (std::size_t i = 0; i < kToyFeatureDim; ++i) {
    ToyScorer plus = scorer, minus = scorer;
    plus.weights[i] += 1e-5;
    minus.weights[i] -= 1e-5;
    fd[i] = (mean_loss(plus, data) - mean_loss(minus, data)) / 2e-5;
  }
  CHECK(relative_error(grad, fd) < 1e-6);
}
