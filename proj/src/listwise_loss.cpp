#include "mrag/listwise_loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "mrag/error.hpp"
#include "mrag/hash.hpp"
#include "mrag/metrics.hpp"

namespace mrag::listwise {

namespace {

void validate(const ScoredList& list) {
  if (list.scores.empty()) throw PreconditionError("listwise loss needs at least one score");
  if (list.positive_index >= list.scores.size()) {
    throw PreconditionError("positive_index " + std::to_string(list.positive_index) + " out of range");
  }
}

}  // namespace

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) return m;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - m);
  return m + std::log(sum);
}

double loss(const ScoredList& list) {
  validate(list);
  const double pos = list.scores[list.positive_index];
  if (pos < *std::max_element(list.scores.begin(), list.scores.end())) return log_sum_exp(list.scores) - pos;
  // positive is the maximum: log1p keeps relative accuracy when the loss is tiny
  double rest = 0.0;
  for (std::size_t i = 0; i < list.scores.size(); ++i) {
    if (i != list.positive_index) rest += std::exp(list.scores[i] - pos);
  }
  return std::log1p(rest);
}

std::vector<double> gradient(const ScoredList& list) {
  validate(list);
  const double lse = log_sum_exp(list.scores);
  std::vector<double> g(list.scores.size());
  double others = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = std::exp(list.scores[i] - lse);
    if (i != list.positive_index) others += g[i];
  }
  // p_pos - 1 written as the negated mass of the others, which avoids cancellation
  g[list.positive_index] = -others;
  return g;
}

std::vector<double> finite_difference_gradient(const ScoredList& list, double h) {
  validate(list);
  std::vector<double> g(list.scores.size());
  ScoredList probe = list;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double original = probe.scores[i];
    probe.scores[i] = original + h;
    const double up = loss(probe);
    probe.scores[i] = original - h;
    const double down = loss(probe);
    probe.scores[i] = original;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// ---- toy scorer -----------------------------------------------------------

std::vector<double> toy_features(const std::string& query, const std::string& document, std::size_t dim) {
  if (dim == 0) throw PreconditionError("feature dimension must be positive");
  std::vector<double> f(dim, 0.0);
  const auto q = metrics::char_ngrams(query, 3);
  const auto d = metrics::char_ngrams(document, 3);
  for (const auto& [gram, count] : q) {
    const auto it = d.find(gram);
    if (it == d.end()) continue;
    f[hash::fnv1a(gram) % dim] += static_cast<double>(std::min(count, it->second));
  }
  return f;
}

double ToyScorer::score(std::span<const double> features) const {
  if (features.size() != weights.size()) throw PreconditionError("feature/weight dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * features[i];
  return s;
}

FeaturizedInstance featurize(const laura::TrainingInstance& instance, std::size_t dim) {
  FeaturizedInstance out;
  out.documents.push_back(toy_features(instance.query_text, instance.positive, dim));
  for (const auto& neg : instance.negatives) out.documents.push_back(toy_features(instance.query_text, neg, dim));
  return out;
}

ScoredList score_instance(const ToyScorer& scorer, const FeaturizedInstance& instance) {
  ScoredList list;
  list.positive_index = 0;
  list.scores.reserve(instance.documents.size());
  for (const auto& f : instance.documents) list.scores.push_back(scorer.score(f));
  return list;
}

double mean_loss(const ToyScorer& scorer, const std::vector<FeaturizedInstance>& instances,
                 std::vector<double>* weight_gradient) {
  if (instances.empty()) throw PreconditionError("mean_loss needs at least one instance");
  if (weight_gradient != nullptr) weight_gradient->assign(scorer.weights.size(), 0.0);
  double total = 0.0;
  for (const auto& inst : instances) {
    const ScoredList list = score_instance(scorer, inst);
    total += loss(list);
    if (weight_gradient != nullptr) {
      // chain rule through s_i = w · f_i
      const std::vector<double> g = gradient(list);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const auto& f = inst.documents[i];
        for (std::size_t d = 0; d < f.size(); ++d) (*weight_gradient)[d] += g[i] * f[d];
      }
    }
  }
  const auto n = static_cast<double>(instances.size());
  if (weight_gradient != nullptr) {
    for (double& g : *weight_gradient) g /= n;
  }
  return total / n;
}

double positive_first_rate(const ToyScorer& scorer, const std::vector<FeaturizedInstance>& instances) {
  if (instances.empty()) return 0.0;
  std::size_t wins = 0;
  for (const auto& inst : instances) {
    const ScoredList list = score_instance(scorer, inst);
    bool first = true;
    for (std::size_t i = 1; i < list.scores.size(); ++i) {
      if (list.scores[i] >= list.scores[0]) first = false;
    }
    if (first) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(instances.size());
}

TrainResult train_toy_scorer(const std::vector<FeaturizedInstance>& instances, const TrainOptions& opts) {
  if (instances.empty()) throw PreconditionError("train_toy_scorer needs at least one instance");
  const std::size_t dim = instances.front().documents.front().size();
  for (const auto& inst : instances) {
    for (const auto& f : inst.documents) {
      if (f.size() != dim) throw PreconditionError("inconsistent feature dimension across instances");
    }
  }

  TrainResult result;
  result.scorer.weights.resize(dim);
  std::mt19937_64 rng(opts.seed);
  for (double& w : result.scorer.weights) {
    w = (2.0 * hash::unit_interval(rng()) - 1.0) * opts.init_scale;
  }

  std::vector<double> grad;
  for (std::size_t epoch = 0; epoch <= opts.epochs; ++epoch) {
    const bool last = epoch == opts.epochs;
    const double l = mean_loss(result.scorer, instances, last ? nullptr : &grad);
    if (!std::isfinite(l)) throw Error("toy trainer: non-finite loss at epoch " + std::to_string(epoch));
    result.loss_curve.push_back(l);
    if (last) break;
    for (std::size_t d = 0; d < dim; ++d) result.scorer.weights[d] -= opts.learning_rate * grad[d];
  }
  result.positive_first_rate = positive_first_rate(result.scorer, instances);
  return result;
}

}  // namespace mrag::listwise
