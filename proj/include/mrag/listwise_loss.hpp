#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mrag/laura_data.hpp"

namespace mrag::listwise {

/// Scores of one training list; `positive_index` marks the positive document.
struct ScoredList {
  std::vector<double> scores;
  std::size_t positive_index = 0;
};

/// Softmax cross-entropy −s_pos + log Σ exp(s), evaluated with the
/// max-subtracted log-sum-exp. Throws PreconditionError for an empty list or
/// an out-of-range positive index.
double loss(const ScoredList& list);

/// ∂L/∂s_i = softmax(s)_i − [i == positive_index].
std::vector<double> gradient(const ScoredList& list);

double log_sum_exp(std::span<const double> values);

/// Central finite-difference gradient of loss() with step h.
std::vector<double> finite_difference_gradient(const ScoredList& list, double h = 1e-5);

// ---- toy linear scorer ----------------------------------------------------

inline constexpr std::size_t kToyFeatureDim = 256;

/// Hashed character 3-gram overlap between query and document: for every gram
/// present in both, min(count_q, count_d) is added to bucket hash(gram) % dim.
std::vector<double> toy_features(const std::string& query, const std::string& document,
                                 std::size_t dim = kToyFeatureDim);

struct ToyScorer {
  std::vector<double> weights;

  double score(std::span<const double> features) const;
};

/// Feature vectors of one instance: index 0 is the positive, 1..k the negatives.
struct FeaturizedInstance {
  std::vector<std::vector<double>> documents;
};

FeaturizedInstance featurize(const laura::TrainingInstance& instance, std::size_t dim = kToyFeatureDim);

ScoredList score_instance(const ToyScorer& scorer, const FeaturizedInstance& instance);

/// Mean listwise loss over instances and its gradient with respect to the weights.
double mean_loss(const ToyScorer& scorer, const std::vector<FeaturizedInstance>& instances,
                 std::vector<double>* weight_gradient = nullptr);

struct TrainOptions {
  std::size_t epochs = 20;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  double init_scale = 0.01;  // initial weights ~ U(-scale, scale)
};

struct TrainResult {
  ToyScorer scorer;
  std::vector<double> loss_curve;  // mean loss at the start of each epoch, then after the last
  double positive_first_rate = 0.0;
};

/// Full-batch gradient descent on the mean listwise loss. Throws mrag::Error
/// naming the epoch if the loss becomes non-finite.
TrainResult train_toy_scorer(const std::vector<FeaturizedInstance>& instances, const TrainOptions& opts);

/// Fraction of instances whose positive strictly outscores every negative.
double positive_first_rate(const ToyScorer& scorer, const std::vector<FeaturizedInstance>& instances);

}  // namespace mrag::listwise
