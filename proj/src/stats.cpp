#include "mrag/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mrag/error.hpp"
#include "mrag/special_functions.hpp"

namespace mrag::stats {

namespace {

double floor_p(double p) { return p < kPValueFloor ? 0.0 : std::min(p, 1.0); }

}  // namespace

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<double> mid_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    // positions i..j (0-based) share rank average of (i+1)..(j+1)
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

std::optional<KruskalWallisResult> kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  std::vector<double> pooled;
  std::vector<std::size_t> sizes;
  for (const auto& g : groups) {
    if (g.empty()) continue;
    pooled.insert(pooled.end(), g.begin(), g.end());
    sizes.push_back(g.size());
  }
  if (sizes.size() < 2 || pooled.size() < 3) return std::nullopt;

  const auto n = static_cast<double>(pooled.size());
  KruskalWallisResult result;
  result.df = static_cast<int>(sizes.size()) - 1;

  // tie correction: 1 - sum(t^3 - t) / (n^3 - n)
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_sum = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const auto t = static_cast<double>(j - i);
    tie_sum += t * t * t - t;
    i = j;
  }
  const double correction = 1.0 - tie_sum / (n * n * n - n);
  if (correction <= 0.0) {
    result.h = 0.0;
    result.p = 1.0;
    return result;
  }

  const std::vector<double> ranks = mid_ranks(pooled);
  double sum_sq = 0.0;
  std::size_t offset = 0;
  for (std::size_t size : sizes) {
    double rank_sum = 0.0;
    for (std::size_t k = 0; k < size; ++k) rank_sum += ranks[offset + k];
    sum_sq += rank_sum * rank_sum / static_cast<double>(size);
    offset += size;
  }
  double h = 12.0 / (n * (n + 1.0)) * sum_sq - 3.0 * (n + 1.0);
  h /= correction;
  result.h = std::max(h, 0.0);
  result.p = floor_p(special::chi_square_sf(result.h, result.df));
  return result;
}

std::optional<PeerResult> peer(const std::vector<RankGroups>& records) {
  PeerResult result;
  double total = 0.0;
  for (const auto& record : records) {
    std::vector<std::vector<double>> groups;
    for (const auto& [language, ranks] : record.groups) {
      groups.emplace_back(ranks.begin(), ranks.end());
    }
    const auto kw = kruskal_wallis(groups);
    if (!kw) {
      ++result.skipped;
      continue;
    }
    result.per_query.push_back(kw->p);
    total += kw->p;
  }
  result.evaluable = result.per_query.size();
  if (result.evaluable == 0) return std::nullopt;
  result.mean_p = total / static_cast<double>(result.evaluable);
  return result;
}

PairedTTestResult paired_t_test(const PairedSample& sample) {
  if (sample.a.size() != sample.b.size()) {
    throw PreconditionError("paired_t_test: samples differ in length");
  }
  if (!sample.labels.empty() && sample.labels.size() != sample.a.size()) {
    throw PreconditionError("paired_t_test: label count differs from sample length");
  }
  const std::size_t n = sample.a.size();
  if (n < 2) throw PreconditionError("paired_t_test requires at least 2 pairs");

  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = sample.a[i] - sample.b[i];
  PairedTTestResult r;
  r.df = static_cast<int>(n) - 1;
  r.mean_delta = mean(d);
  double ss = 0.0;
  for (double x : d) ss += (x - r.mean_delta) * (x - r.mean_delta);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  const bool all_zero = std::all_of(d.begin(), d.end(), [](double x) { return x == 0.0; });
  if (all_zero) {
    r.t = 0.0;
    r.p = 1.0;
    return r;
  }
  // differences equal up to floating-point noise count as constant
  double scale = 1.0;
  for (double x : d) scale = std::max(scale, std::abs(x));
  const bool constant =
      std::all_of(d.begin(), d.end(), [&](double x) { return std::abs(x - d.front()) <= 1e-12 * scale; });
  if (constant || sd == 0.0) {
    r.t = r.mean_delta > 0 ? std::numeric_limits<double>::infinity()
                           : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    r.degenerate = true;
    return r;
  }
  r.t = r.mean_delta / (sd / std::sqrt(static_cast<double>(n)));
  r.p = floor_p(special::student_t_two_tailed(r.t, r.df));
  return r;
}

std::optional<PearsonResult> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw PreconditionError("pearson: inputs differ in length");
  if (x.size() < 3) throw PreconditionError("pearson requires at least 3 points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;

  PearsonResult result;
  result.n = x.size();
  result.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(x.size()) - 2.0;
  const double one_minus_r2 = 1.0 - result.r * result.r;
  if (one_minus_r2 <= 0.0) {
    result.p = 0.0;
  } else if (df > 0.0) {
    const double t = result.r * std::sqrt(df / one_minus_r2);
    result.p = floor_p(special::student_t_two_tailed(t, df));
  }
  return result;
}

}  // namespace mrag::stats
