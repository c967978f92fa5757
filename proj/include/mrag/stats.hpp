#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mrag::stats {

/// p-values below this are reported as exactly 0.
inline constexpr double kPValueFloor = 1e-300;

struct KruskalWallisResult {
  double h = 0.0;
  int df = 0;
  double p = 1.0;
};

/// Kruskal–Wallis H test on pooled mid-ranks with the tie-correction divisor
/// and a chi-square tail. Empty groups are ignored. nullopt when fewer than two
/// non-empty groups or fewer than three observations remain. When every
/// observation is identical the result is H = 0, p = 1.
std::optional<KruskalWallisResult> kruskal_wallis(const std::vector<std::vector<double>>& groups);

/// Rank positions of one query's positive documents, partitioned by document
/// language.
struct RankGroups {
  std::string query_id;
  std::map<std::string, std::vector<int>> groups;
};

struct PeerResult {
  double mean_p = 0.0;
  std::size_t evaluable = 0;
  std::size_t skipped = 0;
  std::vector<double> per_query;  // p-values of evaluable queries, in input order
};

/// Mean Kruskal–Wallis p-value over queries whose language groups admit the
/// test. nullopt when no query is evaluable.
std::optional<PeerResult> peer(const std::vector<RankGroups>& records);

struct PairedSample {
  std::vector<std::string> labels;
  std::vector<double> a;
  std::vector<double> b;
};

struct PairedTTestResult {
  double t = 0.0;
  int df = 0;
  double p = 1.0;
  double mean_delta = 0.0;
  /// Differences are constant (to 1e-12 relative) and non-zero: t is ±inf, p is 0.
  bool degenerate = false;
};

/// Two-tailed paired t-test on d_i = a_i − b_i. Throws PreconditionError when
/// the vectors differ in length or n < 2.
PairedTTestResult paired_t_test(const PairedSample& sample);

struct PearsonResult {
  double r = 0.0;
  double p = 1.0;
  std::size_t n = 0;
};

/// Sample correlation with a two-tailed t-based p-value at n − 2 degrees of
/// freedom. nullopt when either input has zero variance. Throws
/// PreconditionError for mismatched lengths or n < 3.
std::optional<PearsonResult> pearson(const std::vector<double>& x, const std::vector<double>& y);

double mean(const std::vector<double>& v);

/// Mid-ranks (1-based) of `values`, ties sharing the average of their positions.
std::vector<double> mid_ranks(const std::vector<double>& values);

}  // namespace mrag::stats
