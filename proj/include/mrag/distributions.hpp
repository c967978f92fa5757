#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mrag {
struct VanillaRunRecord;
struct OracleRunRecord;
}  // namespace mrag

namespace mrag::distributions {

inline constexpr double kSmoothingEpsilon = 1e-12;

struct LanguageDistribution {
  std::string query_language;
  std::map<std::string, double> probs;

  double sum() const;
  double at(const std::string& language) const;
};

/// Rows are document languages, columns are query languages; every column
/// sums to 1.
struct DistributionMatrix {
  std::vector<std::string> query_languages;
  std::vector<std::string> doc_languages;
  std::vector<std::vector<double>> values;  // values[row][col]
};

struct DivergenceOptions {
  double log_base = 2.0;
};

/// Mean over a query language's records of the top-5 language proportions.
/// Records with empty top-5 lists (and failed records) are ignored; nullopt
/// when none remain.
std::optional<LanguageDistribution> vanilla_distribution(const std::vector<VanillaRunRecord>& records,
                                                         const std::string& query_language);

/// Mean over a query language's records of the best-language weights (1 for a
/// unique best, 1/|ties| for each tied best language).
std::optional<LanguageDistribution> oracle_distribution(const std::vector<OracleRunRecord>& records,
                                                        const std::string& query_language);

/// Σ p_i log(p_i / q_i). Zero q entries under positive p mass are smoothed by
/// kSmoothingEpsilon and q renormalised, so the result is always finite.
double kl_divergence(const LanguageDistribution& p, const LanguageDistribution& q,
                     DivergenceOptions opts = {});
double js_divergence(const LanguageDistribution& p, const LanguageDistribution& q,
                     DivergenceOptions opts = {});
double entropy(const LanguageDistribution& p, DivergenceOptions opts = {});

enum class KlDirection { vanilla_to_oracle, oracle_to_vanilla };

struct DivergenceRow {
  std::string query_language;
  double js = 0.0;
  double kl = 0.0;
  double entropy = 0.0;  // of the vanilla distribution
};

struct DistributionReport {
  DistributionMatrix matrix_vanilla;
  DistributionMatrix matrix_oracle;
  std::vector<DivergenceRow> per_query_language;
  DivergenceRow means;  // unweighted over per_query_language; query_language = "mean"
  std::vector<std::string> skipped_languages;
};

struct ReportOptions {
  DivergenceOptions divergence;
  KlDirection kl_direction = KlDirection::vanilla_to_oracle;
};

/// Builds both matrices and the per-query-language JS/KL/entropy table for
/// every language in `language_set` that has evaluable records on both sides.
DistributionReport distribution_report(const std::vector<VanillaRunRecord>& vanilla,
                                       const std::vector<OracleRunRecord>& oracle,
                                       const std::vector<std::string>& language_set,
                                       ReportOptions opts = {});

}  // namespace mrag::distributions
