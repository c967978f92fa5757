#include "mrag/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mrag/error.hpp"
#include "mrag/log.hpp"
#include "mrag/pipeline.hpp"

namespace mrag::distributions {

double LanguageDistribution::sum() const {
  double total = 0.0;
  for (const auto& [language, p] : probs) total += p;
  return total;
}

double LanguageDistribution::at(const std::string& language) const {
  const auto it = probs.find(language);
  return it == probs.end() ? 0.0 : it->second;
}

namespace {

std::optional<LanguageDistribution> average(const std::string& query_language,
                                            const std::vector<std::map<std::string, double>>& per_query) {
  if (per_query.empty()) return std::nullopt;
  LanguageDistribution dist;
  dist.query_language = query_language;
  for (const auto& weights : per_query) {
    for (const auto& [language, w] : weights) dist.probs[language] += w;
  }
  for (auto& [language, p] : dist.probs) p /= static_cast<double>(per_query.size());
  return dist;
}

std::set<std::string> key_union(const LanguageDistribution& p, const LanguageDistribution& q) {
  std::set<std::string> keys;
  for (const auto& [k, v] : p.probs) keys.insert(k);
  for (const auto& [k, v] : q.probs) keys.insert(k);
  return keys;
}

double log_in_base(double x, double base) { return std::log(x) / std::log(base); }

}  // namespace

std::optional<LanguageDistribution> vanilla_distribution(const std::vector<VanillaRunRecord>& records,
                                                         const std::string& query_language) {
  std::vector<std::map<std::string, double>> per_query;
  for (const auto& r : records) {
    if (r.query_language != query_language || r.empty_retrieval) continue;
    int total = 0;
    for (const auto& [language, count] : r.context_language_counts) total += count;
    if (total == 0) continue;
    std::map<std::string, double> weights;
    for (const auto& [language, count] : r.context_language_counts) {
      if (count > 0) weights[language] = static_cast<double>(count) / total;
    }
    per_query.push_back(std::move(weights));
  }
  return average(query_language, per_query);
}

std::optional<LanguageDistribution> oracle_distribution(const std::vector<OracleRunRecord>& records,
                                                        const std::string& query_language) {
  std::vector<std::map<std::string, double>> per_query;
  for (const auto& r : records) {
    if (r.query_language != query_language || r.best_languages.empty()) continue;
    std::map<std::string, double> weights;
    const double w = 1.0 / static_cast<double>(r.best_languages.size());
    for (const auto& language : r.best_languages) weights[language] = w;
    per_query.push_back(std::move(weights));
  }
  return average(query_language, per_query);
}

double kl_divergence(const LanguageDistribution& p, const LanguageDistribution& q, DivergenceOptions opts) {
  const auto keys = key_union(p, q);
  bool needs_smoothing = false;
  for (const auto& k : keys) {
    if (p.at(k) > 0.0 && q.at(k) <= 0.0) needs_smoothing = true;
  }
  std::map<std::string, double> qs;
  double q_total = 0.0;
  for (const auto& k : keys) {
    double v = q.at(k);
    if (needs_smoothing && v <= 0.0 && p.at(k) > 0.0) v = kSmoothingEpsilon;
    qs[k] = v;
    q_total += v;
  }
  double kl = 0.0;
  for (const auto& k : keys) {
    const double pk = p.at(k);
    if (pk <= 0.0) continue;
    kl += pk * log_in_base(pk / (qs[k] / q_total), opts.log_base);
  }
  return std::max(kl, 0.0);
}

double js_divergence(const LanguageDistribution& p, const LanguageDistribution& q, DivergenceOptions opts) {
  LanguageDistribution m;
  for (const auto& k : key_union(p, q)) m.probs[k] = 0.5 * (p.at(k) + q.at(k));
  const double js = 0.5 * kl_divergence(p, m, opts) + 0.5 * kl_divergence(q, m, opts);
  return std::max(js, 0.0);
}

double entropy(const LanguageDistribution& p, DivergenceOptions opts) {
  double h = 0.0;
  for (const auto& [language, pk] : p.probs) {
    if (pk > 0.0) h -= pk * log_in_base(pk, opts.log_base);
  }
  return std::max(h, 0.0);
}

namespace {

DistributionMatrix build_matrix(const std::vector<LanguageDistribution>& columns,
                                const std::vector<std::string>& language_set) {
  DistributionMatrix m;
  for (const auto& c : columns) m.query_languages.push_back(c.query_language);
  m.doc_languages = language_set;
  // doc languages outside the configured set still get a row
  for (const auto& c : columns) {
    for (const auto& [language, p] : c.probs) {
      if (std::find(m.doc_languages.begin(), m.doc_languages.end(), language) == m.doc_languages.end()) {
        m.doc_languages.push_back(language);
      }
    }
  }
  m.values.assign(m.doc_languages.size(), std::vector<double>(columns.size(), 0.0));
  for (std::size_t col = 0; col < columns.size(); ++col) {
    for (std::size_t row = 0; row < m.doc_languages.size(); ++row) {
      m.values[row][col] = columns[col].at(m.doc_languages[row]);
    }
  }
  return m;
}

}  // namespace

DistributionReport distribution_report(const std::vector<VanillaRunRecord>& vanilla,
                                       const std::vector<OracleRunRecord>& oracle,
                                       const std::vector<std::string>& language_set, ReportOptions opts) {
  DistributionReport report;
  std::vector<LanguageDistribution> vanilla_cols;
  std::vector<LanguageDistribution> oracle_cols;
  for (const auto& language : language_set) {
    const auto v = vanilla_distribution(vanilla, language);
    const auto o = oracle_distribution(oracle, language);
    if (v) vanilla_cols.push_back(*v);
    if (o) oracle_cols.push_back(*o);
    if (!v || !o) {
      if (v || o) {
        log::warn("query language '" + language + "' is missing from the " + (v ? "oracle" : "vanilla") +
                  " records; skipped in the divergence table");
      }
      report.skipped_languages.push_back(language);
      continue;
    }
    DivergenceRow row;
    row.query_language = language;
    row.js = js_divergence(*v, *o, opts.divergence);
    row.kl = opts.kl_direction == KlDirection::vanilla_to_oracle ? kl_divergence(*v, *o, opts.divergence)
                                                                  : kl_divergence(*o, *v, opts.divergence);
    row.entropy = entropy(*v, opts.divergence);
    report.per_query_language.push_back(row);
  }
  report.matrix_vanilla = build_matrix(vanilla_cols, language_set);
  report.matrix_oracle = build_matrix(oracle_cols, language_set);

  report.means.query_language = "mean";
  if (!report.per_query_language.empty()) {
    for (const auto& row : report.per_query_language) {
      report.means.js += row.js;
      report.means.kl += row.kl;
      report.means.entropy += row.entropy;
    }
    const auto n = static_cast<double>(report.per_query_language.size());
    report.means.js /= n;
    report.means.kl /= n;
    report.means.entropy /= n;
  }
  return report;
}

}  // namespace mrag::distributions
