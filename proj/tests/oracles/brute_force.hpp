#pragma once

// Independent reference implementations used as test oracles. They work on
// explicit scalar sequences and plain vectors and share no code with the
// library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace oracle {

using Scalars = std::vector<char32_t>;

// Recall by greedy matching: every reference gram consumes one unused equal
// gram from the generated text.
inline double gram_recall(const Scalars& generated, const Scalars& reference) {
  if (reference.size() < 3) return 0.0;
  std::vector<Scalars> gen;
  for (std::size_t i = 0; i + 3 <= generated.size(); ++i) gen.push_back({generated[i], generated[i + 1], generated[i + 2]});
  std::vector<bool> used(gen.size(), false);
  std::size_t hits = 0;
  const std::size_t total = reference.size() - 2;
  for (std::size_t i = 0; i < total; ++i) {
    const Scalars g{reference[i], reference[i + 1], reference[i + 2]};
    for (std::size_t j = 0; j < gen.size(); ++j) {
      if (!used[j] && gen[j] == g) {
        used[j] = true;
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

inline double precision(const std::vector<std::string>& ranked, const std::set<std::string>& relevant, std::size_t k) {
  double hits = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (i < ranked.size() && relevant.count(ranked[i])) hits += 1;
  }
  return hits / static_cast<double>(k);
}

inline double ndcg(const std::vector<std::string>& ranked, const std::set<std::string>& relevant, std::size_t k) {
  double dcg = 0, idcg = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double discount = 1.0 / std::log2(static_cast<double>(i) + 2.0);
    if (i < ranked.size() && relevant.count(ranked[i])) dcg += discount;
    if (i < relevant.size()) idcg += discount;
  }
  return dcg / idcg;
}

inline std::string utf8(const Scalars& s) {
  std::string out;
  for (char32_t c : s) {
    if (c < 0x80) {
      out += static_cast<char>(c);
    } else if (c < 0x800) {
      out += static_cast<char>(0xC0 | (c >> 6));
      out += static_cast<char>(0x80 | (c & 0x3F));
    } else if (c < 0x10000) {
      out += static_cast<char>(0xE0 | (c >> 12));
      out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (c & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (c >> 18));
      out += static_cast<char>(0x80 | ((c >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (c & 0x3F));
    }
  }
  return out;
}

// Small alphabet mixing 1-4 byte encodings so random strings share grams.
inline Scalars random_scalars(std::mt19937_64& rng, std::size_t max_len) {
  static const char32_t alphabet[] = {U'a', U'b', U'n', U' ', U'é', U'ß', U'中', U'文', U'ก', U'😀'};
  Scalars s(rng() % (max_len + 1));
  for (auto& c : s) c = alphabet[rng() % std::size(alphabet)];
  return s;
}

}  // namespace oracle
