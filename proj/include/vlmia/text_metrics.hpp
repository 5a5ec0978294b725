// text_metrics.hpp
//
// Lexical caption similarity: tokenization and ROUGE-2 F1.
//
// Tokenization rule (frozen so golden files stay stable): lowercase ASCII,
// split on every maximal run of non-alphanumeric bytes, drop empty
// fragments. ROUGE-2 counts overlapping token bigrams as multisets:
//   overlap   = sum over distinct bigrams of min(count_cand, count_ref)
//   precision = overlap / |bigrams(cand)|,  recall = overlap / |bigrams(ref)|
//   F1        = 2PR / (P + R)
// and returns 0 whenever either bigram multiset is empty or the overlap is
// zero (single-token captions are legal model outputs, so this is a value,
// not an error).

#pragma once

#include <cctype>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vlmia {

using TokenSequence = std::vector<std::string>;

inline TokenSequence tokenize(std::string_view text) {
  TokenSequence tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

using BigramCounts = std::map<std::pair<std::string, std::string>, int>;

inline BigramCounts bigram_counts(const TokenSequence& tokens) {
  BigramCounts counts;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    ++counts[{tokens[i], tokens[i + 1]}];
  }
  return counts;
}

inline double rouge2_f1(const TokenSequence& candidate, const TokenSequence& reference) {
  const BigramCounts cand = bigram_counts(candidate);
  const BigramCounts ref = bigram_counts(reference);
  if (cand.empty() || ref.empty()) return 0.0;

  long overlap = 0;
  for (const auto& [bigram, count] : cand) {
    auto it = ref.find(bigram);
    if (it != ref.end()) overlap += std::min(count, it->second);
  }
  if (overlap == 0) return 0.0;

  long n_cand = 0, n_ref = 0;
  for (const auto& [bigram, count] : cand) n_cand += count;
  for (const auto& [bigram, count] : ref) n_ref += count;

  const double precision = static_cast<double>(overlap) / static_cast<double>(n_cand);
  const double recall = static_cast<double>(overlap) / static_cast<double>(n_ref);
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace vlmia
