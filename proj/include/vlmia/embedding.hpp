// embedding.hpp
//
// Semantic caption similarity: sentence embeddings + cosine.
//
// Two providers share one interface:
//  - builtin-hashed-ngram: dependency-free hashed character 3-gram TF.
//    The caption is normalized (tokenize, join with single spaces), every
//    contiguous 3-char window is hashed with FNV-1a 64; bucket = hash mod
//    dimension, sign = top hash bit; counts accumulate and the vector is
//    L2-normalized. Texts with no 3-grams map to the zero vector.
//  - precomputed-file: a TSV table `caption text<TAB>v1,v2,...,vD` letting
//    externally computed sentence vectors drive the same pipeline.

#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "vlmia/errors.hpp"
#include "vlmia/text_metrics.hpp"
#include "vlmia/util.hpp"

namespace vlmia {

using EmbeddingVector = std::vector<double>;

inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.size() != b.size()) {
    throw DataError("cosine_similarity: dimension mismatch (" +
                    std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  // zero vectors carry no semantic evidence
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return dot / (na * nb);
}

class EmbeddingProvider {
public:
  virtual ~EmbeddingProvider() = default;
  virtual EmbeddingVector embed(const std::string& text) const = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::string kind() const = 0;
};

class HashedNgramEmbedder final : public EmbeddingProvider {
public:
  explicit HashedNgramEmbedder(std::size_t dimension = 256) : dim_(dimension) {
    if (dim_ == 0) throw ConfigError("embedding dimension must be positive");
  }

  EmbeddingVector embed(const std::string& text) const override {
    EmbeddingVector v(dim_, 0.0);
    const TokenSequence tokens = tokenize(text);
    std::string norm;
    for (const auto& t : tokens) {
      if (!norm.empty()) norm.push_back(' ');
      norm += t;
    }
    if (norm.size() < 3) return v;  // no 3-grams -> zero vector
    for (std::size_t i = 0; i + 3 <= norm.size(); ++i) {
      const std::uint64_t h = fnv1a64(std::string_view(norm).substr(i, 3));
      const std::size_t bucket = static_cast<std::size_t>(h % dim_);
      v[bucket] += (h >> 63) ? -1.0 : 1.0;
    }
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    if (norm2 > 0.0) {
      const double inv = 1.0 / std::sqrt(norm2);
      for (double& x : v) x *= inv;
    }
    return v;
  }

  std::size_t dimension() const override { return dim_; }
  std::string kind() const override { return "builtin-hashed-ngram"; }

private:
  std::size_t dim_;
};

// Read-only after construction; the table is keyed by the exact caption
// string, so every caption queried during a run must appear in the file.
class PrecomputedEmbedder final : public EmbeddingProvider {
public:
  explicit PrecomputedEmbedder(const std::filesystem::path& path) : source_(path.string()) {
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) {
        throw DataError(source_ + ":" + std::to_string(lineno) + ": expected <text>\\t<v1,v2,...>");
      }
      EmbeddingVector vec;
      std::istringstream nums(line.substr(tab + 1));
      std::string field;
      while (std::getline(nums, field, ',')) {
        try {
          vec.push_back(std::stod(field));
        } catch (const std::exception&) {
          throw DataError(source_ + ":" + std::to_string(lineno) + ": bad number '" + field + "'");
        }
      }
      if (dim_ == 0) dim_ = vec.size();
      if (vec.empty() || vec.size() != dim_) {
        throw DataError(source_ + ":" + std::to_string(lineno) + ": dimension " +
                        std::to_string(vec.size()) + " != " + std::to_string(dim_));
      }
      table_.emplace(line.substr(0, tab), std::move(vec));
    }
    if (table_.empty()) throw DataError(source_ + ": no embeddings found");
  }

  EmbeddingVector embed(const std::string& text) const override {
    auto it = table_.find(text);
    if (it == table_.end()) {
      throw DataError("missing embedding for caption: \"" + text + "\" (" + source_ + ")");
    }
    return it->second;
  }

  std::size_t dimension() const override { return dim_; }
  std::string kind() const override { return "precomputed-file"; }

private:
  std::string source_;
  std::size_t dim_ = 0;
  std::unordered_map<std::string, EmbeddingVector> table_;
};

}  // namespace vlmia
