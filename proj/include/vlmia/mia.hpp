// mia.hpp
//
// Membership-inference attack statistics over per-sample similarity scores.
//
// The attack is score-based and shadow-model-free: each sample carries the
// maximum similarity between its generated caption and its reference
// caption(s). Members of the training set tend to score higher, so the
// statistics below quantify how separable the two score distributions are:
//
//  - roc_auc: probability that a uniformly drawn member outscores a
//    uniformly drawn non-member, ties credited 0.5 (the Mann-Whitney
//    convention). Computed with midranks; equals the O(M*N) pair count
//    exactly, because the midrank sum U and the pair credit total are the
//    same half-integer before the common division by M*N.
//  - similarity_gap: mean member score minus mean non-member score.
//  - best_threshold: the inclusive decision rule (score >= t -> member)
//    whose balanced accuracy (TPR+TNR)/2 is maximal over all candidate
//    thresholds at distinct score values; ties keep the smallest t.
//  - subsampled_auc: the granularity protocol. Each repeat derives its own
//    RNG from (seed, g, repeat), draws g members and g non-members without
//    replacement and evaluates the AUC on the subset, so results do not
//    depend on execution order.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vlmia/embedding.hpp"
#include "vlmia/errors.hpp"
#include "vlmia/rng.hpp"
#include "vlmia/text_metrics.hpp"
#include "vlmia/util.hpp"

namespace vlmia {

enum class MembershipLabel { member, non_member };

inline std::string to_string(MembershipLabel label) {
  return label == MembershipLabel::member ? "member" : "non-member";
}

inline MembershipLabel membership_label_from_string(const std::string& s) {
  if (s == "member") return MembershipLabel::member;
  if (s == "non-member") return MembershipLabel::non_member;
  throw DataError("unknown membership label: '" + s + "'");
}

struct ScoreSample {
  std::string id;
  MembershipLabel label;
  double score;
};

enum class Metric { rouge2, embedding_cosine };

inline std::string to_string(Metric m) {
  return m == Metric::rouge2 ? "rouge2" : "embedding-cosine";
}

inline Metric metric_from_string(const std::string& s) {
  if (s == "rouge2") return Metric::rouge2;
  if (s == "embedding-cosine") return Metric::embedding_cosine;
  throw ConfigError("unknown metric: '" + s + "' (expected rouge2 or embedding-cosine)");
}

// Membership signal: max over references of the per-pair similarity.
// One score per sample per metric.
inline double membership_signal(const std::string& generated,
                                const std::vector<std::string>& references,
                                Metric metric,
                                const EmbeddingProvider* provider = nullptr) {
  if (references.empty()) throw DataError("membership_signal: empty reference list");
  double best = 0.0;
  bool first = true;
  if (metric == Metric::rouge2) {
    const TokenSequence gen = tokenize(generated);
    for (const auto& ref : references) {
      const double s = rouge2_f1(gen, tokenize(ref));
      if (first || s > best) best = s;
      first = false;
    }
  } else {
    if (provider == nullptr) {
      throw ConfigError("membership_signal: embedding-cosine requires an embedding provider");
    }
    const EmbeddingVector gen = provider->embed(generated);
    for (const auto& ref : references) {
      const double s = cosine_similarity(gen, provider->embed(ref));
      if (first || s > best) best = s;
      first = false;
    }
  }
  return best;
}

namespace detail {

inline void split_scores(const std::vector<ScoreSample>& samples,
                         std::vector<double>& members, std::vector<double>& non_members) {
  for (const auto& s : samples) {
    (s.label == MembershipLabel::member ? members : non_members).push_back(s.score);
  }
}

inline void require_both_classes(std::size_t members, std::size_t non_members,
                                 const char* who) {
  if (members == 0 || non_members == 0) {
    throw DataError(std::string(who) + ": degenerate score set (" +
                    std::to_string(members) + " members, " +
                    std::to_string(non_members) + " non-members)");
  }
}

}  // namespace detail

inline double roc_auc(const std::vector<ScoreSample>& samples) {
  std::vector<double> members, non_members;
  detail::split_scores(samples, members, non_members);
  detail::require_both_classes(members.size(), non_members.size(), "roc_auc");

  struct Entry {
    double score;
    bool is_member;
  };
  std::vector<Entry> all;
  all.reserve(samples.size());
  for (double s : members) all.push_back({s, true});
  for (double s : non_members) all.push_back({s, false});
  std::sort(all.begin(), all.end(),
            [](const Entry& a, const Entry& b) { return a.score < b.score; });

  // midrank sum over members; ties share the average rank of their block
  double member_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].is_member) member_rank_sum += midrank;
    }
    i = j;
  }
  const double m = static_cast<double>(members.size());
  const double n = static_cast<double>(non_members.size());
  const double u = member_rank_sum - m * (m + 1.0) / 2.0;
  return u / (m * n);
}

struct SimilarityGap {
  double alpha_in;   // mean member score
  double alpha_out;  // mean non-member score
  double delta;      // alpha_in - alpha_out
};

inline SimilarityGap similarity_gap(const std::vector<ScoreSample>& samples) {
  std::vector<double> members, non_members;
  detail::split_scores(samples, members, non_members);
  detail::require_both_classes(members.size(), non_members.size(), "similarity_gap");
  const double alpha_in =
      std::accumulate(members.begin(), members.end(), 0.0) / static_cast<double>(members.size());
  const double alpha_out = std::accumulate(non_members.begin(), non_members.end(), 0.0) /
                           static_cast<double>(non_members.size());
  return {alpha_in, alpha_out, alpha_in - alpha_out};
}

struct ThresholdResult {
  double threshold;
  double balanced_accuracy;
};

inline ThresholdResult best_threshold(const std::vector<ScoreSample>& samples) {
  std::vector<double> members, non_members;
  detail::split_scores(samples, members, non_members);
  detail::require_both_classes(members.size(), non_members.size(), "best_threshold");

  std::vector<double> candidates;
  candidates.reserve(samples.size());
  for (const auto& s : samples) candidates.push_back(s.score);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  const double m = static_cast<double>(members.size());
  const double n = static_cast<double>(non_members.size());
  ThresholdResult best{candidates.front(), -1.0};
  for (double t : candidates) {
    std::size_t tp = 0, tn = 0;
    for (double s : members) tp += (s >= t) ? 1 : 0;
    for (double s : non_members) tn += (s < t) ? 1 : 0;
    const double acc = 0.5 * (static_cast<double>(tp) / m + static_cast<double>(tn) / n);
    if (acc > best.balanced_accuracy) best = {t, acc};  // ascending scan keeps smallest t on ties
  }
  return best;
}

// Inclusive boundary: a score equal to the threshold is called a member.
inline MembershipLabel decide(double score, double threshold) {
  return score >= threshold ? MembershipLabel::member : MembershipLabel::non_member;
}

inline std::vector<double> subsampled_auc(const std::vector<ScoreSample>& samples,
                                          std::size_t g, std::size_t repeats,
                                          std::uint64_t seed) {
  if (g == 0) throw ConfigError("subsampled_auc: granularity must be positive");
  std::vector<std::size_t> member_idx, non_member_idx;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    (samples[i].label == MembershipLabel::member ? member_idx : non_member_idx).push_back(i);
  }
  if (member_idx.size() < g || non_member_idx.size() < g) {
    throw ConfigError("subsampled_auc: granularity " + std::to_string(g) +
                      " exceeds a class size (" + std::to_string(member_idx.size()) +
                      " members, " + std::to_string(non_member_idx.size()) + " non-members)");
  }
  std::vector<double> aucs;
  aucs.reserve(repeats);
  for (std::size_t r = 0; r < repeats; ++r) {
    Rng rng(derive_seed(seed, "subsample", g, r));
    std::vector<ScoreSample> subset;
    subset.reserve(2 * g);
    for (std::size_t k : rng.sample_indices(member_idx.size(), g)) {
      subset.push_back(samples[member_idx[k]]);
    }
    for (std::size_t k : rng.sample_indices(non_member_idx.size(), g)) {
      subset.push_back(samples[non_member_idx[k]]);
    }
    aucs.push_back(roc_auc(subset));
  }
  return aucs;
}

struct GranularityRun {
  std::size_t g;
  std::size_t repeats;
  std::vector<double> aucs;
};

struct AttackResult {
  std::string metric;
  double auc_mean = 0.0;
  double auc_std = 0.0;  // population std over all (g, repeat) values
  std::vector<GranularityRun> per_g;
  double alpha_in = 0.0;
  double alpha_out = 0.0;
  double delta = 0.0;
  double best_threshold = 0.0;
  double best_accuracy = 0.0;
};

inline AttackResult aggregate_attack(const std::vector<ScoreSample>& samples, Metric metric,
                                     const std::vector<std::size_t>& granularities,
                                     std::size_t repeats, std::uint64_t seed) {
  if (granularities.empty()) throw ConfigError("aggregate_attack: no granularities configured");
  if (repeats == 0) throw ConfigError("aggregate_attack: repeats must be positive");

  AttackResult result;
  result.metric = to_string(metric);
  std::vector<double> pooled;
  for (std::size_t g : granularities) {
    GranularityRun run{g, repeats, subsampled_auc(samples, g, repeats, seed)};
    pooled.insert(pooled.end(), run.aucs.begin(), run.aucs.end());
    result.per_g.push_back(std::move(run));
  }
  const double count = static_cast<double>(pooled.size());
  result.auc_mean = std::accumulate(pooled.begin(), pooled.end(), 0.0) / count;
  double ss = 0.0;
  for (double a : pooled) ss += (a - result.auc_mean) * (a - result.auc_mean);
  result.auc_std = std::sqrt(ss / count);

  const SimilarityGap gap = similarity_gap(samples);
  result.alpha_in = gap.alpha_in;
  result.alpha_out = gap.alpha_out;
  result.delta = gap.delta;
  const ThresholdResult t = best_threshold(samples);
  result.best_threshold = t.threshold;
  result.best_accuracy = t.balanced_accuracy;
  return result;
}

// --- score table persistence (CSV: id,label,metric,score) ---------------

inline std::string scores_to_csv(const std::vector<ScoreSample>& samples,
                                 const std::string& metric_name) {
  std::ostringstream out;
  out << "id,label,metric,score\n";
  for (const auto& s : samples) {
    out << s.id << ',' << to_string(s.label) << ',' << metric_name << ','
        << fmt_double(s.score) << '\n';
  }
  return out.str();
}

inline std::vector<ScoreSample> scores_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "id,label,metric,score") {
    throw DataError("score CSV: missing or malformed header");
  }
  std::vector<ScoreSample> samples;
  std::set<std::string> seen_ids;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string id, label, metric, score;
    if (!std::getline(row, id, ',') || !std::getline(row, label, ',') ||
        !std::getline(row, metric, ',') || !std::getline(row, score)) {
      throw DataError("score CSV line " + std::to_string(lineno) + ": expected 4 fields");
    }
    if (!seen_ids.insert(id).second) {
      throw DataError("score CSV line " + std::to_string(lineno) + ": duplicate id '" + id + "'");
    }
    try {
      samples.push_back({id, membership_label_from_string(label), std::stod(score)});
    } catch (const std::invalid_argument&) {
      throw DataError("score CSV line " + std::to_string(lineno) + ": bad score '" + score + "'");
    }
  }
  return samples;
}

}  // namespace vlmia
