// oracles.hpp
//
// Test-only reference implementations, deliberately written the slow
// obvious way and kept independent of the library code they check.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace oracle {

// O(n*m) bigram overlap: walk candidate bigram occurrences and greedily
// consume matching reference occurrences.
inline double rouge2_f1(const std::vector<std::string>& cand,
                        const std::vector<std::string>& ref) {
  std::vector<std::pair<std::string, std::string>> cand_bi, ref_bi;
  for (std::size_t i = 0; i + 1 < cand.size(); ++i) cand_bi.push_back({cand[i], cand[i + 1]});
  for (std::size_t i = 0; i + 1 < ref.size(); ++i) ref_bi.push_back({ref[i], ref[i + 1]});
  if (cand_bi.empty() || ref_bi.empty()) return 0.0;
  std::vector<bool> used(ref_bi.size(), false);
  long overlap = 0;
  for (const auto& b : cand_bi) {
    for (std::size_t j = 0; j < ref_bi.size(); ++j) {
      if (!used[j] && ref_bi[j] == b) {
        used[j] = true;
        ++overlap;
        break;
      }
    }
  }
  if (overlap == 0) return 0.0;
  const double p = static_cast<double>(overlap) / static_cast<double>(cand_bi.size());
  const double r = static_cast<double>(overlap) / static_cast<double>(ref_bi.size());
  return 2.0 * p * r / (p + r);
}

// All (member, non-member) pairs; credit 1 for a win, 0.5 for a tie.
inline double roc_auc(const std::vector<double>& members,
                      const std::vector<double>& non_members) {
  double credit = 0.0;
  for (double m : members) {
    for (double n : non_members) {
      if (m > n) {
        credit += 1.0;
      } else if (m == n) {
        credit += 0.5;
      }
    }
  }
  return credit / (static_cast<double>(members.size()) * static_cast<double>(non_members.size()));
}

// Exhaustive scan over candidate thresholds at every distinct score,
// decision rule score >= t, objective (TPR+TNR)/2, smallest t on ties.
inline std::pair<double, double> best_threshold(const std::vector<double>& members,
                                                const std::vector<double>& non_members) {
  std::vector<double> candidates = members;
  candidates.insert(candidates.end(), non_members.begin(), non_members.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  double best_t = candidates.front(), best_acc = -1.0;
  for (double t : candidates) {
    double tp = 0, tn = 0;
    for (double m : members) tp += (m >= t) ? 1 : 0;
    for (double n : non_members) tn += (n < t) ? 1 : 0;
    const double acc =
        0.5 * (tp / static_cast<double>(members.size()) + tn / static_cast<double>(non_members.size()));
    if (acc > best_acc) {
      best_acc = acc;
      best_t = t;
    }
  }
  return {best_t, best_acc};
}

// Central finite differences of a scalar function of a flat parameter
// vector; the analytic-gradient checks compare against this.
inline std::vector<double> finite_difference_grad(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
    double h = 1e-5) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

// max |a-b| / max(1, |a|, |b|) over paired entries
inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({1.0, std::fabs(a[i]), std::fabs(b[i])});
    worst = std::max(worst, std::fabs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace oracle
