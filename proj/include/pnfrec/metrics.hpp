#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "pnfrec/errors.hpp"

namespace pnfrec {

// Ranking metrics split by ground-truth polarity. Group metrics are
// averaged only over their own group; the deltas are exact differences of
// the stored components.
struct EvalReport {
  std::size_t k = 0;
  double hr_p = 0, hr_n = 0;
  double ndcg_p = 0, ndcg_n = 0;
  double delta_hr = 0, delta_ndcg = 0;
  std::size_t n_users_p = 0, n_users_n = 0;
  bool warn_empty_group = false;
};

struct RankedCase {
  std::vector<int> ranked;  // recommended items, best first, distinct
  int ground_truth = -1;
  bool positive = true;  // polarity of the held-out interaction
};

inline void require_positive_k(std::size_t k) {
  if (k == 0) throw ConfigError("metric cutoff k must be >= 1");
}

// 1-based rank of the ground truth in the list, or 0 if absent.
inline std::size_t rank_of(std::span<const int> ranked, int ground_truth) {
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (ranked[i] == ground_truth) return i + 1;
  }
  return 0;
}

inline int hr_at_k(std::span<const int> ranked, int ground_truth, std::size_t k) {
  require_positive_k(k);
  const std::size_t r = rank_of(ranked, ground_truth);
  return (r >= 1 && r <= k) ? 1 : 0;
}

// Single relevant item, so IDCG = 1 and NDCG = 1/log2(rank + 1).
inline double ndcg_at_k(std::span<const int> ranked, int ground_truth, std::size_t k) {
  require_positive_k(k);
  const std::size_t r = rank_of(ranked, ground_truth);
  if (r == 0 || r > k) return 0.0;
  return 1.0 / std::log2(static_cast<double>(r) + 1.0);
}

inline EvalReport split_eval(std::span<const RankedCase> cases, std::size_t k) {
  require_positive_k(k);
  if (cases.empty()) throw EvalError("split_eval: no users to evaluate");
  EvalReport rep;
  rep.k = k;
  double hr_p = 0, hr_n = 0, ndcg_p = 0, ndcg_n = 0;
  for (const RankedCase& c : cases) {
    const double hr = hr_at_k(c.ranked, c.ground_truth, k);
    const double ndcg = ndcg_at_k(c.ranked, c.ground_truth, k);
    if (c.positive) {
      hr_p += hr;
      ndcg_p += ndcg;
      ++rep.n_users_p;
    } else {
      hr_n += hr;
      ndcg_n += ndcg;
      ++rep.n_users_n;
    }
  }
  if (rep.n_users_p > 0) {
    rep.hr_p = hr_p / static_cast<double>(rep.n_users_p);
    rep.ndcg_p = ndcg_p / static_cast<double>(rep.n_users_p);
  }
  if (rep.n_users_n > 0) {
    rep.hr_n = hr_n / static_cast<double>(rep.n_users_n);
    rep.ndcg_n = ndcg_n / static_cast<double>(rep.n_users_n);
  }
  rep.warn_empty_group = rep.n_users_p == 0 || rep.n_users_n == 0;
  rep.delta_hr = rep.hr_p - rep.hr_n;
  rep.delta_ndcg = rep.ndcg_p - rep.ndcg_n;
  return rep;
}

struct ReportLine {
  std::string metric;
  double value = 0;
  std::size_t group_size = 0;
};

// Machine-readable rows: one line per metric with the size of the group it
// was averaged over (both groups for the deltas).
inline std::vector<ReportLine> report_lines(const EvalReport& r) {
  const std::string k = std::to_string(r.k);
  return {
      {"HR_p@" + k, r.hr_p, r.n_users_p},
      {"HR_n@" + k, r.hr_n, r.n_users_n},
      {"NDCG_p@" + k, r.ndcg_p, r.n_users_p},
      {"NDCG_n@" + k, r.ndcg_n, r.n_users_n},
      {"DeltaHR@" + k, r.delta_hr, r.n_users_p + r.n_users_n},
      {"DeltaNDCG@" + k, r.delta_ndcg, r.n_users_p + r.n_users_n},
  };
}

inline std::string format_report_table(std::span<const EvalReport> reports) {
  std::string out;
  char buf[160];
  for (const EvalReport& r : reports) {
    std::snprintf(buf, sizeof(buf), "k=%zu  (positive users: %zu, negative users: %zu)\n",
                  r.k, r.n_users_p, r.n_users_n);
    out += buf;
    std::snprintf(buf, sizeof(buf), "  %-8s %10s %10s %10s\n", "metric", "positive",
                  "negative", "delta");
    out += buf;
    std::snprintf(buf, sizeof(buf), "  %-8s %10.6f %10.6f %10.6f\n", "HR", r.hr_p, r.hr_n,
                  r.delta_hr);
    out += buf;
    std::snprintf(buf, sizeof(buf), "  %-8s %10.6f %10.6f %10.6f\n", "NDCG", r.ndcg_p,
                  r.ndcg_n, r.delta_ndcg);
    out += buf;
    if (r.warn_empty_group) {
      out += "  warning: one polarity group is empty; its metrics are reported as 0\n";
    }
  }
  return out;
}

}  // namespace pnfrec
