#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "qclp/errors.hpp"

namespace qclp {

struct ScoredEdge {
  int u = 0;
  int v = 0;
  double score = 0.0;
  int label = 0;  // 1 = positive, 0 = negative
};

namespace detail {

inline void check_finite_scores(std::span<const ScoredEdge> scored) {
  for (const auto& e : scored) {
    if (!std::isfinite(e.score)) throw ValidationError("non-finite score in metric input");
  }
}

}  // namespace detail

// Rank-based AUROC with midrank tie handling:
//   AUROC = (sum of positive ranks - m(m+1)/2) / (m * n_neg)
inline double auroc(std::span<const ScoredEdge> scored) {
  detail::check_finite_scores(scored);
  const std::size_t total = scored.size();
  std::size_t pos = 0;
  for (const auto& e : scored) pos += (e.label != 0);
  const std::size_t neg = total - pos;
  if (pos == 0 || neg == 0) {
    throw ValidationError("auroc requires at least one positive and one negative");
  }

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scored[a].score < scored[b].score;
  });

  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < total) {
    std::size_t j = i;
    while (j < total && scored[order[j]].score == scored[order[i]].score) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (scored[order[k]].label != 0) pos_rank_sum += midrank;
    }
    i = j;
  }
  const double m = static_cast<double>(pos);
  return (pos_rank_sum - m * (m + 1.0) / 2.0) / (m * static_cast<double>(neg));
}

// AP = mean over positive ranks k of precision@k, on the list sorted by
// descending score. Ties are broken by (u, v) ascending so the value is
// deterministic (AP is tie-sensitive).
inline double average_precision(std::span<const ScoredEdge> scored) {
  detail::check_finite_scores(scored);
  std::size_t pos = 0;
  for (const auto& e : scored) pos += (e.label != 0);
  if (pos == 0) throw ValidationError("average_precision requires at least one positive");

  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = scored[a];
    const auto& y = scored[b];
    if (x.score != y.score) return x.score > y.score;
    if (x.u != y.u) return x.u < y.u;
    return x.v < y.v;
  });

  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (scored[order[k]].label != 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  return sum / static_cast<double>(pos);
}

struct SliceMetrics {
  double auroc = 0.0;
  double ap = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

// Restrict to edges with at least one endpoint in `nodes`, then compute both
// metrics on the restriction.
inline SliceMetrics slice_eval(std::span<const ScoredEdge> scored,
                               const std::unordered_set<int>& nodes) {
  std::vector<ScoredEdge> kept;
  for (const auto& e : scored) {
    if (nodes.count(e.u) || nodes.count(e.v)) kept.push_back(e);
  }
  if (kept.empty()) throw ValidationError("slice_eval: slice is empty after filtering");
  SliceMetrics m;
  m.auroc = auroc(kept);
  m.ap = average_precision(kept);
  for (const auto& e : kept) {
    if (e.label != 0) ++m.positives;
    else ++m.negatives;
  }
  return m;
}

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;   // sample std, n-1 denominator
  std::size_t count = 0;
  bool degenerate = false;  // single value: std reported as 0.00
};

inline MetricSummary aggregate(std::span<const double> values) {
  if (values.empty()) throw ValidationError("aggregate: no values");
  MetricSummary s;
  s.count = values.size();
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() < 2) {
    s.degenerate = true;
    s.stddev = 0.0;
    return s;
  }
  double acc = 0.0;
  for (double v : values) acc += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(acc / static_cast<double>(values.size() - 1));
  return s;
}

// Table cell rendering: percent, two decimals, e.g. "89.63 ± 0.05".
inline std::string format_cell(const MetricSummary& s) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", 100.0 * s.mean, 100.0 * s.stddev);
  return buf;
}

}  // namespace qclp
