#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "qclp/embedding.hpp"
#include "qclp/errors.hpp"
#include "qclp/temporal_graph.hpp"

namespace qclp {

struct TimeDecayConfig {
  double lambda = 0.3;  // per year
  int ref_year = 0;
  int d_td = 128;
  int year_lo = 0;
  int year_hi = 0;

  void validate() const {
    if (lambda < 0.0) throw ValidationError("time decay lambda must be >= 0");
    if (d_td < 1) throw ValidationError("time decay dimension must be >= 1");
    if (year_lo > year_hi) throw ValidationError("time decay year range is empty");
    if (year_hi > ref_year) {
      throw ValidationError("time decay years extend past ref_year " +
                            std::to_string(ref_year) + " (future leakage)");
    }
  }
};

// Symmetric sparse matrix with zero diagonal, stored once per unordered pair
// (canonical u < v key).
struct SymmetricPairs {
  int n = 0;
  int year = 0;
  std::unordered_map<std::uint64_t, double> pairs;
};

// One count matrix per requested year; years without documents yield empty
// (all-zero) matrices.
inline std::vector<SymmetricPairs> yearly_cooccurrence(const TemporalGraph& g, int year_lo,
                                                       int year_hi) {
  if (year_lo > year_hi) throw ValidationError("yearly_cooccurrence: empty year range");
  std::vector<SymmetricPairs> out;
  out.reserve(static_cast<std::size_t>(year_hi - year_lo + 1));
  const auto& by_year = g.yearly_counts();
  for (int year = year_lo; year <= year_hi; ++year) {
    SymmetricPairs m;
    m.n = g.node_count();
    m.year = year;
    const auto it = by_year.find(year);
    if (it != by_year.end()) {
      m.pairs.reserve(it->second.size());
      for (const auto& [key, count] : it->second) m.pairs.emplace(key, count);
    }
    out.push_back(std::move(m));
  }
  return out;
}

// PPMI over the full symmetric matrix: with S the grand total and
// P(i,j) = X[i,j]/S, P(i) = rowsum_i/S, each stored entry becomes
// max(0, ln(P(i,j) / (P(i) P(j)))). Zero-count pairs stay zero. The optional
// context-smoothing exponent alpha raises the context marginal to alpha
// (alpha = 1 means off).
inline SymmetricPairs ppmi(const SymmetricPairs& counts, double alpha = 1.0) {
  SymmetricPairs out;
  out.n = counts.n;
  out.year = counts.year;
  if (counts.pairs.empty()) return out;

  std::vector<double> rowsum(static_cast<std::size_t>(counts.n), 0.0);
  double total = 0.0;
  for (const auto& [key, value] : counts.pairs) {
    if (value < 0.0) throw ValidationError("ppmi: negative count");
    const int u = static_cast<int>(key >> 32);
    const int v = static_cast<int>(key & 0xffffffffu);
    rowsum[static_cast<std::size_t>(u)] += value;
    rowsum[static_cast<std::size_t>(v)] += value;
    total += 2.0 * value;  // symmetric: entry appears at (u,v) and (v,u)
  }
  double context_norm = total;
  if (alpha != 1.0) {
    context_norm = 0.0;
    for (double s : rowsum) context_norm += std::pow(s, alpha);
  }
  out.pairs.reserve(counts.pairs.size());
  for (const auto& [key, value] : counts.pairs) {
    if (value == 0.0) continue;
    const int u = static_cast<int>(key >> 32);
    const int v = static_cast<int>(key & 0xffffffffu);
    const double p_uv = value / total;
    const double p_u = rowsum[static_cast<std::size_t>(u)] / total;
    const double p_v = (alpha == 1.0)
                           ? rowsum[static_cast<std::size_t>(v)] / total
                           : std::pow(rowsum[static_cast<std::size_t>(v)], alpha) / context_norm;
    const double pmi = std::log(p_uv / (p_u * p_v));
    if (pmi > 0.0) out.pairs.emplace(key, pmi);
  }
  return out;
}

// M = sum_t exp(-lambda (ref_year - t)) PPMI_t. Refuses matrices from the
// future of ref_year.
inline SymmetricPairs decay_aggregate(const std::vector<SymmetricPairs>& ppmis,
                                      const TimeDecayConfig& cfg) {
  SymmetricPairs out;
  out.year = cfg.ref_year;
  for (const auto& m : ppmis) {
    if (m.year > cfg.ref_year) {
      throw ValidationError("decay_aggregate: matrix year " + std::to_string(m.year) +
                            " is after ref_year " + std::to_string(cfg.ref_year) +
                            " (future leakage)");
    }
    if (out.n == 0) out.n = m.n;
    else if (m.n != out.n) throw ValidationError("decay_aggregate: shape mismatch");
    const double weight = std::exp(-cfg.lambda * static_cast<double>(cfg.ref_year - m.year));
    for (const auto& [key, value] : m.pairs) out.pairs[key] += weight * value;
  }
  return out;
}

inline Eigen::MatrixXd to_dense(const SymmetricPairs& m) {
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(m.n, m.n);
  for (const auto& [key, value] : m.pairs) {
    const int u = static_cast<int>(key >> 32);
    const int v = static_cast<int>(key & 0xffffffffu);
    dense(u, v) = value;
    dense(v, u) = value;
  }
  return dense;
}

// E = U_d sqrt(Sigma_d) from the top-d singular triples. Sign convention:
// within each left singular vector the largest-magnitude entry (first such
// index on ties) is made positive, which pins the otherwise arbitrary
// per-column sign and keeps artifacts byte-identical across runs.
inline EmbeddingMatrix truncated_svd(const Eigen::MatrixXd& m, int d_td,
                                     const std::string& source = "timedecay") {
  if (d_td < 1 || d_td > m.rows()) {
    throw ValidationError("truncated_svd: d_td must be in [1, n], got " + std::to_string(d_td) +
                          " with n=" + std::to_string(m.rows()));
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU);
  Eigen::MatrixXd u = svd.matrixU().leftCols(d_td);
  Eigen::VectorXd sigma = svd.singularValues().head(d_td);
  for (int k = 0; k < d_td; ++k) {
    int arg_max = 0;
    double best = -1.0;
    for (int i = 0; i < u.rows(); ++i) {
      const double a = std::abs(u(i, k));
      if (a > best) {
        best = a;
        arg_max = i;
      }
    }
    if (u(arg_max, k) < 0.0) u.col(k) = -u.col(k);
  }
  EmbeddingMatrix out;
  out.source = source;
  out.values = u * sigma.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  return out;
}

// Full pipeline per Algorithm: yearly counts -> PPMI per year -> decayed
// aggregation -> truncated SVD. Uses only years <= ref_year by construction.
inline EmbeddingMatrix time_decay_embedding(const TemporalGraph& g, const TimeDecayConfig& cfg,
                                            double ppmi_alpha = 1.0) {
  cfg.validate();
  auto counts = yearly_cooccurrence(g, cfg.year_lo, cfg.year_hi);
  std::vector<SymmetricPairs> ppmis;
  ppmis.reserve(counts.size());
  for (const auto& c : counts) ppmis.push_back(ppmi(c, ppmi_alpha));
  const auto aggregated = decay_aggregate(ppmis, cfg);
  return truncated_svd(to_dense(aggregated), cfg.d_td);
}

// Coordinate-format dump of the aggregated matrix (upper triangle, u < v).
inline void write_coo_tsv(const std::string& path, const SymmetricPairs& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write matrix file: " + path);
  std::vector<std::uint64_t> keys;
  keys.reserve(m.pairs.size());
  for (const auto& [key, _] : m.pairs) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  for (const auto key : keys) {
    out << static_cast<int>(key >> 32) << '\t' << static_cast<int>(key & 0xffffffffu) << '\t'
        << format_double(m.pairs.at(key)) << '\n';
  }
}

}  // namespace qclp
