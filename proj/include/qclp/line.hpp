#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qclp/embedding.hpp"
#include "qclp/errors.hpp"
#include "qclp/rng.hpp"
#include "qclp/skipgram.hpp"
#include "qclp/temporal_graph.hpp"

namespace qclp {

struct LineConfig {
  int dim = 768;  // total; each proximity order gets dim/2
  int neg_k = 5;
  int epochs = 5;
  double lr = 0.025;
  std::uint64_t seed = 0;

  void validate() const {
    if (dim <= 0 || dim % 2 != 0) {
      throw ValidationError("LINE dim must be positive and even, got " + std::to_string(dim));
    }
    if (neg_k < 1) throw ValidationError("LINE neg_k must be >= 1");
    if (epochs < 0) throw ValidationError("LINE epochs must be >= 0");
  }
};

namespace detail {

// Shared SGD loop for both proximity orders. First order updates vertex
// vectors on both sides; second order pairs vertex vectors with a separate
// context table. Directed edge list (u,v) and (v,u) per undirected edge.
inline Eigen::MatrixXd line_train_half(const Adjacency& adj, int half_dim, int neg_k, int epochs,
                                       double lr0, std::uint64_t seed, bool second_order) {
  const int n = adj.n;
  Eigen::MatrixXd vertex = skipgram_init(n, half_dim, derive_seed(seed, second_order ? 2u : 1u));
  Eigen::MatrixXd context;
  if (second_order) context = Eigen::MatrixXd::Zero(n, half_dim);

  std::vector<std::pair<int, int>> pairs;
  for (int u = 0; u < n; ++u) {
    for (int v : adj.neighbors[static_cast<std::size_t>(u)]) pairs.emplace_back(u, v);
  }
  if (pairs.empty()) return vertex;

  const NoiseDistribution noise(degree_noise(adj));
  Rng rng(derive_seed(seed, second_order ? 4u : 3u));
  const std::size_t total_updates = pairs.size() * static_cast<std::size_t>(epochs);
  const double min_lr = lr0 * 1e-4;
  std::size_t processed = 0;

  Eigen::VectorXd grad_u(half_dim);
  std::vector<std::pair<int, int>> order = pairs;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (const auto& [u_id, v_id] : order) {
      const double lr = std::max(
          min_lr, lr0 * (1.0 - static_cast<double>(processed) / static_cast<double>(total_updates)));
      ++processed;
      auto u = vertex.row(u_id);
      grad_u.setZero();
      auto target_row = [&](int id) {
        return second_order ? context.row(id) : vertex.row(id);
      };
      {
        auto c = target_row(v_id);
        const double g = (1.0 - sigmoid(u.dot(c))) * lr;
        grad_u += g * c.transpose();
        if (second_order) context.row(v_id) += g * u;
        else vertex.row(v_id) += g * u;
      }
      for (int k = 0; k < neg_k; ++k) {
        const int neg = noise.sample(rng);
        if (neg == v_id || neg == u_id) continue;
        auto c = target_row(neg);
        const double g = (0.0 - sigmoid(u.dot(c))) * lr;
        grad_u += g * c.transpose();
        if (second_order) context.row(neg) += g * u;
        else vertex.row(neg) += g * u;
      }
      vertex.row(u_id) += grad_u.transpose();
    }
  }
  return vertex;
}

}  // namespace detail

// First- and second-order proximity halves, concatenated.
inline EmbeddingMatrix train_line(const Adjacency& adj, const LineConfig& cfg) {
  cfg.validate();
  const int half = cfg.dim / 2;
  Eigen::MatrixXd first =
      detail::line_train_half(adj, half, cfg.neg_k, cfg.epochs, cfg.lr, cfg.seed, false);
  Eigen::MatrixXd second =
      detail::line_train_half(adj, half, cfg.neg_k, cfg.epochs, cfg.lr, cfg.seed, true);
  EmbeddingMatrix out;
  out.source = "line";
  out.values.resize(adj.n, cfg.dim);
  out.values << first, second;
  return out;
}

}  // namespace qclp
