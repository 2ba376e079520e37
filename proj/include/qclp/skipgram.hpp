#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qclp/embedding.hpp"
#include "qclp/errors.hpp"
#include "qclp/rng.hpp"
#include "qclp/temporal_graph.hpp"

namespace qclp {

struct SkipGramConfig {
  int dim = 768;
  int window = 10;
  int neg_k = 5;
  int epochs = 5;
  double lr = 0.025;
  std::uint64_t seed = 0;

  void validate() const {
    if (dim <= 0) throw ValidationError("skip-gram dim must be positive");
    if (window < 1) throw ValidationError("skip-gram window must be >= 1");
    if (neg_k < 1) throw ValidationError("skip-gram neg_k must be >= 1");
    if (epochs < 0) throw ValidationError("skip-gram epochs must be >= 0");
  }
};

// Discrete sampler over node ids with probability proportional to `weights`.
class NoiseDistribution {
 public:
  explicit NoiseDistribution(std::vector<double> weights) : cumulative_(std::move(weights)) {
    double total = 0.0;
    for (double& w : cumulative_) {
      if (w < 0.0) throw ValidationError("noise weights must be non-negative");
      total += w;
      w = total;
    }
    if (!(total > 0.0)) throw ValidationError("noise weights must not all be zero");
    total_ = total;
  }

  int sample(Rng& rng) const {
    const double r = rng.next_double() * total_;
    std::size_t lo = 0, hi = cumulative_.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (cumulative_[mid] <= r) lo = mid + 1;
      else hi = mid;
    }
    return static_cast<int>(lo);
  }

  std::vector<double> probabilities() const {
    std::vector<double> p(cumulative_.size());
    double prev = 0.0;
    for (std::size_t i = 0; i < cumulative_.size(); ++i) {
      p[i] = (cumulative_[i] - prev) / total_;
      prev = cumulative_[i];
    }
    return p;
  }

 private:
  std::vector<double> cumulative_;
  double total_ = 0.0;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace detail {

inline Eigen::MatrixXd skipgram_init(int n, int dim, std::uint64_t seed) {
  Eigen::MatrixXd m(n, dim);
  Rng rng(derive_seed(seed, 0x1217));
  const double half = 0.5 / static_cast<double>(dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) m(i, j) = rng.uniform(-half, half);
  }
  return m;
}

inline std::size_t pair_count(const std::vector<std::vector<int>>& walks, int window) {
  std::size_t pairs = 0;
  for (const auto& walk : walks) {
    const int len = static_cast<int>(walk.size());
    for (int i = 0; i < len; ++i) {
      const int lo = std::max(0, i - window);
      const int hi = std::min(len - 1, i + window);
      pairs += static_cast<std::size_t>(hi - lo);
    }
  }
  return pairs;
}

}  // namespace detail

// Noise weights default to (occurrence count in walks)^0.75 when the caller
// has no graph at hand; the pipeline passes degree^0.75.
inline std::vector<double> walk_occurrence_noise(const std::vector<std::vector<int>>& walks,
                                                 int n) {
  std::vector<double> counts(static_cast<std::size_t>(n), 0.0);
  for (const auto& walk : walks) {
    for (int v : walk) counts[static_cast<std::size_t>(v)] += 1.0;
  }
  for (double& c : counts) c = std::pow(c, 0.75);
  return counts;
}

inline std::vector<double> degree_noise(const Adjacency& adj) {
  std::vector<double> w(static_cast<std::size_t>(adj.n));
  for (int i = 0; i < adj.n; ++i) w[static_cast<std::size_t>(i)] = std::pow(adj.degree(i), 0.75);
  return w;
}

// SGNS: ascend log sigma(u.c) + sum_k log sigma(-u.c_k) over (center, context)
// pairs within the window; learning rate decays linearly to lr/10^4.
inline EmbeddingMatrix train_skipgram(const std::vector<std::vector<int>>& walks, int n,
                                      const SkipGramConfig& cfg,
                                      std::vector<double> noise_weights = {},
                                      const std::string& source = "skipgram") {
  cfg.validate();
  if (walks.empty()) throw ValidationError("train_skipgram: no walks");
  if (noise_weights.empty()) noise_weights = walk_occurrence_noise(walks, n);
  const NoiseDistribution noise(std::move(noise_weights));

  Eigen::MatrixXd centers = detail::skipgram_init(n, cfg.dim, cfg.seed);
  Eigen::MatrixXd contexts = Eigen::MatrixXd::Zero(n, cfg.dim);

  const std::size_t total_updates =
      detail::pair_count(walks, cfg.window) * static_cast<std::size_t>(cfg.epochs);
  const double min_lr = cfg.lr * 1e-4;
  std::size_t processed = 0;

  Rng rng(derive_seed(cfg.seed, 0x5147));
  Eigen::VectorXd grad_u(cfg.dim);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& walk : walks) {
      const int len = static_cast<int>(walk.size());
      for (int i = 0; i < len; ++i) {
        const int center = walk[i];
        const int lo = std::max(0, i - cfg.window);
        const int hi = std::min(len - 1, i + cfg.window);
        for (int j = lo; j <= hi; ++j) {
          if (j == i) continue;
          const int context = walk[j];
          const double lr =
              std::max(min_lr, cfg.lr * (1.0 - static_cast<double>(processed) /
                                                   static_cast<double>(total_updates)));
          ++processed;

          grad_u.setZero();
          auto u = centers.row(center);
          {  // positive sample
            auto c = contexts.row(context);
            const double g = (1.0 - sigmoid(u.dot(c))) * lr;
            grad_u += g * c.transpose();
            contexts.row(context) += g * u;
          }
          for (int k = 0; k < cfg.neg_k; ++k) {
            const int neg = noise.sample(rng);
            if (neg == context) continue;
            auto c = contexts.row(neg);
            const double g = (0.0 - sigmoid(u.dot(c))) * lr;
            grad_u += g * c.transpose();
            contexts.row(neg) += g * u;
          }
          centers.row(center) += grad_u.transpose();
        }
      }
    }
  }
  return EmbeddingMatrix{source, std::move(centers)};
}

// Exact expected objective over all window pairs: log sigma(u.c) plus
// neg_k times the exact expectation of log sigma(-u.c') under the noise
// distribution. Used by tests to watch training progress.
inline double skipgram_objective(const Eigen::MatrixXd& centers, const Eigen::MatrixXd& contexts,
                                 const std::vector<std::vector<int>>& walks, int window, int neg_k,
                                 const std::vector<double>& noise_probs) {
  double total = 0.0;
  const int n = static_cast<int>(centers.rows());
  for (const auto& walk : walks) {
    const int len = static_cast<int>(walk.size());
    for (int i = 0; i < len; ++i) {
      const int lo = std::max(0, i - window);
      const int hi = std::min(len - 1, i + window);
      auto u = centers.row(walk[i]);
      for (int j = lo; j <= hi; ++j) {
        if (j == i) continue;
        total += std::log(sigmoid(u.dot(contexts.row(walk[j]))));
        double expected = 0.0;
        for (int x = 0; x < n; ++x) {
          if (noise_probs[static_cast<std::size_t>(x)] == 0.0) continue;
          expected += noise_probs[static_cast<std::size_t>(x)] *
                      std::log(sigmoid(-u.dot(contexts.row(x))));
        }
        total += neg_k * expected;
      }
    }
  }
  return total;
}

// Variant of train_skipgram that also returns the context matrix so tests
// can evaluate the exact objective between epochs.
struct SkipGramState {
  Eigen::MatrixXd centers;
  Eigen::MatrixXd contexts;
};

inline SkipGramState train_skipgram_traced(const std::vector<std::vector<int>>& walks, int n,
                                           const SkipGramConfig& cfg,
                                           std::vector<double> noise_weights,
                                           std::vector<double>* objective_per_epoch) {
  cfg.validate();
  if (noise_weights.empty()) noise_weights = walk_occurrence_noise(walks, n);
  const NoiseDistribution noise(noise_weights);
  const auto probs = noise.probabilities();

  SkipGramState state{detail::skipgram_init(n, cfg.dim, cfg.seed),
                      Eigen::MatrixXd::Zero(n, cfg.dim)};
  if (objective_per_epoch) {
    objective_per_epoch->clear();
    objective_per_epoch->push_back(
        skipgram_objective(state.centers, state.contexts, walks, cfg.window, cfg.neg_k, probs));
  }
  Rng rng(derive_seed(cfg.seed, 0x5147));
  Eigen::VectorXd grad_u(cfg.dim);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& walk : walks) {
      const int len = static_cast<int>(walk.size());
      for (int i = 0; i < len; ++i) {
        const int lo = std::max(0, i - cfg.window);
        const int hi = std::min(len - 1, i + cfg.window);
        for (int j = lo; j <= hi; ++j) {
          if (j == i) continue;
          auto u = state.centers.row(walk[i]);
          grad_u.setZero();
          {
            auto c = state.contexts.row(walk[j]);
            const double g = (1.0 - sigmoid(u.dot(c))) * cfg.lr;
            grad_u += g * c.transpose();
            state.contexts.row(walk[j]) += g * u;
          }
          for (int k = 0; k < cfg.neg_k; ++k) {
            const int neg = noise.sample(rng);
            if (neg == walk[j]) continue;
            auto c = state.contexts.row(neg);
            const double g = (0.0 - sigmoid(u.dot(c))) * cfg.lr;
            grad_u += g * c.transpose();
            state.contexts.row(neg) += g * u;
          }
          state.centers.row(walk[i]) += grad_u.transpose();
        }
      }
    }
    if (objective_per_epoch) {
      objective_per_epoch->push_back(
          skipgram_objective(state.centers, state.contexts, walks, cfg.window, cfg.neg_k, probs));
    }
  }
  return state;
}

}  // namespace qclp
