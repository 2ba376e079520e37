#pragma once

#include <cstdint>
#include <future>
#include <vector>

#include "qclp/errors.hpp"
#include "qclp/rng.hpp"
#include "qclp/temporal_graph.hpp"

namespace qclp {

struct WalkConfig {
  int num_walks = 10;
  int walk_len = 80;
  double p = 1.0;
  double q = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_walks < 1) throw ValidationError("num_walks must be >= 1");
    if (walk_len < 2) throw ValidationError("walk_len must be >= 2");
    if (!(p > 0.0) || !(q > 0.0)) throw ValidationError("node2vec p and q must be positive");
  }
};

namespace detail {

// One first-order walk. Every node reached after the start has at least one
// neighbor (where we came from), so only starts can terminate early.
inline std::vector<int> uniform_walk(const Adjacency& adj, int start, int walk_len, Rng& rng) {
  std::vector<int> walk;
  walk.reserve(static_cast<std::size_t>(walk_len));
  walk.push_back(start);
  if (adj.degree(start) == 0) return walk;
  int cur = start;
  while (static_cast<int>(walk.size()) < walk_len) {
    const auto& nb = adj.neighbors[static_cast<std::size_t>(cur)];
    cur = nb[static_cast<std::size_t>(rng.next_below(nb.size()))];
    walk.push_back(cur);
  }
  return walk;
}

// Second-order walk with node2vec transition weights relative to the
// previous node t: 1/p to return to t, 1 to a neighbor of t, 1/q otherwise.
inline std::vector<int> biased_walk(const Adjacency& adj, int start, const WalkConfig& cfg,
                                    Rng& rng) {
  std::vector<int> walk;
  walk.reserve(static_cast<std::size_t>(cfg.walk_len));
  walk.push_back(start);
  if (adj.degree(start) == 0) return walk;

  const auto& first_nb = adj.neighbors[static_cast<std::size_t>(start)];
  walk.push_back(first_nb[static_cast<std::size_t>(rng.next_below(first_nb.size()))]);

  std::vector<double> weights;
  while (static_cast<int>(walk.size()) < cfg.walk_len) {
    const int t = walk[walk.size() - 2];
    const int v = walk.back();
    const auto& nb = adj.neighbors[static_cast<std::size_t>(v)];
    weights.resize(nb.size());
    double total = 0.0;
    for (std::size_t i = 0; i < nb.size(); ++i) {
      const int x = nb[i];
      double w;
      if (x == t) w = 1.0 / cfg.p;
      else if (adj.connected(x, t)) w = 1.0;
      else w = 1.0 / cfg.q;
      total += w;
      weights[i] = total;  // cumulative
    }
    const double r = rng.next_double() * total;
    std::size_t pick = 0;
    while (pick + 1 < nb.size() && weights[pick] <= r) ++pick;
    walk.push_back(nb[pick]);
  }
  return walk;
}

template <typename WalkFn>
std::vector<std::vector<int>> generate_walks(const Adjacency& adj, const WalkConfig& cfg,
                                             WalkFn&& one_walk, int threads) {
  cfg.validate();
  const int n = adj.n;
  std::vector<std::vector<int>> walks(static_cast<std::size_t>(n) *
                                      static_cast<std::size_t>(cfg.num_walks));
  // Seeds derive from (seed, walk_index, node) so output is independent of
  // both iteration order and worker scheduling.
  auto run_range = [&](int lo, int hi) {
    for (int v = lo; v < hi; ++v) {
      for (int w = 0; w < cfg.num_walks; ++w) {
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(w),
                            static_cast<std::uint64_t>(v)));
        walks[static_cast<std::size_t>(w) * static_cast<std::size_t>(n) +
              static_cast<std::size_t>(v)] = one_walk(adj, v, rng);
      }
    }
  };
  if (threads <= 1 || n < 64) {
    run_range(0, n);
  } else {
    std::vector<std::future<void>> futures;
    const int chunk = (n + threads - 1) / threads;
    for (int lo = 0; lo < n; lo += chunk) {
      const int hi = std::min(n, lo + chunk);
      futures.push_back(std::async(std::launch::async, run_range, lo, hi));
    }
    for (auto& f : futures) f.get();
  }
  return walks;
}

}  // namespace detail

inline std::vector<std::vector<int>> random_walks(const Adjacency& adj, const WalkConfig& cfg,
                                                  int threads = 1) {
  return detail::generate_walks(
      adj, cfg,
      [&cfg](const Adjacency& a, int start, Rng& rng) {
        return detail::uniform_walk(a, start, cfg.walk_len, rng);
      },
      threads);
}

inline std::vector<std::vector<int>> biased_walks(const Adjacency& adj, const WalkConfig& cfg,
                                                  int threads = 1) {
  return detail::generate_walks(
      adj, cfg,
      [&cfg](const Adjacency& a, int start, Rng& rng) {
        return detail::biased_walk(a, start, cfg, rng);
      },
      threads);
}

}  // namespace qclp
