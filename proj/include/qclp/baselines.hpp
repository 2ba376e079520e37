#pragma once

#include <string>

#include "qclp/embedding.hpp"
#include "qclp/line.hpp"
#include "qclp/skipgram.hpp"
#include "qclp/walks.hpp"

namespace qclp {

struct BaselineConfig {
  WalkConfig walk;
  SkipGramConfig sg;
  LineConfig line;
  int threads = 1;
};

inline EmbeddingMatrix deepwalk(const Adjacency& adj, BaselineConfig cfg) {
  cfg.walk.p = 1.0;
  cfg.walk.q = 1.0;
  auto walks = random_walks(adj, cfg.walk, cfg.threads);
  return train_skipgram(walks, adj.n, cfg.sg, degree_noise(adj), "deepwalk");
}

inline EmbeddingMatrix node2vec(const Adjacency& adj, const BaselineConfig& cfg) {
  auto walks = biased_walks(adj, cfg.walk, cfg.threads);
  return train_skipgram(walks, adj.n, cfg.sg, degree_noise(adj), "node2vec");
}

inline EmbeddingMatrix line_embedding(const Adjacency& adj, const BaselineConfig& cfg) {
  return train_line(adj, cfg.line);
}

inline EmbeddingMatrix run_baseline(const std::string& method, const Adjacency& adj,
                                    const BaselineConfig& cfg) {
  if (method == "deepwalk") return deepwalk(adj, cfg);
  if (method == "node2vec") return node2vec(adj, cfg);
  if (method == "line") return line_embedding(adj, cfg);
  throw ValidationError("unknown baseline method: " + method);
}

}  // namespace qclp
