#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "qclp/corpus.hpp"
#include "qclp/errors.hpp"
#include "qclp/rng.hpp"

namespace qclp {

// Undirected edge in canonical order (u < v).
struct Edge {
  int u = 0;
  int v = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend bool operator<(const Edge& a, const Edge& b) {
    return std::tie(a.u, a.v) < std::tie(b.u, b.v);
  }
};

inline Edge make_edge(int a, int b) {
  if (a == b) throw ValidationError("self-loop edge (" + std::to_string(a) + ")");
  return a < b ? Edge{a, b} : Edge{b, a};
}

inline std::uint64_t edge_key(const Edge& e) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(e.u)) << 32) |
         static_cast<std::uint32_t>(e.v);
}

inline std::uint64_t edge_key(int u, int v) { return edge_key(make_edge(u, v)); }

using EdgeSet = std::unordered_set<std::uint64_t>;

inline EdgeSet to_edge_set(std::span<const Edge> edges) {
  EdgeSet set;
  set.reserve(edges.size() * 2);
  for (const auto& e : edges) set.insert(edge_key(e));
  return set;
}

// Per-node sorted neighbor lists; the "train view" handed to walkers and
// message-passing models is built from a split's train edges.
struct Adjacency {
  int n = 0;
  std::vector<std::vector<int>> neighbors;

  static Adjacency from_edges(std::span<const Edge> edges, int n) {
    Adjacency adj;
    adj.n = n;
    adj.neighbors.assign(static_cast<std::size_t>(n), {});
    for (const auto& e : edges) {
      if (e.u < 0 || e.v >= n) throw ValidationError("edge endpoint out of range");
      adj.neighbors[static_cast<std::size_t>(e.u)].push_back(e.v);
      adj.neighbors[static_cast<std::size_t>(e.v)].push_back(e.u);
    }
    for (auto& list : adj.neighbors) {
      std::sort(list.begin(), list.end());
      list.erase(std::unique(list.begin(), list.end()), list.end());
    }
    return adj;
  }

  int degree(int u) const { return static_cast<int>(neighbors[static_cast<std::size_t>(u)].size()); }

  bool connected(int u, int v) const {
    const auto& list = neighbors[static_cast<std::size_t>(u)];
    return std::binary_search(list.begin(), list.end(), v);
  }
};

struct TemporalEdge {
  int u = 0;
  int v = 0;
  int first_year = 0;
};

// Undirected simple graph over concept ids with per-edge first co-occurrence
// year and per-year document counts. Immutable after build.
class TemporalGraph {
 public:
  static TemporalGraph build(std::span<const CooccurrenceRecord> records, int n) {
    TemporalGraph g;
    g.n_ = n;
    std::unordered_map<std::uint64_t, int> first_year;
    for (const auto& r : records) {
      if (r.u < 0 || r.u >= n || r.v < 0 || r.v >= n) {
        throw ValidationError("record node id out of range: (" + std::to_string(r.u) + ", " +
                              std::to_string(r.v) + ") with n=" + std::to_string(n));
      }
      const Edge e = make_edge(r.u, r.v);
      const std::uint64_t key = edge_key(e);
      auto [it, inserted] = first_year.emplace(key, r.year);
      if (!inserted) it->second = std::min(it->second, r.year);
      ++g.yearly_counts_[r.year][key];
    }
    g.edges_.reserve(first_year.size());
    for (const auto& [key, year] : first_year) {
      g.edges_.push_back({static_cast<int>(key >> 32), static_cast<int>(key & 0xffffffffu), year});
    }
    std::sort(g.edges_.begin(), g.edges_.end(), [](const TemporalEdge& a, const TemporalEdge& b) {
      return std::tie(a.u, a.v) < std::tie(b.u, b.v);
    });
    g.edge_keys_.reserve(g.edges_.size() * 2);
    for (const auto& e : g.edges_) g.edge_keys_.insert(edge_key(Edge{e.u, e.v}));
    return g;
  }

  int node_count() const { return n_; }
  const std::vector<TemporalEdge>& edges() const { return edges_; }
  bool has_edge(int u, int v) const { return u != v && edge_keys_.count(edge_key(u, v)) > 0; }
  std::size_t edge_count() const { return edges_.size(); }

  // year -> (canonical pair key -> number of co-occurring documents).
  const std::map<int, std::unordered_map<std::uint64_t, int>>& yearly_counts() const {
    return yearly_counts_;
  }

  Adjacency adjacency() const {
    std::vector<Edge> plain;
    plain.reserve(edges_.size());
    for (const auto& e : edges_) plain.push_back({e.u, e.v});
    return Adjacency::from_edges(plain, n_);
  }

 private:
  int n_ = 0;
  std::vector<TemporalEdge> edges_;
  EdgeSet edge_keys_;
  std::map<int, std::unordered_map<std::uint64_t, int>> yearly_counts_;
};

struct SplitSpec {
  int train_end = 0;
  int val_end = 0;
  int test_end = 0;

  void validate() const {
    if (!(train_end < val_end && val_end <= test_end)) {
      throw ValidationError("split spec requires train_end < val_end <= test_end, got " +
                            std::to_string(train_end) + ", " + std::to_string(val_end) + ", " +
                            std::to_string(test_end));
    }
  }
};

struct PositiveSplits {
  std::vector<Edge> train;
  std::vector<Edge> val;
  std::vector<Edge> test;
};

// Window membership on first_year; edges first seen after test_end drop out.
inline PositiveSplits chronological_split(const TemporalGraph& g, const SplitSpec& spec) {
  spec.validate();
  PositiveSplits out;
  for (const auto& e : g.edges()) {
    const Edge edge{e.u, e.v};
    if (e.first_year <= spec.train_end) out.train.push_back(edge);
    else if (e.first_year <= spec.val_end) out.val.push_back(edge);
    else if (e.first_year <= spec.test_end) out.test.push_back(edge);
  }
  return out;
}

// Uniform sample without replacement over unordered non-edges of the full
// graph, additionally excluding `exclude` (e.g. previously drawn negatives).
// Deterministic given the seed.
inline std::vector<Edge> sample_negatives(const TemporalGraph& g, std::size_t count,
                                          const std::vector<std::span<const Edge>>& exclude,
                                          std::uint64_t seed) {
  const int n = g.node_count();
  EdgeSet taken;
  for (const auto& e : g.edges()) taken.insert(edge_key(Edge{e.u, e.v}));
  for (const auto& span : exclude) {
    for (const auto& e : span) taken.insert(edge_key(e));
  }

  const std::uint64_t total_pairs =
      static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n - 1) / 2;
  if (total_pairs < taken.size() || count > total_pairs - taken.size()) {
    throw ValidationError("sample_negatives: requested " + std::to_string(count) +
                          " negatives but only " +
                          std::to_string(total_pairs > taken.size() ? total_pairs - taken.size() : 0) +
                          " non-edges are available");
  }

  Rng rng(seed);
  std::vector<Edge> out;
  out.reserve(count);

  // Dense regime: enumerate the free pairs and take a partial shuffle.
  if (count * 3 >= total_pairs - taken.size() || n <= 64) {
    std::vector<Edge> free_pairs;
    free_pairs.reserve(total_pairs - taken.size());
    for (int u = 0; u < n; ++u) {
      for (int v = u + 1; v < n; ++v) {
        if (!taken.count(edge_key(Edge{u, v}))) free_pairs.push_back({u, v});
      }
    }
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.next_below(free_pairs.size() - i));
      std::swap(free_pairs[i], free_pairs[j]);
      out.push_back(free_pairs[i]);
    }
  } else {
    while (out.size() < count) {
      const int u = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
      const int v = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
      if (u == v) continue;
      const Edge e = make_edge(u, v);
      if (taken.insert(edge_key(e)).second) out.push_back(e);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Negatives restricted to pairs with at least one endpoint in `nodes`; used
// for the isolated-node evaluation slice.
inline std::vector<Edge> sample_negatives_in_slice(const TemporalGraph& g, std::size_t count,
                                                   const std::vector<int>& nodes,
                                                   const std::vector<std::span<const Edge>>& exclude,
                                                   std::uint64_t seed) {
  const int n = g.node_count();
  EdgeSet taken;
  for (const auto& e : g.edges()) taken.insert(edge_key(Edge{e.u, e.v}));
  for (const auto& span : exclude) {
    for (const auto& e : span) taken.insert(edge_key(e));
  }
  std::unordered_set<int> in_slice(nodes.begin(), nodes.end());

  std::vector<Edge> candidates;
  for (int s : nodes) {
    for (int v = 0; v < n; ++v) {
      if (v == s) continue;
      if (in_slice.count(v) && v < s) continue;  // both-in-slice pairs counted once
      const Edge e = make_edge(s, v);
      if (!taken.count(edge_key(e))) candidates.push_back(e);
    }
  }
  if (count > candidates.size()) {
    throw ValidationError("sample_negatives_in_slice: requested " + std::to_string(count) +
                          " but only " + std::to_string(candidates.size()) + " available");
  }
  std::sort(candidates.begin(), candidates.end());
  Rng rng(seed);
  std::vector<Edge> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next_below(candidates.size() - i));
    std::swap(candidates[i], candidates[j]);
    out.push_back(candidates[i]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<int> isolated_nodes(std::span<const Edge> train_pos, int n) {
  std::vector<int> degree(static_cast<std::size_t>(n), 0);
  for (const auto& e : train_pos) {
    ++degree[static_cast<std::size_t>(e.u)];
    ++degree[static_cast<std::size_t>(e.v)];
  }
  std::vector<int> out;
  for (int i = 0; i < n; ++i) {
    if (degree[static_cast<std::size_t>(i)] == 0) out.push_back(i);
  }
  return out;
}

// The five sets are pairwise disjoint; negatives avoid positives of every
// period (the whole graph) so no "negative" is a future true edge.
struct EdgeSplit {
  std::vector<Edge> train_pos;
  std::vector<Edge> val_pos;
  std::vector<Edge> test_pos;
  std::vector<Edge> val_neg;
  std::vector<Edge> test_neg;
  std::uint64_t seed = 0;
};

inline EdgeSplit make_split(const TemporalGraph& g, const SplitSpec& spec, std::uint64_t seed) {
  auto pos = chronological_split(g, spec);
  EdgeSplit split;
  split.seed = seed;
  split.train_pos = std::move(pos.train);
  split.val_pos = std::move(pos.val);
  split.test_pos = std::move(pos.test);
  split.val_neg = sample_negatives(g, split.val_pos.size(), {}, derive_seed(seed, 1));
  split.test_neg = sample_negatives(g, split.test_pos.size(), {split.val_neg},
                                    derive_seed(seed, 2));
  return split;
}

inline void write_edge_tsv(const std::string& path, std::span<const Edge> edges) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write edge file: " + path);
  for (const auto& e : edges) out << e.u << '\t' << e.v << '\n';
}

inline std::vector<Edge> read_edge_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open edge file: " + path);
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    int u = 0, v = 0;
    if (!(ss >> u >> v)) {
      throw ValidationError("malformed edge at line " + std::to_string(lineno) + " in " + path);
    }
    edges.push_back(make_edge(u, v));
  }
  return edges;
}

inline void write_split(const std::string& dir, const EdgeSplit& split, const SplitSpec& spec,
                        int n) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_edge_tsv((fs::path(dir) / "train.tsv").string(), split.train_pos);
  write_edge_tsv((fs::path(dir) / "val.tsv").string(), split.val_pos);
  write_edge_tsv((fs::path(dir) / "test.tsv").string(), split.test_pos);
  write_edge_tsv((fs::path(dir) / "val_neg.tsv").string(), split.val_neg);
  write_edge_tsv((fs::path(dir) / "test_neg.tsv").string(), split.test_neg);

  nlohmann::json meta;
  meta["spec"] = {{"train_end", spec.train_end}, {"val_end", spec.val_end},
                  {"test_end", spec.test_end}};
  meta["seed"] = split.seed;
  meta["n"] = n;
  meta["counts"] = {{"train_pos", split.train_pos.size()}, {"val_pos", split.val_pos.size()},
                    {"test_pos", split.test_pos.size()}, {"val_neg", split.val_neg.size()},
                    {"test_neg", split.test_neg.size()}};
  std::ofstream meta_out(fs::path(dir) / "split_meta.json");
  meta_out << meta.dump(2) << '\n';
}

struct LoadedSplit {
  EdgeSplit split;
  SplitSpec spec;
  int n = 0;
};

inline LoadedSplit read_split(const std::string& dir) {
  namespace fs = std::filesystem;
  LoadedSplit out;
  out.split.train_pos = read_edge_tsv((fs::path(dir) / "train.tsv").string());
  out.split.val_pos = read_edge_tsv((fs::path(dir) / "val.tsv").string());
  out.split.test_pos = read_edge_tsv((fs::path(dir) / "test.tsv").string());
  out.split.val_neg = read_edge_tsv((fs::path(dir) / "val_neg.tsv").string());
  out.split.test_neg = read_edge_tsv((fs::path(dir) / "test_neg.tsv").string());

  std::ifstream meta_in(fs::path(dir) / "split_meta.json");
  if (!meta_in) throw ValidationError("missing split_meta.json in " + dir);
  nlohmann::json meta = nlohmann::json::parse(meta_in);
  out.spec.train_end = meta.at("spec").at("train_end").get<int>();
  out.spec.val_end = meta.at("spec").at("val_end").get<int>();
  out.spec.test_end = meta.at("spec").at("test_end").get<int>();
  out.split.seed = meta.at("seed").get<std::uint64_t>();
  out.n = meta.at("n").get<int>();
  return out;
}

}  // namespace qclp
