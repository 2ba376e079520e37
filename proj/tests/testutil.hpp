#pragma once

// Test-only helpers and independent oracles. Nothing in here may call into
// the implementation paths it is used to check.

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "qclp/metrics.hpp"
#include "qclp/rng.hpp"

namespace testutil {

// Pairwise-counting AUROC: (wins + 0.5 * ties) / (m * n).
inline double oracle_auroc(const std::vector<qclp::ScoredEdge>& scored) {
  double wins = 0.0, ties = 0.0;
  std::size_t m = 0, n = 0;
  for (const auto& p : scored) {
    if (p.label == 0) continue;
    ++m;
    for (const auto& q : scored) {
      if (q.label != 0) continue;
      if (p.score > q.score) wins += 1.0;
      else if (p.score == q.score) ties += 1.0;
    }
  }
  for (const auto& q : scored) n += (q.label == 0);
  return (wins + 0.5 * ties) / (static_cast<double>(m) * static_cast<double>(n));
}

// Direct precision@k: rescan the sorted prefix at every positive rank.
inline double oracle_average_precision(const std::vector<qclp::ScoredEdge>& scored) {
  std::vector<qclp::ScoredEdge> sorted(scored);
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.u != b.u) return a.u < b.u;
    return a.v < b.v;
  });
  double sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    if (sorted[k].label == 0) continue;
    ++positives;
    std::size_t hits = 0;
    for (std::size_t j = 0; j <= k; ++j) hits += (sorted[j].label != 0);
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return sum / static_cast<double>(positives);
}

// Random scored-edge instance with ties injected by drawing scores from a
// small discrete grid. Guarantees at least one positive and one negative.
inline std::vector<qclp::ScoredEdge> random_scored(qclp::Rng& rng, int size) {
  std::vector<qclp::ScoredEdge> out;
  out.reserve(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) {
    qclp::ScoredEdge e;
    e.u = i;
    e.v = size + i;
    e.label = rng.next_double() < 0.5 ? 1 : 0;
    if (rng.next_double() < 0.5) {
      e.score = static_cast<double>(rng.next_int(0, 4)) / 4.0;  // ties likely
    } else {
      e.score = rng.next_double();
    }
    out.push_back(e);
  }
  out[0].label = 1;
  out[out.size() - 1].label = 0;
  return out;
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<std::uint64_t> counter{0};
    auto base = std::filesystem::temp_directory_path();
    path_ = base / ("qclp_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& child = "") const {
    return child.empty() ? path_.string() : (path_ / child).string();
  }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace testutil
