#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qclp/errors.hpp"

namespace qclp {

// Row i holds the feature vector of node i. `source` names the producer
// ("deepwalk", "gemini", "meanpool", ...) and flows into report rows.
struct EmbeddingMatrix {
  std::string source;
  Eigen::MatrixXd values;  // n x d

  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }
};

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// TSV layout: header "node_id\t<d>", then one row per node in id order:
// the id followed by d decimal floats.
inline void write_embedding_tsv(const std::string& path, const EmbeddingMatrix& emb) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write embedding file: " + path);
  out << "node_id\t" << emb.cols() << '\n';
  for (int i = 0; i < emb.rows(); ++i) {
    out << i;
    for (int j = 0; j < emb.cols(); ++j) out << '\t' << format_double(emb.values(i, j));
    out << '\n';
  }
}

inline EmbeddingMatrix read_embedding_tsv(const std::string& path, const std::string& source = "") {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open embedding file: " + path);
  std::string header;
  if (!std::getline(in, header)) throw ValidationError("empty embedding file: " + path);
  std::istringstream hs(header);
  std::string tag;
  int d = 0;
  if (!(hs >> tag >> d) || tag != "node_id" || d <= 0) {
    throw ValidationError("bad embedding header in " + path + ": '" + header + "'");
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    long long id = 0;
    if (!(ss >> id) || id != static_cast<long long>(rows.size())) {
      throw ValidationError("embedding rows must be consecutive node ids; line " +
                            std::to_string(lineno) + " in " + path);
    }
    std::vector<double> row(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
      if (!(ss >> row[static_cast<std::size_t>(j)])) {
        throw ValidationError("short embedding row at line " + std::to_string(lineno) + " in " +
                              path);
      }
    }
    rows.push_back(std::move(row));
  }
  EmbeddingMatrix emb;
  emb.source = source;
  emb.values.resize(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < d; ++j) {
      emb.values(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    }
  }
  return emb;
}

// Binary layout: magic "EMB1", u32 n, u32 d, then n*d little-endian f32.
inline void write_embedding_binary(const std::string& path, const EmbeddingMatrix& emb) {
  static_assert(std::endian::native == std::endian::little,
                "binary embedding writer assumes a little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write embedding file: " + path);
  out.write("EMB1", 4);
  const std::uint32_t n = static_cast<std::uint32_t>(emb.rows());
  const std::uint32_t d = static_cast<std::uint32_t>(emb.cols());
  out.write(reinterpret_cast<const char*>(&n), 4);
  out.write(reinterpret_cast<const char*>(&d), 4);
  for (int i = 0; i < emb.rows(); ++i) {
    for (int j = 0; j < emb.cols(); ++j) {
      const float f = static_cast<float>(emb.values(i, j));
      out.write(reinterpret_cast<const char*>(&f), 4);
    }
  }
}

inline EmbeddingMatrix read_embedding_binary(const std::string& path,
                                             const std::string& source = "") {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open embedding file: " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "EMB1", 4) != 0) {
    throw ValidationError("bad magic in embedding file: " + path);
  }
  std::uint32_t n = 0, d = 0;
  in.read(reinterpret_cast<char*>(&n), 4);
  in.read(reinterpret_cast<char*>(&d), 4);
  if (!in) throw ValidationError("truncated embedding header in " + path);
  EmbeddingMatrix emb;
  emb.source = source;
  emb.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) {
      float f = 0;
      if (!in.read(reinterpret_cast<char*>(&f), 4)) {
        throw ValidationError("truncated embedding data in " + path);
      }
      emb.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = f;
    }
  }
  return emb;
}

// Column-wise concatenation; both inputs must cover the same node set.
inline EmbeddingMatrix concat_embeddings(const EmbeddingMatrix& a, const EmbeddingMatrix& b,
                                         const std::string& source = "merged") {
  if (a.rows() != b.rows()) {
    throw ValidationError("concat_embeddings: row mismatch (" + std::to_string(a.rows()) + " vs " +
                          std::to_string(b.rows()) + ")");
  }
  EmbeddingMatrix out;
  out.source = source;
  out.values.resize(a.values.rows(), a.values.cols() + b.values.cols());
  if (a.values.cols() == 0) out.values = b.values;
  else if (b.values.cols() == 0) out.values = a.values;
  else out.values << a.values, b.values;
  return out;
}

}  // namespace qclp
