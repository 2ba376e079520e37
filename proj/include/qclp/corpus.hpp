#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "qclp/errors.hpp"

namespace qclp {

// One corpus record; title and abstract are the text matched for concepts.
struct Document {
  std::string id;
  int year = 0;
  std::string title;
  std::string abstract;
};

// Lowercase, collapse internal whitespace to single spaces, strip ends.
// Bytes >= 0x80 (UTF-8 continuations etc.) pass through untouched.
inline std::string normalize_concept(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
  }
  return out;
}

// Token boundaries sit at non-alphanumeric ASCII; non-ASCII bytes are kept
// inside tokens so multi-byte characters are not split.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

// Ordered list of normalized concepts; position in the list is the node id.
struct ConceptVocab {
  std::vector<std::string> concepts;
  std::unordered_map<std::string, int> index;

  static ConceptVocab from_concepts(const std::vector<std::string>& raw) {
    ConceptVocab vocab;
    for (const auto& r : raw) {
      std::string norm = normalize_concept(r);
      if (norm.empty()) continue;
      auto [it, inserted] = vocab.index.emplace(norm, static_cast<int>(vocab.concepts.size()));
      if (!inserted) {
        throw ValidationError("duplicate concept after normalization: '" + norm + "'");
      }
      vocab.concepts.push_back(std::move(norm));
    }
    return vocab;
  }

  static ConceptVocab load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open vocabulary file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return from_concepts(lines);
  }

  int size() const { return static_cast<int>(concepts.size()); }
};

// Matching strategy over a fixed vocabulary. The default matcher does
// case-insensitive whole-token phrase matching; no stemming, no plural
// folding, so "quasiparticles" does not match "quasiparticle".
class ConceptMatcher {
 public:
  virtual ~ConceptMatcher() = default;
  virtual std::vector<int> match(std::string_view text) const = 0;
};

class TokenPhraseMatcher : public ConceptMatcher {
 public:
  explicit TokenPhraseMatcher(const ConceptVocab& vocab) {
    for (int id = 0; id < vocab.size(); ++id) {
      auto toks = tokenize(vocab.concepts[static_cast<std::size_t>(id)]);
      if (toks.empty()) continue;
      by_first_token_[toks[0]].push_back({id, std::move(toks)});
    }
  }

  std::vector<int> match(std::string_view text) const override {
    const auto tokens = tokenize(text);
    std::unordered_set<int> found;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      auto it = by_first_token_.find(tokens[i]);
      if (it == by_first_token_.end()) continue;
      for (const auto& cand : it->second) {
        const auto& phrase = cand.tokens;
        if (i + phrase.size() > tokens.size()) continue;
        bool ok = true;
        for (std::size_t k = 1; k < phrase.size(); ++k) {
          if (tokens[i + k] != phrase[k]) {
            ok = false;
            break;
          }
        }
        if (ok) found.insert(cand.id);
      }
    }
    std::vector<int> out(found.begin(), found.end());
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  struct Candidate {
    int id;
    std::vector<std::string> tokens;
  };
  std::unordered_map<std::string, std::vector<Candidate>> by_first_token_;
};

// Title and abstract are matched separately so a phrase cannot straddle the
// field boundary; the result is the deduplicated union.
inline std::vector<int> match_concepts(const Document& doc, const ConceptMatcher& matcher) {
  auto ids = matcher.match(doc.title);
  auto from_abstract = matcher.match(doc.abstract);
  std::vector<int> merged;
  std::set_union(ids.begin(), ids.end(), from_abstract.begin(), from_abstract.end(),
                 std::back_inserter(merged));
  return merged;
}

inline std::vector<int> match_concepts(const Document& doc, const ConceptVocab& vocab) {
  if (vocab.size() == 0) throw ValidationError("match_concepts: empty vocabulary");
  TokenPhraseMatcher matcher(vocab);
  return match_concepts(doc, matcher);
}

struct CooccurrenceRecord {
  int u = 0;  // u < v always
  int v = 0;
  int year = 0;
  std::string doc_id;

  friend bool operator==(const CooccurrenceRecord&, const CooccurrenceRecord&) = default;
};

inline bool record_less(const CooccurrenceRecord& a, const CooccurrenceRecord& b) {
  return std::tie(a.u, a.v, a.year, a.doc_id) < std::tie(b.u, b.v, b.year, b.doc_id);
}

// JSON-lines corpus: one object per line with exactly
// {"id": str, "year": int, "title": str, "abstract": str}.
inline std::vector<Document> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus file: " + path);

  std::vector<Document> docs;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("malformed line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!obj.is_object()) {
      throw ValidationError("malformed line " + std::to_string(lineno) + ": not a JSON object");
    }

    auto require = [&](const char* field) -> const nlohmann::json& {
      auto it = obj.find(field);
      if (it == obj.end()) {
        throw ValidationError("missing field '" + std::string(field) + "' at line " +
                              std::to_string(lineno));
      }
      return *it;
    };
    auto type_error = [&](const char* field, const char* want) {
      throw ValidationError("field '" + std::string(field) + "' at line " +
                            std::to_string(lineno) + " is not " + want);
    };

    Document doc;
    const auto& id = require("id");
    if (!id.is_string()) type_error("id", "a string");
    doc.id = id.get<std::string>();
    const auto& year = require("year");
    if (!year.is_number_integer()) type_error("year", "an integer");
    doc.year = year.get<int>();
    const auto& title = require("title");
    if (!title.is_string()) type_error("title", "a string");
    doc.title = title.get<std::string>();
    const auto& abstract = require("abstract");
    if (!abstract.is_string()) type_error("abstract", "a string");
    doc.abstract = abstract.get<std::string>();

    if (!seen_ids.insert(doc.id).second) {
      throw ValidationError("duplicate document id '" + doc.id + "' at line " +
                            std::to_string(lineno));
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

struct IngestStats {
  std::size_t total_documents = 0;
  std::size_t skipped_out_of_window = 0;
  std::size_t contributing_documents = 0;  // documents with >= 2 matched concepts
  std::size_t records = 0;
  std::map<int, std::size_t> contributing_by_year;
};

struct CorpusWindow {
  int min_year = 0;
  int max_year = 9999;
};

// Emit all C(k,2) unordered concept pairs per document with >= 2 matches.
// Records are sorted canonically (u, v, year, doc_id) before return, so the
// output is identical for any document order and any worker count.
inline std::vector<CooccurrenceRecord> extract_cooccurrences(
    const std::vector<Document>& docs, const ConceptVocab& vocab,
    CorpusWindow window = {}, IngestStats* stats = nullptr, int threads = 1) {
  TokenPhraseMatcher matcher(vocab);

  IngestStats local;
  local.total_documents = docs.size();

  auto process_range = [&](std::size_t begin, std::size_t end) {
    std::pair<std::vector<CooccurrenceRecord>, IngestStats> out;
    for (std::size_t i = begin; i < end; ++i) {
      const Document& doc = docs[i];
      if (doc.year < window.min_year || doc.year > window.max_year) {
        ++out.second.skipped_out_of_window;
        continue;
      }
      auto ids = match_concepts(doc, matcher);
      if (ids.size() < 2) continue;
      ++out.second.contributing_documents;
      ++out.second.contributing_by_year[doc.year];
      for (std::size_t a = 0; a < ids.size(); ++a) {
        for (std::size_t b = a + 1; b < ids.size(); ++b) {
          out.first.push_back({ids[a], ids[b], doc.year, doc.id});
        }
      }
    }
    return out;
  };

  std::vector<CooccurrenceRecord> records;
  if (threads <= 1 || docs.size() < 2) {
    auto [recs, st] = process_range(0, docs.size());
    records = std::move(recs);
    local.skipped_out_of_window = st.skipped_out_of_window;
    local.contributing_documents = st.contributing_documents;
    local.contributing_by_year = std::move(st.contributing_by_year);
  } else {
    const std::size_t nchunks = std::min<std::size_t>(static_cast<std::size_t>(threads), docs.size());
    const std::size_t chunk = (docs.size() + nchunks - 1) / nchunks;
    std::vector<std::future<std::pair<std::vector<CooccurrenceRecord>, IngestStats>>> futs;
    for (std::size_t c = 0; c < nchunks; ++c) {
      const std::size_t begin = c * chunk;
      const std::size_t end = std::min(begin + chunk, docs.size());
      if (begin >= end) break;
      futs.push_back(std::async(std::launch::async, process_range, begin, end));
    }
    for (auto& f : futs) {
      auto [recs, st] = f.get();
      records.insert(records.end(), recs.begin(), recs.end());
      local.skipped_out_of_window += st.skipped_out_of_window;
      local.contributing_documents += st.contributing_documents;
      for (const auto& [y, c] : st.contributing_by_year) local.contributing_by_year[y] += c;
    }
  }

  std::sort(records.begin(), records.end(), record_less);
  local.records = records.size();
  if (stats) *stats = local;
  return records;
}

inline void write_records_tsv(const std::string& path,
                              const std::vector<CooccurrenceRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write records file: " + path);
  out << "u\tv\tyear\tdoc_id\n";
  for (const auto& r : records) {
    out << r.u << '\t' << r.v << '\t' << r.year << '\t' << r.doc_id << '\n';
  }
}

inline std::vector<CooccurrenceRecord> read_records_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open records file: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "u\tv\tyear\tdoc_id") {
    throw ValidationError("records file missing 'u\\tv\\tyear\\tdoc_id' header: " + path);
  }
  std::vector<CooccurrenceRecord> records;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    CooccurrenceRecord r;
    if (!(ss >> r.u >> r.v >> r.year >> r.doc_id)) {
      throw ValidationError("malformed record at line " + std::to_string(lineno) + " in " + path);
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace qclp
