#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qclp/corpus.hpp"
#include "qclp/embedding.hpp"
#include "qclp/errors.hpp"
#include "qclp/llm_client.hpp"

namespace qclp {

inline std::string build_prompt(const std::string& term) {
  if (term.empty()) throw ValidationError("build_prompt: concept must be non-empty");
  return "What are the features of " + term + " in quantum computing?";
}

// Texts are concatenated in ascending model-id order, separated by blank
// lines, inside the summarization template.
inline std::string build_summarize_prompt(
    const std::string& term, std::vector<std::pair<std::string, std::string>> model_texts) {
  if (term.empty()) throw ValidationError("summarize: concept must be non-empty");
  if (model_texts.size() < 2) {
    throw ValidationError("summarize: need at least 2 texts, got " +
                          std::to_string(model_texts.size()));
  }
  std::sort(model_texts.begin(), model_texts.end());
  std::string joined;
  for (std::size_t i = 0; i < model_texts.size(); ++i) {
    if (i > 0) joined += "\n\n";
    joined += model_texts[i].second;
  }
  return "Summarize this text about the features of " + term + ". Text: " + joined;
}

inline FeatureText summarize_merge(LlmClient& summarizer, const std::string& term,
                                   std::vector<std::pair<std::string, std::string>> model_texts) {
  return summarizer.generate(term, build_summarize_prompt(term, std::move(model_texts)));
}

inline std::vector<double> mean_pool(const std::vector<std::vector<double>>& vectors) {
  if (vectors.empty()) throw ValidationError("mean_pool: empty input");
  const std::size_t d = vectors.front().size();
  std::vector<double> out(d, 0.0);
  for (const auto& v : vectors) {
    if (v.size() != d) throw ValidationError("mean_pool: dimension mismatch");
    for (std::size_t j = 0; j < d; ++j) out[j] += v[j];
  }
  for (double& x : out) x /= static_cast<double>(vectors.size());
  return out;
}

inline std::vector<double> max_pool(const std::vector<std::vector<double>>& vectors) {
  if (vectors.empty()) throw ValidationError("max_pool: empty input");
  const std::size_t d = vectors.front().size();
  std::vector<double> out(d, -std::numeric_limits<double>::infinity());
  for (const auto& v : vectors) {
    if (v.size() != d) throw ValidationError("max_pool: dimension mismatch");
    for (std::size_t j = 0; j < d; ++j) out[j] = std::max(out[j], v[j]);
  }
  return out;
}

// Features for every concept in the vocabulary: ask the generator model for
// feature text, embed it, stack rows in concept-id order.
inline EmbeddingMatrix featurize_vocab(LlmClient& generator, LlmClient& embedder,
                                       const ConceptVocab& vocab, const std::string& source) {
  if (vocab.concepts.empty()) throw ValidationError("featurize_vocab: empty vocabulary");
  Eigen::MatrixXd values;
  for (std::size_t i = 0; i < vocab.concepts.size(); ++i) {
    const auto& term = vocab.concepts[i];
    const auto ft = generator.generate(term, build_prompt(term));
    const auto vec = embedder.embed(ft.text);
    if (values.size() == 0) {
      values.resize(static_cast<Eigen::Index>(vocab.concepts.size()),
                    static_cast<Eigen::Index>(vec.size()));
    } else if (static_cast<Eigen::Index>(vec.size()) != values.cols()) {
      throw ValidationError("featurize_vocab: embedder returned inconsistent dimensions");
    }
    for (std::size_t j = 0; j < vec.size(); ++j) {
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = vec[j];
    }
  }
  return EmbeddingMatrix{source, std::move(values)};
}

// Replays an externally chosen per-concept model assignment (e.g. an
// ensemble ranker's output): each concept's text comes from its assigned
// generator, then everything goes through one embedder.
class ModelSelector {
 public:
  virtual ~ModelSelector() = default;
  virtual const std::string& model_for(const std::string& term) const = 0;
};

class MapSelector : public ModelSelector {
 public:
  MapSelector(std::map<std::string, std::string> assignment, std::string fallback)
      : assignment_(std::move(assignment)), fallback_(std::move(fallback)) {}

  const std::string& model_for(const std::string& term) const override {
    const auto it = assignment_.find(term);
    return it == assignment_.end() ? fallback_ : it->second;
  }

 private:
  std::map<std::string, std::string> assignment_;
  std::string fallback_;
};

inline EmbeddingMatrix featurize_with_selector(
    const std::map<std::string, LlmClient*>& generators_by_model, LlmClient& embedder,
    const ModelSelector& selector, const ConceptVocab& vocab, const std::string& source) {
  if (vocab.concepts.empty()) throw ValidationError("featurize_with_selector: empty vocabulary");
  Eigen::MatrixXd values;
  for (std::size_t i = 0; i < vocab.concepts.size(); ++i) {
    const auto& term = vocab.concepts[i];
    const auto& model_id = selector.model_for(term);
    const auto it = generators_by_model.find(model_id);
    if (it == generators_by_model.end()) {
      throw ValidationError("no generator registered for model '" + model_id + "'");
    }
    const auto ft = it->second->generate(term, build_prompt(term));
    const auto vec = embedder.embed(ft.text);
    if (values.size() == 0) {
      values.resize(static_cast<Eigen::Index>(vocab.concepts.size()),
                    static_cast<Eigen::Index>(vec.size()));
    } else if (static_cast<Eigen::Index>(vec.size()) != values.cols()) {
      throw ValidationError("featurize_with_selector: inconsistent embedding dimensions");
    }
    for (std::size_t j = 0; j < vec.size(); ++j) {
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = vec[j];
    }
  }
  return EmbeddingMatrix{source, std::move(values)};
}

}  // namespace qclp
