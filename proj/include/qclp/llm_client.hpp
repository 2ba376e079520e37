#pragma once

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <atomic>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qclp/errors.hpp"
#include "qclp/sha256.hpp"

namespace qclp {

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Seam between the client and the network; tests drive the client with
// scripted transports and the CLI plugs in the real one.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& path, const std::string& body,
                            const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

struct LlmClientConfig {
  std::string endpoint;              // scheme://host[:port]
  std::string model_id;
  int max_tokens = 512;
  double timeout_seconds = 30.0;
  int max_retries = 3;
  double rate_limit = 4.0;           // requests per second
  std::string api_key_env = "QCLP_LLM_API_KEY";
  double backoff_base_seconds = 0.25;
  bool fixtures_only = false;
};

// Response field locations are adapter data, not per-provider code paths.
struct ProviderAdapter {
  std::string chat_path = "/v1/chat/completions";
  std::string embed_path = "/v1/embeddings";
  std::string chat_text_pointer = "/choices/0/message/content";
  std::string embed_vector_pointer = "/data/0/embedding";
};

struct FeatureText {
  std::string term;
  std::string model_id;
  std::string prompt;
  std::string text;
  std::string fetched_at;
};

// One JSON file per key under cache_dir; the key is already a SHA-256 hex.
class DiskCache {
 public:
  explicit DiskCache(std::string cache_dir) : dir_(std::move(cache_dir)) {
    std::filesystem::create_directories(dir_);
  }

  std::filesystem::path path_for(const std::string& key_hex) const {
    return std::filesystem::path(dir_) / (key_hex + ".json");
  }

  std::optional<nlohmann::json> get(const std::string& key_hex) const {
    std::ifstream in(path_for(key_hex));
    if (!in) return std::nullopt;
    return nlohmann::json::parse(in);
  }

  // Last-writer-wins is fine: payloads for a key are identical. A unique
  // temp name plus rename keeps concurrent writers from exposing partials.
  void put(const std::string& key_hex, const nlohmann::json& value) const {
    static std::atomic<std::uint64_t> counter{0};
    const auto final_path = path_for(key_hex);
    const auto tmp_path =
        final_path.string() + ".tmp" + std::to_string(counter.fetch_add(1));
    {
      std::ofstream out(tmp_path);
      if (!out) throw std::runtime_error("cannot write cache file: " + tmp_path);
      out << value.dump(2) << '\n';
    }
    std::filesystem::rename(tmp_path, final_path);
  }

  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
};

inline std::string default_cache_dir() {
  if (const char* env = std::getenv("QCLP_CACHE_DIR")) return env;
  return ".qclp_cache";
}

inline std::string generation_cache_key(const std::string& model_id, const std::string& prompt) {
  return sha256_hex(model_id + prompt);
}

inline std::string embedding_cache_key(const std::string& embedder_id, const std::string& text) {
  return sha256_hex(embedder_id + text);
}

namespace detail {

inline std::string now_utc_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

// Text generation + embedding with disk caching, retries with exponential
// backoff, a simple request-rate limiter, and a fixtures-only mode that must
// never touch the transport.
class LlmClient {
 public:
  LlmClient(LlmClientConfig cfg, std::shared_ptr<HttpTransport> transport, DiskCache cache,
            ProviderAdapter adapter = {})
      : cfg_(std::move(cfg)),
        transport_(std::move(transport)),
        cache_(std::move(cache)),
        adapter_(std::move(adapter)) {}

  const LlmClientConfig& config() const { return cfg_; }
  const DiskCache& cache() const { return cache_; }

  // Cache hit returns the stored text without any network activity.
  FeatureText generate(const std::string& term, const std::string& prompt) {
    const std::string key = generation_cache_key(cfg_.model_id, prompt);
    if (auto hit = cache_.get(key)) {
      return {term, cfg_.model_id, prompt, hit->at("text").get<std::string>(),
              hit->value("fetched_at", "")};
    }
    if (cfg_.fixtures_only) {
      throw FixtureMissingError("fixture missing for generation key " + key + " (model " +
                                cfg_.model_id + ", concept '" + term + "')");
    }
    nlohmann::json request = {
        {"model", cfg_.model_id},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
        {"max_tokens", cfg_.max_tokens}};
    const auto response = post_with_retries(adapter_.chat_path, request.dump());
    std::string text;
    try {
      text = nlohmann::json::parse(response.body)
                 .at(nlohmann::json::json_pointer(adapter_.chat_text_pointer))
                 .get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("malformed generation response: ") + e.what());
    }
    if (text.empty()) throw TransportError("generation returned empty text");
    FeatureText ft{term, cfg_.model_id, prompt, text, detail::now_utc_iso8601()};
    cache_.put(key, {{"model_id", ft.model_id},
                     {"prompt", ft.prompt},
                     {"text", ft.text},
                     {"fetched_at", ft.fetched_at}});
    return ft;
  }

  std::vector<double> embed(const std::string& text) {
    if (text.empty()) throw ValidationError("embed: text must be non-empty");
    const std::string key = embedding_cache_key(cfg_.model_id, text);
    if (auto hit = cache_.get(key)) return hit->at("embedding").get<std::vector<double>>();
    if (cfg_.fixtures_only) {
      throw FixtureMissingError("fixture missing for embedding key " + key + " (embedder " +
                                cfg_.model_id + ")");
    }
    nlohmann::json request = {{"model", cfg_.model_id}, {"input", text}};
    const auto response = post_with_retries(adapter_.embed_path, request.dump());
    std::vector<double> vec;
    try {
      vec = nlohmann::json::parse(response.body)
                .at(nlohmann::json::json_pointer(adapter_.embed_vector_pointer))
                .get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("malformed embedding response: ") + e.what());
    }
    if (vec.empty()) throw TransportError("embedding response held no vector");
    cache_.put(key, {{"embedder_id", cfg_.model_id},
                     {"text", text},
                     {"embedding", vec},
                     {"fetched_at", detail::now_utc_iso8601()}});
    return vec;
  }

 private:
  HttpResponse post_with_retries(const std::string& path, const std::string& body) {
    std::vector<std::pair<std::string, std::string>> headers = {
        {"Content-Type", "application/json"}};
    if (const char* key = std::getenv(cfg_.api_key_env.c_str())) {
      headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }
    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      if (attempt > 0) {
        const double delay = cfg_.backoff_base_seconds * std::pow(2.0, attempt - 1);
        std::this_thread::sleep_for(std::chrono::duration<double>(delay));
      }
      throttle();
      HttpResponse resp;
      try {
        resp = transport_->post(path, body, headers);
      } catch (const std::exception& e) {
        last_error = e.what();
        continue;
      }
      if (resp.status == 200) return resp;
      last_error = "HTTP " + std::to_string(resp.status);
      if (resp.status != 429 && resp.status < 500) break;  // non-retryable client error
    }
    throw TransportError("request to " + path + " failed after retries: " + last_error);
  }

  void throttle() {
    if (cfg_.rate_limit <= 0) return;
    std::lock_guard<std::mutex> lock(throttle_mu_);
    const auto min_gap = std::chrono::duration<double>(1.0 / cfg_.rate_limit);
    const auto now = std::chrono::steady_clock::now();
    if (last_request_.time_since_epoch().count() != 0 && now - last_request_ < min_gap) {
      std::this_thread::sleep_for(min_gap - (now - last_request_));
    }
    last_request_ = std::chrono::steady_clock::now();
  }

  LlmClientConfig cfg_;
  std::shared_ptr<HttpTransport> transport_;
  DiskCache cache_;
  ProviderAdapter adapter_;
  std::mutex throttle_mu_;
  std::chrono::steady_clock::time_point last_request_;
};

}  // namespace qclp
