#pragma once

// Live transport on cpp-httplib. Kept out of llm_client.hpp so tests with
// scripted transports do not pay for the TLS-capable header.

#include <memory>
#include <string>

#include <httplib.h>

#include "qclp/errors.hpp"
#include "qclp/llm_client.hpp"

namespace qclp {

class HttplibTransport : public HttpTransport {
 public:
  HttplibTransport(const std::string& base_url, double timeout_seconds)
      : client_(base_url) {
    client_.set_connection_timeout(std::chrono::duration<double>(timeout_seconds));
    client_.set_read_timeout(std::chrono::duration<double>(timeout_seconds));
    client_.set_write_timeout(std::chrono::duration<double>(timeout_seconds));
  }

  HttpResponse post(const std::string& path, const std::string& body,
                    const std::vector<std::pair<std::string, std::string>>& headers) override {
    httplib::Headers hl;
    std::string content_type = "application/json";
    for (const auto& [k, v] : headers) {
      if (k == "Content-Type") content_type = v;
      else hl.emplace(k, v);
    }
    auto result = client_.Post(path, hl, body, content_type);
    if (!result) {
      throw TransportError("connection to " + path + " failed: " + httplib::to_string(result.error()));
    }
    return {result->status, result->body};
  }

 private:
  httplib::Client client_;
};

inline std::shared_ptr<HttpTransport> make_live_transport(const LlmClientConfig& cfg) {
  return std::make_shared<HttplibTransport>(cfg.endpoint, cfg.timeout_seconds);
}

}  // namespace qclp
