#include <catch2/catch_amalgamated.hpp>

#include <deque>

#include "qclp/llm_client.hpp"
#include "qclp/llm_features.hpp"
#include "qclp/sha256.hpp"
#include "testutil.hpp"

using namespace qclp;

namespace {

// Replays a fixed response sequence and records every call.
class ScriptedTransport : public HttpTransport {
 public:
  explicit ScriptedTransport(std::deque<HttpResponse> script) : script_(std::move(script)) {}

  HttpResponse post(const std::string& path, const std::string& body,
                    const std::vector<std::pair<std::string, std::string>>&) override {
    ++calls;
    paths.push_back(path);
    bodies.push_back(body);
    if (script_.empty()) throw TransportError("scripted transport exhausted");
    auto r = script_.front();
    script_.pop_front();
    return r;
  }

  int calls = 0;
  std::vector<std::string> paths;
  std::vector<std::string> bodies;

 private:
  std::deque<HttpResponse> script_;
};

std::string chat_body(const std::string& text) {
  nlohmann::json j = {{"choices", {{{"message", {{"content", text}}}}}}};
  return j.dump();
}

std::string embed_body(const std::vector<double>& vec) {
  nlohmann::json j = {{"data", {{{"embedding", vec}}}}};
  return j.dump();
}

LlmClientConfig quick_config(const std::string& model, bool fixtures_only = false) {
  LlmClientConfig cfg;
  cfg.endpoint = "http://localhost:1";
  cfg.model_id = model;
  cfg.max_retries = 2;
  cfg.rate_limit = 0;  // no throttling in tests
  cfg.backoff_base_seconds = 0.001;
  cfg.fixtures_only = fixtures_only;
  return cfg;
}

}  // namespace

TEST_CASE("sha256 matches published vectors", "[llm]") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("prompt template is exact", "[llm]") {
  CHECK(build_prompt("quasiparticle") ==
        "What are the features of quasiparticle in quantum computing?");
  CHECK(build_prompt("transmon") == "What are the features of transmon in quantum computing?");
  CHECK_THROWS_AS(build_prompt(""), ValidationError);
}

TEST_CASE("summarize prompt joins texts in ascending model-id order", "[llm]") {
  const auto prompt = build_summarize_prompt(
      "transmon", {{"model-b", "t2"}, {"model-a", "t1"}, {"model-c", "t3"}});
  CHECK(prompt == "Summarize this text about the features of transmon. Text: t1\n\nt2\n\nt3");
  CHECK_THROWS_AS(build_summarize_prompt("transmon", {{"m", "only one"}}), ValidationError);
  CHECK_THROWS_AS(build_summarize_prompt("", {{"a", "x"}, {"b", "y"}}), ValidationError);
}

TEST_CASE("pooling matches hand arithmetic and stays within bounds", "[llm]") {
  CHECK(mean_pool({{1, 3}, {3, 1}}) == std::vector<double>{2, 2});
  CHECK(max_pool({{1, 3}, {3, 1}}) == std::vector<double>{3, 3});

  const std::vector<double> v{0.5, -1.0, 2.0};
  CHECK(mean_pool({v, v, v}) == v);
  CHECK(max_pool({v, v, v}) == v);

  CHECK_THROWS_AS(mean_pool({}), ValidationError);
  CHECK_THROWS_AS(mean_pool({{1, 2}, {1}}), ValidationError);
  CHECK_THROWS_AS(max_pool({{1, 2}, {1}}), ValidationError);

  Rng rng(77);
  std::vector<std::vector<double>> vs(4, std::vector<double>(6));
  for (auto& row : vs) {
    for (auto& x : row) x = rng.normal();
  }
  auto mean = mean_pool(vs);
  auto mx = max_pool(vs);
  auto shuffled = vs;
  rng.shuffle(shuffled);
  auto mean_shuffled = mean_pool(shuffled);
  for (std::size_t j = 0; j < 6; ++j) {  // permutation invariance (mean up to fp reassociation)
    CHECK_THAT(mean_shuffled[j], Catch::Matchers::WithinULP(mean[j], 4));
  }
  CHECK(max_pool(shuffled) == mx);
  for (std::size_t j = 0; j < 6; ++j) {
    double lo = vs[0][j], hi = vs[0][j];
    for (const auto& row : vs) {
      lo = std::min(lo, row[j]);
      hi = std::max(hi, row[j]);
    }
    CHECK(lo <= mean[j]);
    CHECK(mean[j] <= mx[j]);
    CHECK(mx[j] == hi);
  }
}

TEST_CASE("generation caches and never re-contacts the server", "[llm]") {
  testutil::TempDir dir("cache");
  auto transport = std::make_shared<ScriptedTransport>(
      std::deque<HttpResponse>{{200, chat_body("feature text")}});
  LlmClient client(quick_config("model-x"), transport, DiskCache(dir.path().string()));

  const auto prompt = build_prompt("transmon");
  auto first = client.generate("transmon", prompt);
  CHECK(first.text == "feature text");
  CHECK(transport->calls == 1);

  auto second = client.generate("transmon", prompt);
  CHECK(second.text == "feature text");
  CHECK(transport->calls == 1);  // served from cache

  // Cache layout: <dir>/<sha256(model_id + prompt)>.json with key fields.
  const auto key = generation_cache_key("model-x", prompt);
  CHECK(key == sha256_hex("model-x" + prompt));
  std::ifstream in(dir.path() / (key + ".json"));
  REQUIRE(in.good());
  auto entry = nlohmann::json::parse(in);
  CHECK(entry.at("model_id") == "model-x");
  CHECK(entry.at("prompt") == prompt);
  CHECK(entry.at("text") == "feature text");
  CHECK(entry.contains("fetched_at"));
}

TEST_CASE("request body carries model, prompt, and token cap", "[llm]") {
  testutil::TempDir dir("cache");
  auto transport =
      std::make_shared<ScriptedTransport>(std::deque<HttpResponse>{{200, chat_body("ok")}});
  auto cfg = quick_config("model-y");
  cfg.max_tokens = 512;
  LlmClient client(cfg, transport, DiskCache(dir.path().string()));
  client.generate("qubit", build_prompt("qubit"));
  REQUIRE(transport->bodies.size() == 1);
  auto body = nlohmann::json::parse(transport->bodies[0]);
  CHECK(body.at("model") == "model-y");
  CHECK(body.at("max_tokens") == 512);
  CHECK(body.at("messages")[0].at("content") == build_prompt("qubit"));
  CHECK(transport->paths[0] == "/v1/chat/completions");
}

TEST_CASE("fixtures-only mode performs zero network operations", "[llm]") {
  testutil::TempDir dir("cache");
  DiskCache cache(dir.path().string());
  const auto prompt = build_prompt("qubit");
  cache.put(generation_cache_key("model-x", prompt),
            {{"model_id", "model-x"}, {"prompt", prompt}, {"text", "stored"}, {"fetched_at", ""}});

  auto transport = std::make_shared<ScriptedTransport>(std::deque<HttpResponse>{});
  LlmClient client(quick_config("model-x", /*fixtures_only=*/true), transport,
                   DiskCache(dir.path().string()));

  CHECK(client.generate("qubit", prompt).text == "stored");
  CHECK(transport->calls == 0);

  const auto missing_prompt = build_prompt("anyon");
  CHECK_THROWS_WITH(client.generate("anyon", missing_prompt),
                    Catch::Matchers::ContainsSubstring(
                        generation_cache_key("model-x", missing_prompt)));
  CHECK_THROWS_AS(client.generate("anyon", missing_prompt), FixtureMissingError);
  CHECK(transport->calls == 0);  // miss must not fall back to the network
  CHECK_THROWS_AS(client.embed("no fixture"), FixtureMissingError);
  CHECK(transport->calls == 0);
}

TEST_CASE("429 responses back off and then succeed with one cache entry", "[llm]") {
  testutil::TempDir dir("cache");
  auto transport = std::make_shared<ScriptedTransport>(std::deque<HttpResponse>{
      {429, "slow down"}, {429, "slow down"}, {200, chat_body("recovered")}});
  LlmClient client(quick_config("model-x"), transport, DiskCache(dir.path().string()));
  auto ft = client.generate("qubit", build_prompt("qubit"));
  CHECK(ft.text == "recovered");
  CHECK(transport->calls == 3);
  int entries = 0;
  for (const auto& p : std::filesystem::directory_iterator(dir.path())) {
    (void)p;
    ++entries;
  }
  CHECK(entries == 1);
}

TEST_CASE("exhausted retries and non-retryable statuses raise transport errors", "[llm]") {
  testutil::TempDir dir("cache");
  {
    auto transport = std::make_shared<ScriptedTransport>(
        std::deque<HttpResponse>{{500, "x"}, {500, "x"}, {500, "x"}});
    LlmClient client(quick_config("model-x"), transport, DiskCache(dir.path().string()));
    CHECK_THROWS_AS(client.generate("qubit", build_prompt("qubit")), TransportError);
    CHECK(transport->calls == 3);  // initial + max_retries
  }
  {
    auto transport =
        std::make_shared<ScriptedTransport>(std::deque<HttpResponse>{{400, "bad request"}});
    LlmClient client(quick_config("model-x"), transport, DiskCache(dir.path().string()));
    CHECK_THROWS_AS(client.generate("anyon", build_prompt("anyon")), TransportError);
    CHECK(transport->calls == 1);  // 4xx (not 429) is not retried
  }
}

TEST_CASE("embedding calls cache vectors and validate input", "[llm]") {
  testutil::TempDir dir("cache");
  const std::vector<double> vec{0.25, -0.5, 1.0};
  auto transport =
      std::make_shared<ScriptedTransport>(std::deque<HttpResponse>{{200, embed_body(vec)}});
  LlmClient client(quick_config("embedder-1"), transport, DiskCache(dir.path().string()));

  CHECK_THROWS_AS(client.embed(""), ValidationError);
  CHECK(client.embed("some feature text") == vec);
  CHECK(client.embed("some feature text") == vec);  // cache hit
  CHECK(transport->calls == 1);
  CHECK(embedding_cache_key("embedder-1", "t") == sha256_hex("embedder-1t"));
}

TEST_CASE("malformed responses surface as transport errors", "[llm]") {
  testutil::TempDir dir("cache");
  auto transport = std::make_shared<ScriptedTransport>(
      std::deque<HttpResponse>{{200, "{\"unexpected\":true}"}});
  LlmClient client(quick_config("model-x"), transport, DiskCache(dir.path().string()));
  CHECK_THROWS_AS(client.generate("qubit", build_prompt("qubit")), TransportError);
}

TEST_CASE("summarize_merge issues the template and caches like any text", "[llm]") {
  testutil::TempDir dir("cache");
  auto transport =
      std::make_shared<ScriptedTransport>(std::deque<HttpResponse>{{200, chat_body("summary")}});
  LlmClient client(quick_config("summarizer"), transport, DiskCache(dir.path().string()));
  auto ft = summarize_merge(client, "transmon", {{"m2", "beta"}, {"m1", "alpha"}});
  CHECK(ft.text == "summary");
  auto body = nlohmann::json::parse(transport->bodies.at(0));
  CHECK(body.at("messages")[0].at("content") ==
        "Summarize this text about the features of transmon. Text: alpha\n\nbeta");
}

TEST_CASE("featurize_vocab stacks one row per concept in id order", "[llm]") {
  testutil::TempDir dir("cache");
  DiskCache cache(dir.path().string());
  auto vocab = ConceptVocab::from_concepts({"alpha decay", "qubit", "transmon"});
  // Pre-recorded fixtures: text per concept, vector per text.
  for (std::size_t i = 0; i < vocab.concepts.size(); ++i) {
    const auto& term = vocab.concepts[i];
    const auto prompt = build_prompt(term);
    cache.put(generation_cache_key("gen", prompt),
              {{"model_id", "gen"}, {"prompt", prompt}, {"text", "text:" + term}, {"fetched_at", ""}});
    cache.put(embedding_cache_key("emb", "text:" + term),
              {{"embedder_id", "emb"},
               {"text", "text:" + term},
               {"embedding", {static_cast<double>(i), 1.0, 2.0, 3.0}},
               {"fetched_at", ""}});
  }
  auto transport = std::make_shared<ScriptedTransport>(std::deque<HttpResponse>{});
  LlmClient generator(quick_config("gen", true), transport, DiskCache(dir.path().string()));
  LlmClient embedder(quick_config("emb", true), transport, DiskCache(dir.path().string()));
  auto emb = featurize_vocab(generator, embedder, vocab, "gen");
  REQUIRE(emb.rows() == 3);
  REQUIRE(emb.cols() == 4);
  for (int i = 0; i < 3; ++i) CHECK(emb.values(i, 0) == i);
  CHECK(emb.source == "gen");
  CHECK(transport->calls == 0);
}

TEST_CASE("selector replays an external per-concept model assignment", "[llm]") {
  testutil::TempDir dir("cache");
  DiskCache cache(dir.path().string());
  auto vocab = ConceptVocab::from_concepts({"qubit", "transmon"});
  for (const auto& [term, model] :
       std::vector<std::pair<std::string, std::string>>{{"qubit", "m1"}, {"transmon", "m2"}}) {
    const auto prompt = build_prompt(term);
    cache.put(generation_cache_key(model, prompt),
              {{"model_id", model}, {"prompt", prompt}, {"text", model + ":" + term}, {"fetched_at", ""}});
    cache.put(embedding_cache_key("emb", model + ":" + term),
              {{"embedder_id", "emb"},
               {"text", model + ":" + term},
               {"embedding", {model == "m1" ? 1.0 : 2.0}},
               {"fetched_at", ""}});
  }
  auto transport = std::make_shared<ScriptedTransport>(std::deque<HttpResponse>{});
  LlmClient gen1(quick_config("m1", true), transport, DiskCache(dir.path().string()));
  LlmClient gen2(quick_config("m2", true), transport, DiskCache(dir.path().string()));
  LlmClient embedder(quick_config("emb", true), transport, DiskCache(dir.path().string()));

  MapSelector selector({{"qubit", "m1"}, {"transmon", "m2"}}, "m1");
  std::map<std::string, LlmClient*> generators{{"m1", &gen1}, {"m2", &gen2}};
  auto emb = featurize_with_selector(generators, embedder, selector, vocab, "blend");
  REQUIRE(emb.rows() == 2);
  CHECK(emb.values(0, 0) == 1.0);
  CHECK(emb.values(1, 0) == 2.0);

  MapSelector unknown({{"qubit", "m9"}}, "m9");
  CHECK_THROWS_AS(featurize_with_selector(generators, embedder, unknown, vocab, "blend"),
                  ValidationError);
  CHECK(transport->calls == 0);
}
