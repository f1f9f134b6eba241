#include "alter/http_transport.hpp"

#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "alter/errors.hpp"

namespace alter {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing slash
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw TransportError("malformed API base URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = url.substr(0, path_start);
  out.prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

nlohmann::json post_json(const EndpointConfig& config, const std::string& route,
                         const nlohmann::json& body) {
  const SplitUrl url = split_url(config.base_url);
  httplib::Client client(url.origin);
  client.set_connection_timeout(config.timeout_seconds, 0);
  client.set_read_timeout(config.timeout_seconds, 0);
  client.set_bearer_token_auth(config.api_key);
  auto res = client.Post(url.prefix + route, body.dump(), "application/json");
  if (!res) {
    throw TransportError("request to " + route + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw TransportError("HTTP " + std::to_string(res->status) + " from " + route + ": " +
                         res->body.substr(0, 300));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("unparseable response body: ") + e.what());
  }
}

}  // namespace

std::optional<EndpointConfig> EndpointConfig::from_env() {
  const char* base = std::getenv("ALTER_API_BASE");
  const char* key = std::getenv("ALTER_API_KEY");
  if (base == nullptr || key == nullptr || *base == '\0' || *key == '\0') return std::nullopt;
  EndpointConfig config;
  config.base_url = base;
  config.api_key = key;
  if (const char* model = std::getenv("ALTER_MODEL"); model && *model) config.model = model;
  if (const char* model = std::getenv("ALTER_EMBED_MODEL"); model && *model) {
    config.embedding_model = model;
  }
  return config;
}

HttpTransport::HttpTransport(EndpointConfig config) : config_(std::move(config)) {}

std::vector<std::string> HttpTransport::send(const ChatRequest& request) {
  nlohmann::json body = {
      {"model", config_.model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
      {"temperature", request.temperature},
      {"n", request.n_samples},
  };
  const auto reply = post_json(config_, "/chat/completions", body);
  std::vector<std::string> out;
  try {
    for (const auto& choice : reply.at("choices")) {
      const auto& content = choice.at("message").at("content");
      out.push_back(content.is_string() ? content.get<std::string>() : std::string{});
    }
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("unexpected chat response shape: ") + e.what());
  }
  return out;
}

HttpEmbedder::HttpEmbedder(EndpointConfig config) : config_(std::move(config)) {}

std::vector<EmbeddingVector> HttpEmbedder::embed(std::span<const std::string> texts) const {
  std::vector<EmbeddingVector> out;
  if (texts.empty()) return out;
  constexpr std::size_t kBatch = 256;
  for (std::size_t start = 0; start < texts.size(); start += kBatch) {
    const std::size_t end = std::min(texts.size(), start + kBatch);
    nlohmann::json input = nlohmann::json::array();
    for (std::size_t i = start; i < end; ++i) input.push_back(texts[i]);
    const auto reply =
        post_json(config_, "/embeddings", {{"model", config_.embedding_model}, {"input", input}});
    try {
      for (const auto& item : reply.at("data")) {
        out.push_back(EmbeddingVector{item.at("embedding").get<std::vector<double>>()});
      }
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("unexpected embedding response shape: ") + e.what());
    }
  }
  if (out.size() != texts.size()) throw TransportError("embedding count mismatch");
  for (const auto& v : out) {
    if (v.dimension() == 0 || v.dimension() != out.front().dimension()) {
      throw DimensionMismatchError("embedding backend returned inconsistent dimensions");
    }
  }
  return out;
}

}  // namespace alter
