#pragma once

#include <optional>
#include <string>

#include "alter/embedding.hpp"
#include "alter/gateway.hpp"

namespace alter {

/// OpenAI-compatible endpoint settings read from the environment:
/// ALTER_API_BASE (e.g. https://api.openai.com/v1), ALTER_API_KEY,
/// ALTER_MODEL, ALTER_EMBED_MODEL.
struct EndpointConfig {
  std::string base_url;
  std::string api_key;
  std::string model = "gpt-3.5-turbo";
  std::string embedding_model = "bge-large-en-v1.5";
  int timeout_seconds = 120;

  static std::optional<EndpointConfig> from_env();
};

/// POSTs `{base}/chat/completions`.
class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(EndpointConfig config);
  std::vector<std::string> send(const ChatRequest& request) override;

 private:
  EndpointConfig config_;
};

/// POSTs `{base}/embeddings`; all returned vectors must share one dimension.
class HttpEmbedder final : public Embedder {
 public:
  explicit HttpEmbedder(EndpointConfig config);
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override;

 private:
  EndpointConfig config_;
};

}  // namespace alter
