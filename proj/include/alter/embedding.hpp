#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace alter {

struct EmbeddingVector {
  std::vector<double> values;
  std::size_t dimension() const noexcept { return values.size(); }
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  /// One vector per text, in input order.
  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const = 0;
};

inline constexpr std::size_t kFallbackDimension = 256;

/// Hashed bag of lowercase word/digit tokens (punctuation dropped) with a sign
/// hash, L2-normalized. Text without tokens maps to the zero vector.
EmbeddingVector fallback_embed(std::string_view text);

class FallbackEmbedder final : public Embedder {
 public:
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override;
};

/// Zero when either vector has zero norm.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

}  // namespace alter
