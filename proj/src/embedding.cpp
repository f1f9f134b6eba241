#include "alter/embedding.hpp"

#include <cmath>
#include <cstdint>

#include "alter/cell.hpp"
#include "alter/kernels.hpp"
#include "alter/tokenizer.hpp"

namespace alter {

namespace {

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

EmbeddingVector fallback_embed(std::string_view text) {
  static const RuleTokenizer tokenizer;
  EmbeddingVector vec{std::vector<double>(kFallbackDimension, 0.0)};
  for (const auto& token : tokenizer.tokenize(text)) {
    if (token.size() == 1 && is_token_punct(static_cast<unsigned char>(token[0]))) continue;
    const std::uint64_t h = fnv1a(to_lower(token));
    const double sign = ((h >> 40) & 1U) ? -1.0 : 1.0;
    vec.values[h % kFallbackDimension] += sign;
  }
  double norm_sq = 0.0;
  for (double v : vec.values) norm_sq += v * v;
  if (norm_sq > 0.0) {
    const double norm = std::sqrt(norm_sq);
    for (double& v : vec.values) v /= norm;
  }
  return vec;
}

std::vector<EmbeddingVector> FallbackEmbedder::embed(std::span<const std::string> texts) const {
  return kernels::embed_fallback(texts);
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  const std::size_t n = std::min(a.values.size(), b.values.size());
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace alter
