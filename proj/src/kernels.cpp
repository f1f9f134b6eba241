#include "alter/kernels.hpp"

#include <algorithm>
#include <numeric>

namespace alter::kernels {

std::vector<std::string> row_texts(const Table& table) {
  const auto n = static_cast<std::ptrdiff_t>(table.row_count());
  std::vector<std::string> texts(table.row_count());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    texts[static_cast<std::size_t>(r)] = serialize_row_text(table, static_cast<std::size_t>(r));
  }
  return texts;
}

std::vector<std::string> row_texts_serial(const Table& table) {
  std::vector<std::string> texts(table.row_count());
  for (std::size_t r = 0; r < table.row_count(); ++r) texts[r] = serialize_row_text(table, r);
  return texts;
}

std::vector<EmbeddingVector> embed_fallback(std::span<const std::string> texts) {
  const auto n = static_cast<std::ptrdiff_t>(texts.size());
  std::vector<EmbeddingVector> out(texts.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = fallback_embed(texts[static_cast<std::size_t>(i)]);
  }
  return out;
}

std::vector<EmbeddingVector> embed_fallback_serial(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& text : texts) out.push_back(fallback_embed(text));
  return out;
}

std::vector<double> cosine_scores(const EmbeddingVector& query,
                                  std::span<const EmbeddingVector> rows) {
  const auto n = static_cast<std::ptrdiff_t>(rows.size());
  std::vector<double> scores(rows.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    scores[static_cast<std::size_t>(i)] = cosine_similarity(query, rows[static_cast<std::size_t>(i)]);
  }
  return scores;
}

std::vector<double> cosine_scores_serial(const EmbeddingVector& query,
                                         std::span<const EmbeddingVector> rows) {
  std::vector<double> scores;
  scores.reserve(rows.size());
  for (const auto& row : rows) scores.push_back(cosine_similarity(query, row));
  return scores;
}

std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = std::min(k, scores.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  order.resize(take);
  return order;
}

}  // namespace alter::kernels
