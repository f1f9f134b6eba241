#pragma once

// Data-parallel kernels for row retrieval. Each OpenMP kernel has a serial
// twin with identical per-element arithmetic; tests hold them bit-equal and
// bench/ compares their throughput.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "alter/embedding.hpp"
#include "alter/table.hpp"

namespace alter::kernels {

std::vector<std::string> row_texts(const Table& table);
std::vector<std::string> row_texts_serial(const Table& table);

std::vector<EmbeddingVector> embed_fallback(std::span<const std::string> texts);
std::vector<EmbeddingVector> embed_fallback_serial(std::span<const std::string> texts);

std::vector<double> cosine_scores(const EmbeddingVector& query,
                                  std::span<const EmbeddingVector> rows);
std::vector<double> cosine_scores_serial(const EmbeddingVector& query,
                                         std::span<const EmbeddingVector> rows);

/// Indices of the min(k, n) highest scores, by descending score then ascending index.
std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k);

}  // namespace alter::kernels
