#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alter/embedding.hpp"
#include "alter/table.hpp"

namespace alter {

class Gateway;
class PromptLibrary;
class TableAugmentation;

struct SamplerConfig {
  std::size_t k = 3;
};

/// Row embeddings keyed by table id, shared across queries on the same table.
class RowEmbeddingCache {
 public:
  std::shared_ptr<const std::vector<EmbeddingVector>> get(const Table& table,
                                                          const Embedder& embedder);

 private:
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const std::vector<EmbeddingVector>>, std::less<>> entries_;
};

/// Top-k rows by cosine similarity between the query and each row's text,
/// highest first, ties by ascending index.
std::vector<std::size_t> sample_rows(const Table& table, std::string_view query,
                                     const SamplerConfig& config, const Embedder& embedder,
                                     RowEmbeddingCache* cache = nullptr);

/// Valid column names mentioned in a model response, in table order.
std::vector<std::string> parse_column_response(std::string_view response, const Table& table);

/// Asks the model for the relevant columns. Never empty: falls back to all
/// columns when nothing valid comes back. `aug` may be null (augmentation off).
std::vector<std::string> filter_columns(const TablePtr& table, std::string_view query,
                                        const TableAugmentation* aug,
                                        std::span<const std::size_t> sampled, Gateway& gateway,
                                        const PromptLibrary& prompts);

/// Column order follows the table regardless of the order given.
SubTableView make_view(const TablePtr& table, std::vector<std::size_t> rows,
                       const std::vector<std::string>& columns);

}  // namespace alter
