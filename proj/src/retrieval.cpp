#include "alter/retrieval.hpp"

#include <algorithm>
#include <set>

#include "alter/errors.hpp"
#include "alter/gateway.hpp"
#include "alter/kernels.hpp"
#include "alter/profiler.hpp"
#include "alter/prompts.hpp"
#include "alter/tokenizer.hpp"

namespace alter {

namespace {

std::shared_ptr<const std::vector<EmbeddingVector>> embed_rows(const Table& table,
                                                               const Embedder& embedder) {
  const auto texts = kernels::row_texts(table);
  auto vectors = std::make_shared<std::vector<EmbeddingVector>>(embedder.embed(texts));
  if (vectors->size() != texts.size()) {
    throw DimensionMismatchError("embedder returned a different number of vectors");
  }
  return vectors;
}

}  // namespace

std::shared_ptr<const std::vector<EmbeddingVector>> RowEmbeddingCache::get(
    const Table& table, const Embedder& embedder) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = entries_.find(table.id()); it != entries_.end()) return it->second;
  }
  auto vectors = embed_rows(table, embedder);
  std::lock_guard lock(mutex_);
  return entries_.try_emplace(table.id(), std::move(vectors)).first->second;
}

std::vector<std::size_t> sample_rows(const Table& table, std::string_view query,
                                     const SamplerConfig& config, const Embedder& embedder,
                                     RowEmbeddingCache* cache) {
  if (table.row_count() == 0) throw EmptyTableError("cannot sample rows of an empty table");
  if (config.k == 0) return {};
  const std::vector<std::string> query_text{std::string(query)};
  const auto query_vec = embedder.embed(query_text);
  if (query_vec.size() != 1) throw DimensionMismatchError("query embedding missing");
  const auto rows = cache ? cache->get(table, embedder) : embed_rows(table, embedder);
  for (const auto& row : *rows) {
    if (row.dimension() != query_vec.front().dimension()) {
      throw DimensionMismatchError("row and query embeddings differ in dimension");
    }
  }
  const auto scores = kernels::cosine_scores(query_vec.front(), *rows);
  return kernels::top_k(scores, config.k);
}

std::vector<std::string> parse_column_response(std::string_view response, const Table& table) {
  std::string_view body = response;
  // Prefer the last `Columns:` line when present.
  const std::string lower = to_lower(response);
  if (auto pos = lower.rfind("columns:"); pos != std::string::npos) {
    body = response.substr(pos + 8);
    if (auto nl = body.find('\n'); nl != std::string_view::npos) body = body.substr(0, nl);
  }
  std::set<std::size_t> picked;
  std::string item;
  auto flush = [&] {
    std::string_view name = trim(item);
    while (!name.empty() && std::string_view("-*`\"'[]()").find(name.front()) != std::string_view::npos) {
      name.remove_prefix(1);
    }
    while (!name.empty() && std::string_view("`\"'[]().").find(name.back()) != std::string_view::npos) {
      name.remove_suffix(1);
    }
    if (auto col = table.resolve_column(name)) picked.insert(*col);
    item.clear();
  };
  for (char c : body) {
    if (c == ',' || c == '\n' || c == ';') {
      flush();
    } else {
      item.push_back(c);
    }
  }
  flush();
  std::vector<std::string> names;
  for (std::size_t c : picked) names.push_back(table.column(c).sanitized_name);
  return names;
}

std::vector<std::string> filter_columns(const TablePtr& table, std::string_view query,
                                        const TableAugmentation* aug,
                                        std::span<const std::size_t> sampled, Gateway& gateway,
                                        const PromptLibrary& prompts) {
  const SubTableView view(table, std::vector<std::size_t>(sampled.begin(), sampled.end()),
                          table->sanitized_names());
  const std::string html = serialize_html(view);
  std::string schema_block = "(not available)";
  std::string semantic_block = "(not available)";
  std::size_t table_tokens = count_tokens(html);
  if (aug != nullptr) {
    schema_block = render_schema_block(*aug, *table);
    semantic_block = render_semantic_block(*aug, *table);
    table_tokens += count_tokens(schema_block) + count_tokens(semantic_block);
  }
  ChatRequest request;
  request.stage = Stage::col_filter;
  request.prompt = prompts.render("col_filter", {{"schema_aug", schema_block},
                                                 {"semantic_aug", semantic_block},
                                                 {"sub_table", html},
                                                 {"query", std::string(query)}});
  request.table_tokens = table_tokens;
  auto names = parse_column_response(gateway.complete_one(request), *table);
  if (names.empty()) names = table->sanitized_names();
  return names;
}

SubTableView make_view(const TablePtr& table, std::vector<std::size_t> rows,
                       const std::vector<std::string>& columns) {
  std::vector<std::size_t> indices;
  for (const auto& name : columns) {
    auto index = table->find_column(name);
    if (!index) throw UnknownColumnError("unknown column '" + name + "'");
    indices.push_back(*index);
  }
  std::sort(indices.begin(), indices.end());
  if (std::adjacent_find(indices.begin(), indices.end()) != indices.end()) {
    throw UnknownColumnError("duplicate column in view");
  }
  std::vector<std::string> ordered;
  for (std::size_t c : indices) ordered.push_back(table->column(c).sanitized_name);
  return SubTableView(table, std::move(rows), std::move(ordered));
}

}  // namespace alter
