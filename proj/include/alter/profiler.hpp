#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alter/table.hpp"

namespace alter {

class Gateway;
class PromptLibrary;

enum class SchemaType { Numerical, Char, Date };

std::string_view schema_type_name(SchemaType type);
/// Case-insensitive; accepts a few synonyms ("number", "text", "time", ...).
std::optional<SchemaType> parse_schema_type(std::string_view text);

struct ColumnStats {
  std::size_t distinct_count = 0;
  std::size_t empty_count = 0;
  std::optional<double> numeric_min;
  std::optional<double> numeric_max;

  friend bool operator==(const ColumnStats&, const ColumnStats&) = default;
};

struct ColumnAugmentation {
  std::string column;  // sanitized name
  std::string raw_name;
  SchemaType schema_type = SchemaType::Char;
  std::string semantic_description;
  std::string literal_format;
  ColumnStats stats;

  friend bool operator==(const ColumnAugmentation&, const ColumnAugmentation&) = default;
};

/// Per-column schema, semantic and literal information plus a table summary.
class TableAugmentation {
 public:
  TableAugmentation(std::string table_id, std::string global_summary,
                    std::vector<ColumnAugmentation> columns);

  const std::string& table_id() const noexcept { return table_id_; }
  const std::string& global_summary() const noexcept { return global_summary_; }
  const std::vector<ColumnAugmentation>& columns() const noexcept { return columns_; }

  const ColumnAugmentation* find(std::string_view sanitized) const;
  /// Throws MissingAugmentationError.
  const ColumnAugmentation& at(std::string_view sanitized) const;
  /// Column key set equals the table's sanitized names, in order.
  bool covers(const Table& table) const;

  friend bool operator==(const TableAugmentation&, const TableAugmentation&) = default;

 private:
  std::string table_id_;
  std::string global_summary_;
  std::vector<ColumnAugmentation> columns_;
};

inline constexpr double kTypeMajority = 0.8;
inline constexpr std::size_t kLiteralSampleCap = 64;
inline constexpr std::size_t kAugmentationPromptRows = 5;

/// Numerical when at least 80% of non-empty cells parse as numbers, else Date
/// at the same threshold, else Char. Throws EmptyColumnError on an all-empty column.
SchemaType infer_schema_type(const Column& column);

/// Top cell shapes (letters -> A, digits -> 9, rest literal) over at most
/// `sample_cap` evenly spaced non-empty cells, e.g. `A 99-99 (100%)`.
std::string mine_literal_format(const Column& column, std::size_t sample_cap = kLiteralSampleCap);

ColumnStats column_stats(const Column& column, SchemaType type);

enum class AugmentMode { deterministic_only, llm_enriched };

/// `gateway` may be null in deterministic_only mode.
TableAugmentation augment_table(const Table& table, Gateway* gateway, AugmentMode mode,
                                const PromptLibrary& prompts);

/// Rows shown to the augmentation prompts: up to `cap` evenly spaced indices.
std::vector<std::size_t> spread_rows(std::size_t row_count, std::size_t cap);

std::string augmentation_to_json(const TableAugmentation& aug);
/// Throws SchemaVersionError on malformed or incompatible documents.
TableAugmentation augmentation_from_json(std::string_view text);

std::filesystem::path augmentation_path(std::string_view table_id,
                                        const std::filesystem::path& cache_dir);
/// Atomic write-temp-then-rename into `<cache_dir>/<table_id>.aug.json`.
void store_augmentation(const TableAugmentation& aug, const std::filesystem::path& cache_dir);
/// Absent when the file does not exist.
std::optional<TableAugmentation> load_augmentation(std::string_view table_id,
                                                   const std::filesystem::path& cache_dir);

// Prompt fragments built from an augmentation.
std::string render_schema_block(const TableAugmentation& aug, const Table& table);
std::string render_semantic_block(const TableAugmentation& aug, const Table& table);
std::string render_column_details(const TableAugmentation& aug, const Table& table,
                                  std::span<const std::size_t> columns);
std::string render_column_names(const Table& table, std::span<const std::size_t> columns);

}  // namespace alter
