#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alter/cell.hpp"

namespace alter {

struct Column {
  std::string raw_name;
  std::string sanitized_name;
  std::vector<CellValue> cells;
};

/// Immutable, rectangular, column-major table.
class Table {
 public:
  /// Builds from a header and row-major cells. Duplicate or invalid names are
  /// sanitized and suffixed; rows must all match the header width.
  Table(std::string id, std::vector<std::string> header,
        std::vector<std::vector<std::string>> rows,
        std::optional<std::string> title = std::nullopt);

  const std::string& id() const noexcept { return id_; }
  const std::optional<std::string>& title() const noexcept { return title_; }
  std::size_t row_count() const noexcept { return row_count_; }
  std::size_t column_count() const noexcept { return columns_.size(); }
  std::size_t cell_count() const noexcept { return row_count_ * columns_.size(); }
  const std::vector<Column>& columns() const noexcept { return columns_; }
  const Column& column(std::size_t index) const { return columns_.at(index); }
  const std::string& cell(std::size_t row, std::size_t col) const;

  std::vector<std::string> raw_names() const;
  std::vector<std::string> sanitized_names() const;
  std::vector<std::string> row(std::size_t index) const;

  /// Exact match on the sanitized name.
  std::optional<std::size_t> find_column(std::string_view sanitized) const;
  /// Case-insensitive match on either the raw or the sanitized name.
  std::optional<std::size_t> resolve_column(std::string_view name) const;

  /// A copy with extra rows appended and a new id.
  Table with_rows_appended(std::string new_id,
                           const std::vector<std::vector<std::string>>& extra) const;

 private:
  std::string id_;
  std::optional<std::string> title_;
  std::vector<Column> columns_;
  std::size_t row_count_ = 0;
};

using TablePtr = std::shared_ptr<const Table>;

/// Row and column selection over a shared parent table.
class SubTableView {
 public:
  SubTableView(TablePtr parent, std::vector<std::size_t> row_indices,
               std::vector<std::string> column_names);

  static SubTableView full(TablePtr parent);

  const Table& parent() const noexcept { return *parent_; }
  const TablePtr& parent_ptr() const noexcept { return parent_; }
  const std::vector<std::size_t>& row_indices() const noexcept { return rows_; }
  const std::vector<std::string>& column_names() const noexcept { return names_; }
  const std::vector<std::size_t>& column_indices() const noexcept { return cols_; }

 private:
  TablePtr parent_;
  std::vector<std::size_t> rows_;
  std::vector<std::string> names_;
  std::vector<std::size_t> cols_;
};

enum class TableFormat { csv, tsv, json_rows };

std::optional<TableFormat> format_from_path(const std::filesystem::path& path);

Table load_table(std::istream& source, TableFormat format, std::string id);
Table load_table_file(const std::filesystem::path& path);

/// Identifier-safe column name: `[A-Za-z_][A-Za-z0-9_]*`, never an SQL keyword.
std::string sanitize_name(std::string_view raw);

std::string html_escape(std::string_view text);
std::string render_html_table(std::span<const std::string> headers,
                              std::span<const std::vector<std::string>> rows);
/// Headers carry the raw column names.
std::string serialize_html(const SubTableView& view);
/// `name: value | name: value` over all columns, using sanitized names.
std::string serialize_row_text(const Table& table, std::size_t row);

void write_csv(std::ostream& out, std::span<const std::string> header,
               std::span<const std::vector<std::string>> rows);
void write_csv(std::ostream& out, const Table& table);
std::vector<std::vector<std::string>> parse_delimited(std::string_view text, char delimiter);

}  // namespace alter
