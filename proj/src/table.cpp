#include "alter/table.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "alter/errors.hpp"

namespace alter {

namespace {

constexpr std::array<std::string_view, 107> kSqlKeywords = {
    "abort",     "action",    "add",          "after",      "all",        "alter",
    "analyze",   "and",       "as",           "asc",        "attach",     "autoincrement",
    "before",    "begin",     "between",      "by",         "cascade",    "case",
    "cast",      "check",     "collate",      "column",     "commit",     "conflict",
    "constraint", "create",   "cross",        "current_date", "current_time", "current_timestamp",
    "database",  "default",   "deferrable",   "deferred",   "delete",     "desc",
    "detach",    "distinct",  "drop",         "each",       "else",       "end",
    "escape",    "except",    "exclusive",    "exists",     "explain",    "fail",
    "for",       "foreign",   "from",         "full",       "glob",       "group",
    "having",    "if",        "ignore",       "immediate",  "in",         "index",
    "indexed",   "initially", "inner",        "insert",     "instead",    "intersect",
    "into",      "is",        "isnull",       "join",       "key",        "left",
    "like",      "limit",     "match",        "natural",    "no",         "not",
    "notnull",   "null",      "of",           "offset",     "on",         "or",
    "order",     "outer",     "plan",         "pragma",     "primary",    "query",
    "raise",     "recursive", "references",   "regexp",     "reindex",    "release",
    "rename",    "replace",   "restrict",     "right",      "rollback",   "row",
    "select",    "set",       "table",        "then",       "to"};

constexpr std::array<std::string_view, 15> kMoreSqlKeywords = {
    "transaction", "trigger", "union",   "unique", "update", "using",   "vacuum", "values",
    "view",        "virtual", "when",    "where",  "with",   "without", "temp"};

bool is_sql_keyword(std::string_view lower) {
  return std::find(kSqlKeywords.begin(), kSqlKeywords.end(), lower) != kSqlKeywords.end() ||
         std::find(kMoreSqlKeywords.begin(), kMoreSqlKeywords.end(), lower) !=
             kMoreSqlKeywords.end();
}

bool is_alnum(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

void validate_utf8(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t extra = 0;
    if (c < 0x80) {
      extra = 0;
    } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
      extra = 1;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
    } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
      extra = 3;
    } else {
      throw DecodeError("invalid UTF-8 byte at offset " + std::to_string(i));
    }
    for (std::size_t k = 1; k <= extra; ++k) {
      if (i + k >= text.size() || (static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
        throw DecodeError("invalid UTF-8 continuation at offset " + std::to_string(i + k));
      }
    }
    i += extra + 1;
  }
}

std::string cell_to_string(const nlohmann::json& value) {
  if (value.is_null()) return {};
  if (value.is_string()) return value.get<std::string>();
  return value.dump();
}

Table build_checked(std::string id, std::vector<std::vector<std::string>> records,
                    std::optional<std::string> title) {
  if (records.empty() || records.front().empty()) throw EmptyTableError("table has no header");
  std::vector<std::string> header = std::move(records.front());
  records.erase(records.begin());
  if (records.empty()) throw EmptyTableError("table '" + id + "' has no data rows");
  for (std::size_t r = 0; r < records.size(); ++r) {
    if (records[r].size() != header.size()) {
      throw RaggedRowError(r, header.size(), records[r].size());
    }
  }
  return Table(std::move(id), std::move(header), std::move(records), std::move(title));
}

}  // namespace

std::string sanitize_name(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    const char mapped = is_alnum(c) ? c : '_';
    if (mapped == '_' && !out.empty() && out.back() == '_') continue;
    out.push_back(mapped);
  }
  while (!out.empty() && out.front() == '_') out.erase(out.begin());
  while (!out.empty() && out.back() == '_') out.pop_back();
  if (out.empty()) out = "col";
  if (out[0] >= '0' && out[0] <= '9') out = "c_" + out;
  if (is_sql_keyword(to_lower(out))) out += "_col";
  return out;
}

Table::Table(std::string id, std::vector<std::string> header,
             std::vector<std::vector<std::string>> rows, std::optional<std::string> title)
    : id_(std::move(id)), title_(std::move(title)), row_count_(rows.size()) {
  if (header.empty()) throw EmptyTableError("table '" + id_ + "' has no columns");
  std::unordered_set<std::string> used;
  columns_.reserve(header.size());
  for (auto& raw : header) {
    const std::string base = sanitize_name(raw);
    std::string name = base;
    for (int suffix = 2; used.count(to_lower(name)) != 0; ++suffix) {
      name = base + "_" + std::to_string(suffix);
    }
    used.insert(to_lower(name));
    Column column;
    column.raw_name = std::move(raw);
    column.sanitized_name = std::move(name);
    column.cells.reserve(rows.size());
    columns_.push_back(std::move(column));
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != columns_.size()) {
      throw RaggedRowError(r, columns_.size(), rows[r].size());
    }
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      columns_[c].cells.push_back(make_cell(std::move(rows[r][c])));
    }
  }
}

const std::string& Table::cell(std::size_t row, std::size_t col) const {
  if (col >= columns_.size() || row >= row_count_) {
    throw IndexError("cell (" + std::to_string(row) + ", " + std::to_string(col) +
                     ") out of range");
  }
  return columns_[col].cells[row].raw;
}

std::vector<std::string> Table::raw_names() const {
  std::vector<std::string> names;
  for (const auto& c : columns_) names.push_back(c.raw_name);
  return names;
}

std::vector<std::string> Table::sanitized_names() const {
  std::vector<std::string> names;
  for (const auto& c : columns_) names.push_back(c.sanitized_name);
  return names;
}

std::vector<std::string> Table::row(std::size_t index) const {
  if (index >= row_count_) throw IndexError("row " + std::to_string(index) + " out of range");
  std::vector<std::string> out;
  out.reserve(columns_.size());
  for (const auto& c : columns_) out.push_back(c.cells[index].raw);
  return out;
}

std::optional<std::size_t> Table::find_column(std::string_view sanitized) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].sanitized_name == sanitized) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> Table::resolve_column(std::string_view name) const {
  const std::string wanted = to_lower(trim(name));
  if (wanted.empty()) return std::nullopt;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (to_lower(columns_[i].sanitized_name) == wanted) return i;
  }
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (to_lower(trim(columns_[i].raw_name)) == wanted) return i;
  }
  return std::nullopt;
}

Table Table::with_rows_appended(std::string new_id,
                                const std::vector<std::vector<std::string>>& extra) const {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(row_count_ + extra.size());
  for (std::size_t r = 0; r < row_count_; ++r) rows.push_back(row(r));
  rows.insert(rows.end(), extra.begin(), extra.end());
  return Table(std::move(new_id), raw_names(), std::move(rows), title_);
}

SubTableView::SubTableView(TablePtr parent, std::vector<std::size_t> row_indices,
                           std::vector<std::string> column_names)
    : parent_(std::move(parent)), rows_(std::move(row_indices)), names_(std::move(column_names)) {
  if (!parent_) throw IndexError("view without a parent table");
  std::unordered_set<std::size_t> seen_rows;
  for (std::size_t r : rows_) {
    if (r >= parent_->row_count()) {
      throw IndexError("row index " + std::to_string(r) + " out of range");
    }
    if (!seen_rows.insert(r).second) {
      throw IndexError("duplicate row index " + std::to_string(r));
    }
  }
  std::unordered_set<std::size_t> seen_cols;
  for (const auto& name : names_) {
    auto index = parent_->find_column(name);
    if (!index) throw UnknownColumnError("unknown column '" + name + "'");
    if (!seen_cols.insert(*index).second) {
      throw UnknownColumnError("duplicate column '" + name + "'");
    }
    cols_.push_back(*index);
  }
}

SubTableView SubTableView::full(TablePtr parent) {
  std::vector<std::size_t> rows(parent->row_count());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  auto names = parent->sanitized_names();
  return SubTableView(std::move(parent), std::move(rows), std::move(names));
}

std::optional<TableFormat> format_from_path(const std::filesystem::path& path) {
  const std::string ext = to_lower(path.extension().string());
  if (ext == ".csv") return TableFormat::csv;
  if (ext == ".tsv") return TableFormat::tsv;
  if (ext == ".json") return TableFormat::json_rows;
  return std::nullopt;
}

std::vector<std::vector<std::string>> parse_delimited(std::string_view text, char delimiter) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  bool line_has_content = false;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (line_has_content) records.push_back(std::move(record));
    record.clear();
    line_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
      line_has_content = true;
    } else if (c == delimiter) {
      end_field();
      line_has_content = true;
    } else if (c == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_record();
    } else if (c == '\n') {
      end_record();
    } else {
      field.push_back(c);
      field_started = true;
      line_has_content = true;
    }
  }
  if (in_quotes) throw DecodeError("unterminated quoted field");
  if (line_has_content || !field.empty()) end_record();
  return records;
}

Table load_table(std::istream& source, TableFormat format, std::string id) {
  std::string text{std::istreambuf_iterator<char>(source), std::istreambuf_iterator<char>()};
  if (text.size() >= 3 && text.compare(0, 3, "\xEF\xBB\xBF") == 0) text.erase(0, 3);
  validate_utf8(text);
  if (format == TableFormat::json_rows) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw DecodeError(std::string("json-rows: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("header") || !doc["header"].is_array()) {
      throw EmptyTableError("json-rows document lacks a header array");
    }
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> header;
    for (const auto& h : doc["header"]) header.push_back(cell_to_string(h));
    records.push_back(std::move(header));
    if (doc.contains("rows")) {
      if (!doc["rows"].is_array()) throw DecodeError("json-rows: rows must be an array");
      for (const auto& row : doc["rows"]) {
        if (!row.is_array()) throw DecodeError("json-rows: each row must be an array");
        std::vector<std::string> cells;
        for (const auto& v : row) cells.push_back(cell_to_string(v));
        records.push_back(std::move(cells));
      }
    }
    std::optional<std::string> title;
    if (doc.contains("title") && doc["title"].is_string()) title = doc["title"].get<std::string>();
    return build_checked(std::move(id), std::move(records), std::move(title));
  }
  const char delimiter = format == TableFormat::tsv ? '\t' : ',';
  return build_checked(std::move(id), parse_delimited(text, delimiter), std::nullopt);
}

Table load_table_file(const std::filesystem::path& path) {
  auto format = format_from_path(path);
  if (!format) throw IoError("unrecognized table format: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return load_table(in, *format, path.stem().string());
}

std::string html_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string render_html_table(std::span<const std::string> headers,
                              std::span<const std::vector<std::string>> rows) {
  std::string out = "<table><thead><tr>";
  for (const auto& h : headers) out += "<th>" + html_escape(h) + "</th>";
  out += "</tr></thead><tbody>";
  for (const auto& row : rows) {
    out += "<tr>";
    for (const auto& cell : row) out += "<td>" + html_escape(cell) + "</td>";
    out += "</tr>";
  }
  out += "</tbody></table>";
  return out;
}

std::string serialize_html(const SubTableView& view) {
  const Table& table = view.parent();
  std::vector<std::string> headers;
  for (std::size_t c : view.column_indices()) headers.push_back(table.column(c).raw_name);
  std::vector<std::vector<std::string>> rows;
  rows.reserve(view.row_indices().size());
  for (std::size_t r : view.row_indices()) {
    std::vector<std::string> cells;
    for (std::size_t c : view.column_indices()) cells.push_back(table.column(c).cells[r].raw);
    rows.push_back(std::move(cells));
  }
  return render_html_table(headers, rows);
}

std::string serialize_row_text(const Table& table, std::size_t row) {
  if (row >= table.row_count()) {
    throw IndexError("row " + std::to_string(row) + " out of range");
  }
  std::string out;
  for (std::size_t c = 0; c < table.column_count(); ++c) {
    if (c > 0) out += " | ";
    out += table.column(c).sanitized_name;
    out += ": ";
    out += table.column(c).cells[row].raw;
  }
  return out;
}

void write_csv(std::ostream& out, std::span<const std::string> header,
               std::span<const std::vector<std::string>> rows) {
  auto write_field = [&](const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) {
      out << field;
      return;
    }
    out << '"';
    for (char c : field) {
      if (c == '"') out << '"';
      out << c;
    }
    out << '"';
  };
  auto write_record = [&](std::span<const std::string> record) {
    for (std::size_t i = 0; i < record.size(); ++i) {
      if (i > 0) out << ',';
      write_field(record[i]);
    }
    out << '\n';
  };
  write_record(header);
  for (const auto& row : rows) write_record(row);
}

void write_csv(std::ostream& out, const Table& table) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(table.row_count());
  for (std::size_t r = 0; r < table.row_count(); ++r) rows.push_back(table.row(r));
  write_csv(out, table.raw_names(), rows);
}

}  // namespace alter
