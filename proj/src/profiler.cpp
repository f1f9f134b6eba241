#include "alter/profiler.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "alter/errors.hpp"
#include "alter/gateway.hpp"
#include "alter/prompts.hpp"
#include "alter/tokenizer.hpp"

namespace alter {

namespace {

constexpr std::size_t kShapeMaxChars = 24;
constexpr std::size_t kTopShapes = 3;
constexpr std::size_t kExampleValues = 3;
constexpr std::size_t kExampleValueChars = 40;

/// Cuts at a UTF-8 boundary.
std::string truncate_utf8(std::string_view text, std::size_t max_bytes) {
  if (text.size() <= max_bytes) return std::string(text);
  std::size_t cut = max_bytes;
  while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
  return std::string(text.substr(0, cut)) + "...";
}

std::string cell_shape(std::string_view text) {
  std::string shape;
  std::size_t chars = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if ((c & 0xC0) == 0x80) continue;  // continuation byte of a multibyte letter
    if (chars == kShapeMaxChars) {
      shape += "...";
      break;
    }
    ++chars;
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80) {
      shape.push_back('A');
    } else if (c >= '0' && c <= '9') {
      shape.push_back('9');
    } else {
      shape.push_back(static_cast<char>(c));
    }
  }
  return shape;
}

std::vector<std::size_t> non_empty_rows(const Column& column) {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < column.cells.size(); ++r) {
    if (!column.cells[r].empty()) rows.push_back(r);
  }
  return rows;
}

std::string template_description(const Column& column, const ColumnStats& stats) {
  std::vector<std::string> examples;
  std::unordered_set<std::string> seen;
  for (const auto& cell : column.cells) {
    if (cell.empty()) continue;
    std::string value(trim(cell.raw));
    if (!seen.insert(value).second) continue;
    examples.push_back("\"" + truncate_utf8(value, kExampleValueChars) + "\"");
    if (examples.size() == kExampleValues) break;
  }
  if (examples.empty()) return fmt::format("column \"{}\" contains no values", column.raw_name);
  return fmt::format("column \"{}\" contains {} distinct values such as {}", column.raw_name,
                     stats.distinct_count, fmt::join(examples, ", "));
}

std::string template_summary(const Table& table) {
  return fmt::format("Table \"{}\" has {} rows and {} columns: {}.",
                     table.title().value_or(table.id()), table.row_count(), table.column_count(),
                     fmt::join(table.raw_names(), ", "));
}

struct ParsedLines {
  std::optional<std::string> summary;
  std::map<std::size_t, std::string> per_column;
};

/// Reads `name: value` lines, resolving names against the table.
ParsedLines parse_column_lines(std::string_view response, const Table& table) {
  ParsedLines out;
  std::istringstream in{std::string(response)};
  std::string line;
  while (std::getline(in, line)) {
    std::string_view text = trim(line);
    while (!text.empty() && (text.front() == '-' || text.front() == '*')) text = trim(text.substr(1));
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) continue;
    std::string key(trim(text.substr(0, colon)));
    std::erase_if(key, [](char c) { return c == '`' || c == '"' || c == '\''; });
    std::string value(trim(text.substr(colon + 1)));
    if (value.empty()) continue;
    if (auto col = table.resolve_column(key)) {
      out.per_column.try_emplace(*col, value);
    } else if (to_lower(key) == "summary" && !out.summary) {
      out.summary = value;
    }
  }
  return out;
}

}  // namespace

std::string_view schema_type_name(SchemaType type) {
  switch (type) {
    case SchemaType::Numerical: return "Numerical";
    case SchemaType::Date: return "Date";
    case SchemaType::Char: return "Char";
  }
  return "Char";
}

std::optional<SchemaType> parse_schema_type(std::string_view text) {
  std::string t = to_lower(trim(text));
  while (!t.empty() && (t.back() == '.' || t.back() == ',')) t.pop_back();
  if (t == "numerical" || t == "numeric" || t == "number" || t == "integer" || t == "float") {
    return SchemaType::Numerical;
  }
  if (t == "date" || t == "time" || t == "datetime") return SchemaType::Date;
  if (t == "char" || t == "text" || t == "string" || t == "phrase") return SchemaType::Char;
  return std::nullopt;
}

TableAugmentation::TableAugmentation(std::string table_id, std::string global_summary,
                                     std::vector<ColumnAugmentation> columns)
    : table_id_(std::move(table_id)),
      global_summary_(std::move(global_summary)),
      columns_(std::move(columns)) {
  std::unordered_set<std::string> names;
  for (const auto& c : columns_) {
    if (!names.insert(c.column).second) {
      throw SchemaVersionError("duplicate augmentation entry for column '" + c.column + "'");
    }
    if (c.stats.numeric_min.has_value() != (c.schema_type == SchemaType::Numerical) ||
        c.stats.numeric_max.has_value() != (c.schema_type == SchemaType::Numerical)) {
      throw SchemaVersionError("numeric range must be present exactly for Numerical column '" +
                               c.column + "'");
    }
    if (c.stats.numeric_min && *c.stats.numeric_min > *c.stats.numeric_max) {
      throw SchemaVersionError("numeric_min exceeds numeric_max for '" + c.column + "'");
    }
  }
}

const ColumnAugmentation* TableAugmentation::find(std::string_view sanitized) const {
  for (const auto& c : columns_) {
    if (c.column == sanitized) return &c;
  }
  return nullptr;
}

const ColumnAugmentation& TableAugmentation::at(std::string_view sanitized) const {
  if (const auto* c = find(sanitized)) return *c;
  throw MissingAugmentationError("no augmentation for column '" + std::string(sanitized) + "'");
}

bool TableAugmentation::covers(const Table& table) const {
  if (columns_.size() != table.column_count()) return false;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].column != table.column(i).sanitized_name) return false;
  }
  return true;
}

SchemaType infer_schema_type(const Column& column) {
  std::size_t non_empty = 0;
  std::size_t numbers = 0;
  std::size_t dates = 0;
  for (const auto& cell : column.cells) {
    if (cell.empty()) continue;
    ++non_empty;
    if (cell.number() != nullptr) ++numbers;
    if (cell.date() != nullptr) ++dates;
  }
  if (non_empty == 0) {
    throw EmptyColumnError("column '" + column.sanitized_name + "' has no non-empty cells");
  }
  const double total = static_cast<double>(non_empty);
  if (static_cast<double>(numbers) >= kTypeMajority * total) return SchemaType::Numerical;
  if (static_cast<double>(dates) >= kTypeMajority * total) return SchemaType::Date;
  return SchemaType::Char;
}

std::string mine_literal_format(const Column& column, std::size_t sample_cap) {
  sample_cap = std::max<std::size_t>(sample_cap, 1);
  const auto rows = non_empty_rows(column);
  if (rows.empty()) return "empty";
  const std::size_t take = std::min(sample_cap, rows.size());
  std::vector<std::pair<std::string, std::size_t>> shapes;  // first-seen order
  std::unordered_map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t row = rows[i * rows.size() / take];
    std::string shape = cell_shape(trim(column.cells[row].raw));
    auto [it, inserted] = slot.try_emplace(shape, shapes.size());
    if (inserted) shapes.emplace_back(std::move(shape), 0);
    ++shapes[it->second].second;
  }
  std::stable_sort(shapes.begin(), shapes.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> parts;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < std::min(kTopShapes, shapes.size()); ++i) {
    const auto pct = (shapes[i].second * 100 + take / 2) / take;
    parts.push_back(fmt::format("{} ({}%)", shapes[i].first, pct));
    covered += shapes[i].second;
  }
  if (covered < take) {
    parts.push_back(fmt::format("other shapes ({}%)", ((take - covered) * 100 + take / 2) / take));
  }
  return fmt::format("{}", fmt::join(parts, "; "));
}

ColumnStats column_stats(const Column& column, SchemaType type) {
  ColumnStats stats;
  std::unordered_set<std::string_view> distinct;
  for (const auto& cell : column.cells) {
    if (cell.empty()) {
      ++stats.empty_count;
      continue;
    }
    distinct.insert(trim(cell.raw));
    if (type == SchemaType::Numerical) {
      if (const auto* n = cell.number()) {
        stats.numeric_min = std::min(stats.numeric_min.value_or(n->value), n->value);
        stats.numeric_max = std::max(stats.numeric_max.value_or(n->value), n->value);
      }
    }
  }
  stats.distinct_count = distinct.size();
  return stats;
}

std::vector<std::size_t> spread_rows(std::size_t row_count, std::size_t cap) {
  std::vector<std::size_t> rows;
  const std::size_t take = std::min(row_count, cap);
  for (std::size_t i = 0; i < take; ++i) rows.push_back(i * row_count / take);
  return rows;
}

TableAugmentation augment_table(const Table& table, Gateway* gateway, AugmentMode mode,
                                const PromptLibrary& prompts) {
  std::vector<ColumnAugmentation> columns;
  std::vector<bool> typed(table.column_count(), true);
  for (std::size_t c = 0; c < table.column_count(); ++c) {
    const Column& column = table.column(c);
    ColumnAugmentation aug;
    aug.column = column.sanitized_name;
    aug.raw_name = column.raw_name;
    try {
      aug.schema_type = infer_schema_type(column);
    } catch (const EmptyColumnError&) {
      aug.schema_type = SchemaType::Char;
      typed[c] = false;
    }
    aug.stats = column_stats(column, aug.schema_type);
    aug.literal_format = mine_literal_format(column);
    aug.semantic_description = template_description(column, aug.stats);
    columns.push_back(std::move(aug));
  }
  std::string summary = template_summary(table);

  if (mode == AugmentMode::llm_enriched) {
    if (gateway == nullptr) throw BackendError("llm_enriched augmentation needs a gateway");
    auto all = std::make_shared<const Table>(table);
    const SubTableView sample(all, spread_rows(table.row_count(), kAugmentationPromptRows),
                              table.sanitized_names());
    const std::string html = serialize_html(sample);
    auto ask = [&](Stage stage, std::string_view name) {
      ChatRequest request;
      request.stage = stage;
      request.prompt = prompts.render(name, {{"examples", prompts.get(std::string(name) + ".examples")},
                                             {"sub_table", html}});
      request.table_tokens = count_tokens(html);
      return parse_column_lines(gateway->complete_one(request), table);
    };
    const auto schema = ask(Stage::schema_aug, "schema_aug");
    const auto semantic = ask(Stage::semantic_aug, "semantic_aug");
    const auto literal = ask(Stage::literal_aug, "literal_aug");
    for (std::size_t c = 0; c < columns.size(); ++c) {
      // Deterministic typing wins whenever it has an answer.
      if (!typed[c]) {
        if (auto it = schema.per_column.find(c); it != schema.per_column.end()) {
          if (auto t = parse_schema_type(it->second); t && *t != SchemaType::Numerical) {
            columns[c].schema_type = *t;
          }
        }
      }
      if (auto it = semantic.per_column.find(c); it != semantic.per_column.end()) {
        columns[c].semantic_description = it->second;
      }
      if (auto it = literal.per_column.find(c); it != literal.per_column.end()) {
        columns[c].literal_format += " | " + it->second;
      }
    }
    if (semantic.summary) summary = *semantic.summary;
  }
  return TableAugmentation(table.id(), std::move(summary), std::move(columns));
}

std::string augmentation_to_json(const TableAugmentation& aug) {
  nlohmann::ordered_json doc;
  doc["version"] = 1;
  doc["table_id"] = aug.table_id();
  doc["global_summary"] = aug.global_summary();
  auto& per_column = doc["per_column"] = nlohmann::ordered_json::object();
  for (const auto& c : aug.columns()) {
    nlohmann::ordered_json entry;
    entry["raw_name"] = c.raw_name;
    entry["schema_type"] = schema_type_name(c.schema_type);
    entry["semantic_description"] = c.semantic_description;
    entry["literal_format"] = c.literal_format;
    nlohmann::ordered_json stats;
    stats["distinct_count"] = c.stats.distinct_count;
    stats["empty_count"] = c.stats.empty_count;
    if (c.stats.numeric_min) stats["numeric_min"] = *c.stats.numeric_min;
    if (c.stats.numeric_max) stats["numeric_max"] = *c.stats.numeric_max;
    entry["stats"] = std::move(stats);
    per_column[c.column] = std::move(entry);
  }
  return doc.dump(2) + "\n";
}

TableAugmentation augmentation_from_json(std::string_view text) {
  try {
    const auto doc = nlohmann::ordered_json::parse(text);
    if (!doc.is_object() || doc.value("version", 0) != 1) {
      throw SchemaVersionError("augmentation cache has missing or unsupported version");
    }
    std::vector<ColumnAugmentation> columns;
    for (const auto& [name, entry] : doc.at("per_column").items()) {
      ColumnAugmentation c;
      c.column = name;
      c.raw_name = entry.at("raw_name").get<std::string>();
      auto type = parse_schema_type(entry.at("schema_type").get<std::string>());
      if (!type) throw SchemaVersionError("unknown schema type for column '" + name + "'");
      c.schema_type = *type;
      c.semantic_description = entry.at("semantic_description").get<std::string>();
      c.literal_format = entry.at("literal_format").get<std::string>();
      const auto& stats = entry.at("stats");
      c.stats.distinct_count = stats.at("distinct_count").get<std::size_t>();
      c.stats.empty_count = stats.at("empty_count").get<std::size_t>();
      if (stats.contains("numeric_min")) c.stats.numeric_min = stats["numeric_min"].get<double>();
      if (stats.contains("numeric_max")) c.stats.numeric_max = stats["numeric_max"].get<double>();
      columns.push_back(std::move(c));
    }
    return TableAugmentation(doc.at("table_id").get<std::string>(),
                             doc.at("global_summary").get<std::string>(), std::move(columns));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaVersionError(std::string("unreadable augmentation cache: ") + e.what());
  }
}

std::filesystem::path augmentation_path(std::string_view table_id,
                                        const std::filesystem::path& cache_dir) {
  std::string file(table_id);
  for (char& c : file) {
    if (c == '/' || c == '\\') c = '_';
  }
  return cache_dir / (file + ".aug.json");
}

void store_augmentation(const TableAugmentation& aug, const std::filesystem::path& cache_dir) {
  std::error_code ec;
  std::filesystem::create_directories(cache_dir, ec);
  if (ec) throw IoError("cannot create cache dir " + cache_dir.string() + ": " + ec.message());
  const auto target = augmentation_path(aug.table_id(), cache_dir);
  const auto temp = target.string() + ".tmp." +
                    std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + temp);
    out << augmentation_to_json(aug);
    if (!out) throw IoError("write failed for " + temp);
  }
  std::filesystem::rename(temp, target, ec);
  if (ec) throw IoError("cannot rename into " + target.string() + ": " + ec.message());
}

std::optional<TableAugmentation> load_augmentation(std::string_view table_id,
                                                   const std::filesystem::path& cache_dir) {
  const auto path = augmentation_path(table_id, cache_dir);
  if (!std::filesystem::exists(path)) return std::nullopt;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return augmentation_from_json(text);
}

std::string render_schema_block(const TableAugmentation& aug, const Table& table) {
  std::string out;
  for (const auto& column : table.columns()) {
    const auto& a = aug.at(column.sanitized_name);
    out += fmt::format("- {} (header \"{}\"): {}\n", a.column, a.raw_name,
                       schema_type_name(a.schema_type));
  }
  if (!out.empty()) out.pop_back();
  return out;
}

std::string render_semantic_block(const TableAugmentation& aug, const Table& table) {
  std::string out = aug.global_summary();
  for (const auto& column : table.columns()) {
    const auto& a = aug.at(column.sanitized_name);
    out += fmt::format("\n- {}: {}", a.column, a.semantic_description);
  }
  return out;
}

std::string render_column_details(const TableAugmentation& aug, const Table& table,
                                  std::span<const std::size_t> columns) {
  std::string out;
  for (std::size_t c : columns) {
    const auto& a = aug.at(table.column(c).sanitized_name);
    std::string schema(schema_type_name(a.schema_type));
    if (a.stats.numeric_min) {
      schema += fmt::format(", range {} to {}", format_real(*a.stats.numeric_min),
                            format_real(*a.stats.numeric_max));
    }
    out += fmt::format("- \"{}\" (header \"{}\")\n  schema: {}\n  semantic: {}\n  literal: {}\n",
                       a.column, a.raw_name, schema, a.semantic_description, a.literal_format);
  }
  if (!out.empty()) out.pop_back();
  return out;
}

std::string render_column_names(const Table& table, std::span<const std::size_t> columns) {
  std::string out;
  for (std::size_t c : columns) {
    out += fmt::format("- \"{}\" (header \"{}\")\n", table.column(c).sanitized_name,
                       table.column(c).raw_name);
  }
  if (!out.empty()) out.pop_back();
  return out;
}

}  // namespace alter
