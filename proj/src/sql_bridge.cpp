#include "alter/sql_bridge.hpp"

#include <algorithm>
#include <cctype>
#include <memory>
#include <utility>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <sqlite3.h>

#include "alter/gateway.hpp"
#include "alter/prompts.hpp"
#include "alter/tokenizer.hpp"

namespace alter {

namespace {

// Aborts runaway statements (e.g. accidental cross joins on large tables).
constexpr int kProgressInterval = 10000;
constexpr long kMaxProgressTicks = 20000;

std::string quote_ident(std::string_view name) {
  std::string out = "\"";
  for (char c : name) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void exec_or_throw(sqlite3* db, const std::string& sql) {
  char* err = nullptr;
  if (sqlite3_exec(db, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
    std::string message = err ? err : "unknown error";
    sqlite3_free(err);
    throw EngineError("engine setup failed: " + message);
  }
}

/// Skips whitespace and SQL comments.
std::size_t skip_trivia(std::string_view sql, std::size_t i) {
  while (i < sql.size()) {
    if (std::isspace(static_cast<unsigned char>(sql[i]))) {
      ++i;
    } else if (sql.compare(i, 2, "--") == 0) {
      while (i < sql.size() && sql[i] != '\n') ++i;
    } else if (sql.compare(i, 2, "/*") == 0) {
      const auto end = sql.find("*/", i + 2);
      i = end == std::string_view::npos ? sql.size() : end + 2;
    } else if (sql[i] == ';') {
      ++i;
    } else {
      break;
    }
  }
  return i;
}

std::string leading_keyword(std::string_view sql) {
  std::size_t i = skip_trivia(sql, 0);
  while (i < sql.size() && sql[i] == '(') i = skip_trivia(sql, i + 1);
  std::string word;
  while (i < sql.size() && std::isalpha(static_cast<unsigned char>(sql[i]))) {
    word.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(sql[i]))));
    ++i;
  }
  return word;
}

std::string column_text(sqlite3_stmt* stmt, int col) {
  switch (sqlite3_column_type(stmt, col)) {
    case SQLITE_NULL: return {};
    case SQLITE_INTEGER: return std::to_string(sqlite3_column_int64(stmt, col));
    case SQLITE_FLOAT: return format_real(sqlite3_column_double(stmt, col));
    case SQLITE_BLOB: return "<blob>";
    default: {
      const auto* text = reinterpret_cast<const char*>(sqlite3_column_text(stmt, col));
      return text ? std::string(text, static_cast<std::size_t>(sqlite3_column_bytes(stmt, col)))
                  : std::string{};
    }
  }
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

std::string_view outcome_name(SqlOutcome outcome) {
  switch (outcome) {
    case SqlOutcome::ok: return "ok";
    case SqlOutcome::parse_error: return "parse_error";
    case SqlOutcome::exec_error: return "exec_error";
    case SqlOutcome::empty_result: return "empty_result";
  }
  return "parse_error";
}

std::string ResultTable::to_html(std::size_t max_rows) const {
  if (max_rows == 0 || rows.size() <= max_rows) return render_html_table(headers, rows);
  return render_html_table(headers, std::span(rows).first(max_rows));
}

std::string ResultTable::to_json_rows() const {
  nlohmann::ordered_json doc;
  doc["header"] = headers;
  doc["rows"] = rows;
  return doc.dump();
}

SqlGenerationFailedError::SqlGenerationFailedError(std::vector<SqlAttempt> attempts)
    : Error(fmt::format("SQL generation failed after {} attempt(s){}", attempts.size(),
                        attempts.empty() ? std::string{} : ": " + attempts.back().error)),
      attempts_(std::move(attempts)) {}

SqlEngine::SqlEngine(const Table& table, std::span<const SchemaType> types) {
  if (types.size() != table.column_count()) throw EngineError("storage type count mismatch");
  if (sqlite3_open_v2(":memory:", &db_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE, nullptr) !=
      SQLITE_OK) {
    std::string message = db_ ? sqlite3_errmsg(db_) : "out of memory";
    sqlite3_close(db_);
    db_ = nullptr;
    throw EngineError("cannot open engine: " + message);
  }
  try {
    std::string create = "CREATE TABLE t (";
    std::string insert = "INSERT INTO t VALUES (";
    for (std::size_t c = 0; c < table.column_count(); ++c) {
      if (c > 0) {
        create += ", ";
        insert += ", ";
      }
      create += quote_ident(table.column(c).sanitized_name);
      create += types[c] == SchemaType::Numerical ? " REAL" : " TEXT";
      insert += "?";
    }
    create += ")";
    insert += ")";
    exec_or_throw(db_, create);
    exec_or_throw(db_, "BEGIN");
    sqlite3_stmt* stmt = nullptr;
    if (sqlite3_prepare_v2(db_, insert.c_str(), -1, &stmt, nullptr) != SQLITE_OK) {
      throw EngineError(std::string("cannot prepare insert: ") + sqlite3_errmsg(db_));
    }
    for (std::size_t r = 0; r < table.row_count(); ++r) {
      sqlite3_reset(stmt);
      for (std::size_t c = 0; c < table.column_count(); ++c) {
        const CellValue& cell = table.column(c).cells[r];
        const int slot = static_cast<int>(c) + 1;
        if (types[c] == SchemaType::Numerical) {
          if (const auto* n = cell.number()) {
            sqlite3_bind_double(stmt, slot, n->value);
          } else {
            sqlite3_bind_null(stmt, slot);
          }
        } else if (types[c] == SchemaType::Date) {
          if (cell.empty()) {
            sqlite3_bind_null(stmt, slot);
          } else if (const auto* d = cell.date()) {
            sqlite3_bind_text(stmt, slot, d->iso().c_str(), -1, SQLITE_TRANSIENT);
          } else {
            sqlite3_bind_text(stmt, slot, cell.raw.c_str(), -1, SQLITE_TRANSIENT);
          }
        } else {
          sqlite3_bind_text(stmt, slot, cell.raw.c_str(), -1, SQLITE_TRANSIENT);
        }
      }
      if (sqlite3_step(stmt) != SQLITE_DONE) {
        std::string message = sqlite3_errmsg(db_);
        sqlite3_finalize(stmt);
        throw EngineError("insert failed: " + message);
      }
    }
    sqlite3_finalize(stmt);
    exec_or_throw(db_, "COMMIT");
    exec_or_throw(db_, "PRAGMA query_only = 1");
  } catch (...) {
    sqlite3_close(db_);
    db_ = nullptr;
    throw;
  }
}

SqlEngine::~SqlEngine() {
  if (db_) sqlite3_close(db_);
}

SqlEngine::SqlEngine(SqlEngine&& other) noexcept : db_(std::exchange(other.db_, nullptr)) {}

SqlEngine& SqlEngine::operator=(SqlEngine&& other) noexcept {
  if (this != &other) {
    if (db_) sqlite3_close(db_);
    db_ = std::exchange(other.db_, nullptr);
  }
  return *this;
}

ResultTable SqlEngine::execute(std::string_view sql) const {
  const std::string keyword = leading_keyword(sql);
  if (keyword != "SELECT" && keyword != "WITH") {
    throw SqlParseError("only a single SELECT statement is allowed (got '" +
                        (keyword.empty() ? std::string("nothing") : keyword) + "')");
  }
  const std::string text(sql);
  sqlite3_stmt* stmt = nullptr;
  const char* tail = nullptr;
  if (sqlite3_prepare_v2(db_, text.c_str(), static_cast<int>(text.size()), &stmt, &tail) !=
          SQLITE_OK ||
      stmt == nullptr) {
    std::string message = sqlite3_errmsg(db_);
    sqlite3_finalize(stmt);
    throw SqlParseError(message);
  }
  std::unique_ptr<sqlite3_stmt, decltype(&sqlite3_finalize)> guard(stmt, &sqlite3_finalize);
  const std::string_view rest(tail, static_cast<std::size_t>(text.data() + text.size() - tail));
  if (skip_trivia(rest, 0) != rest.size()) {
    throw SqlParseError("multiple statements are not allowed");
  }
  if (!sqlite3_stmt_readonly(stmt)) throw SqlParseError("statement is not read-only");

  ResultTable result;
  const int ncols = sqlite3_column_count(stmt);
  for (int c = 0; c < ncols; ++c) {
    const char* name = sqlite3_column_name(stmt, c);
    result.headers.emplace_back(name ? name : "");
  }
  long ticks = 0;
  sqlite3_progress_handler(
      db_, kProgressInterval,
      [](void* data) -> int { return ++*static_cast<long*>(data) > kMaxProgressTicks ? 1 : 0; },
      &ticks);
  int rc = SQLITE_OK;
  while ((rc = sqlite3_step(stmt)) == SQLITE_ROW) {
    std::vector<std::string> row;
    row.reserve(static_cast<std::size_t>(ncols));
    for (int c = 0; c < ncols; ++c) row.push_back(column_text(stmt, c));
    result.rows.push_back(std::move(row));
  }
  sqlite3_progress_handler(db_, 0, nullptr, nullptr);
  if (rc != SQLITE_DONE) {
    throw SqlExecError(rc == SQLITE_INTERRUPT ? std::string("query exceeded the execution budget")
                                              : std::string(sqlite3_errmsg(db_)));
  }
  return result;
}

std::vector<SchemaType> storage_types(const Table& table, const TableAugmentation* aug) {
  std::vector<SchemaType> types;
  for (const auto& column : table.columns()) {
    if (aug != nullptr) {
      types.push_back(aug->at(column.sanitized_name).schema_type);
      continue;
    }
    try {
      types.push_back(infer_schema_type(column));
    } catch (const EmptyColumnError&) {
      types.push_back(SchemaType::Char);
    }
  }
  return types;
}

SqlEngine load_into_engine(const Table& table, const TableAugmentation& aug) {
  return SqlEngine(table, storage_types(table, &aug));
}

std::string build_sql_prompt(const SubTableView& view, std::string_view query,
                             const TableAugmentation* aug, const PromptLibrary& prompts) {
  const auto& columns = view.column_indices();
  const std::string details = aug != nullptr
                                  ? render_column_details(*aug, view.parent(), columns)
                                  : render_column_names(view.parent(), columns);
  return prompts.render("sql_gen", {{"augmentation", details},
                                    {"sub_table", serialize_html(view)},
                                    {"query", std::string(query)}});
}

std::string extract_sql(std::string_view response) {
  if (auto open = response.find("```"); open != std::string_view::npos) {
    auto body_start = response.find('\n', open + 3);
    if (body_start != std::string_view::npos) {
      const auto close = response.find("```", body_start + 1);
      const auto body = response.substr(
          body_start + 1, close == std::string_view::npos ? std::string_view::npos
                                                          : close - body_start - 1);
      std::string sql(trim(body));
      if (!sql.empty()) return sql;
    }
  }
  const std::string upper = [&] {
    std::string u(response);
    for (char& c : u) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return u;
  }();
  std::string best;
  for (std::string_view keyword : {std::string_view("SELECT"), std::string_view("WITH")}) {
    for (auto pos = upper.find(keyword); pos != std::string::npos;
         pos = upper.find(keyword, pos + 1)) {
      if (pos > 0 && is_word_char(upper[pos - 1])) continue;
      const auto after = pos + keyword.size();
      if (after < upper.size() && is_word_char(upper[after])) continue;
      auto end = std::min(upper.find(';', pos), upper.find("\n\n", pos));
      std::string candidate(trim(response.substr(pos, end == std::string::npos ? std::string::npos
                                                                               : end - pos)));
      if (candidate.size() > best.size()) best = std::move(candidate);
    }
  }
  return best;
}

ExecutionResult generate_and_execute(const TablePtr& table, const SubTableView& view,
                                     std::string_view query, const TableAugmentation* aug,
                                     Gateway& gateway, const PromptLibrary& prompts,
                                     int max_repairs) {
  const SqlEngine engine(*table, storage_types(*table, aug));
  const std::string base = build_sql_prompt(view, query, aug, prompts);
  std::size_t table_tokens = count_tokens(serialize_html(view));
  if (aug != nullptr) {
    table_tokens += count_tokens(render_column_details(*aug, *table, view.column_indices()));
  }
  ExecutionResult out;
  std::string prompt = base;
  for (int attempt = 0; attempt <= std::max(0, max_repairs); ++attempt) {
    ChatRequest request;
    request.stage = Stage::sql_gen;
    request.prompt = prompt;
    request.table_tokens = table_tokens;
    const std::string sql = extract_sql(gateway.complete_one(request));
    SqlAttempt record{sql, attempt, SqlOutcome::parse_error, {}};
    if (sql.empty()) {
      record.error = "no SQL statement found in the response";
    } else {
      try {
        ResultTable result = engine.execute(sql);
        record.outcome = result.rows.empty() ? SqlOutcome::empty_result : SqlOutcome::ok;
        out.attempts.push_back(record);
        out.final_sql = sql;
        out.result = std::move(result);
        return out;
      } catch (const SqlParseError& e) {
        record.error = e.what();
      } catch (const SqlExecError& e) {
        record.outcome = SqlOutcome::exec_error;
        record.error = e.what();
      }
    }
    out.attempts.push_back(record);
    prompt = prompts.render("sql_repair", {{"prompt", base}, {"sql", sql}, {"error", record.error}});
  }
  throw SqlGenerationFailedError(std::move(out.attempts));
}

}  // namespace alter
