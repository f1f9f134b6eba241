#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alter/errors.hpp"
#include "alter/profiler.hpp"
#include "alter/table.hpp"

struct sqlite3;

namespace alter {

class Gateway;
class PromptLibrary;

enum class SqlOutcome { ok, parse_error, exec_error, empty_result };

std::string_view outcome_name(SqlOutcome outcome);

struct SqlAttempt {
  std::string sql_text;
  int attempt_index = 0;
  SqlOutcome outcome = SqlOutcome::parse_error;
  std::string error;
};

/// Materialized query result.
struct ResultTable {
  std::vector<std::string> headers;
  std::vector<std::vector<std::string>> rows;

  /// At most `max_rows` rows when non-zero.
  std::string to_html(std::size_t max_rows = 0) const;
  /// Same layout as the json-rows table format.
  std::string to_json_rows() const;
};

struct ExecutionResult {
  std::string final_sql;
  std::optional<ResultTable> result;
  std::vector<SqlAttempt> attempts;
};

class SqlParseError : public EngineError {
 public:
  using EngineError::EngineError;
};

class SqlExecError : public EngineError {
 public:
  using EngineError::EngineError;
};

class SqlGenerationFailedError : public Error {
 public:
  explicit SqlGenerationFailedError(std::vector<SqlAttempt> attempts);
  const std::vector<SqlAttempt>& attempts() const noexcept { return attempts_; }

 private:
  std::vector<SqlAttempt> attempts_;
};

/// In-memory relational engine holding one relation `t` with sanitized column
/// names: Numerical columns as REAL (unparseable cells NULL), Date columns as
/// ISO-8601 text, Char columns as text. Read-only once loaded.
class SqlEngine {
 public:
  SqlEngine(const Table& table, std::span<const SchemaType> types);
  ~SqlEngine();
  SqlEngine(SqlEngine&& other) noexcept;
  SqlEngine& operator=(SqlEngine&& other) noexcept;
  SqlEngine(const SqlEngine&) = delete;
  SqlEngine& operator=(const SqlEngine&) = delete;

  /// Runs a single read-only SELECT (or WITH ... SELECT). Throws SqlParseError
  /// for anything else or for SQL that does not compile, SqlExecError when
  /// evaluation fails.
  ResultTable execute(std::string_view sql) const;

 private:
  sqlite3* db_ = nullptr;
};

/// Storage types for every column: taken from `aug` when present, inferred otherwise.
std::vector<SchemaType> storage_types(const Table& table, const TableAugmentation* aug);

SqlEngine load_into_engine(const Table& table, const TableAugmentation& aug);

/// Column details (schema, semantic, literal) for the view's columns, the
/// sub-table, the query and the dialect note. `aug` null renders names only.
std::string build_sql_prompt(const SubTableView& view, std::string_view query,
                             const TableAugmentation* aug, const PromptLibrary& prompts);

/// First fenced code block, else the longest statement starting with SELECT/WITH.
std::string extract_sql(std::string_view response);

inline constexpr int kDefaultMaxRepairs = 1;

ExecutionResult generate_and_execute(const TablePtr& table, const SubTableView& view,
                                     std::string_view query, const TableAugmentation* aug,
                                     Gateway& gateway, const PromptLibrary& prompts,
                                     int max_repairs = kDefaultMaxRepairs);

}  // namespace alter
