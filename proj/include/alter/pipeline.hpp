#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "alter/embedding.hpp"
#include "alter/profiler.hpp"
#include "alter/query_augmentor.hpp"
#include "alter/reasoner.hpp"
#include "alter/retrieval.hpp"
#include "alter/sql_bridge.hpp"

namespace alter {

class Gateway;
class PromptLibrary;

struct PipelineConfig {
  std::size_t k = 3;
  bool enable_step_back = true;
  bool enable_sub_query = true;
  bool enable_augmentation = true;
  int sc_n = kDefaultSelfConsistency;
  int max_repairs = kDefaultMaxRepairs;
  /// Concurrent sub-query pipelines.
  std::size_t parallelism = 4;

  /// Throws ValidationError when out of range.
  void validate() const;
};

struct PipelineContext {
  Gateway& gateway;
  const Embedder& embedder;
  const PromptLibrary& prompts;
  RowEmbeddingCache* row_cache = nullptr;
};

/// Table organization for one query: sampled rows, filtered columns, SQL.
struct OrganizerTrace {
  std::string query;
  std::vector<std::size_t> rows;
  std::vector<std::string> columns;
  std::optional<ExecutionResult> execution;
  std::vector<SqlAttempt> failed_attempts;
  std::string error;
};

struct SubPipelineTrace {
  OrganizerTrace organizer;
  SubAnswer answer;
};

struct PipelineTrace {
  QueryBundle bundle;
  OrganizerTrace primary;
  /// True when primary SQL failed and the sampled sub-table was used instead.
  bool primary_fallback = false;
  std::vector<SubPipelineTrace> subs;
  std::string joint_table;
  Answer answer;
  /// Tokens of the full table serialization.
  std::size_t table_tokens = 0;
  /// Tokens of table-derived prompt content: every sampled row over the
  /// columns shown, plus the augmentation text, each counted once.
  std::size_t tokens_shown = 0;
};

/// Runs `body(i)` for i in [0, n) on up to `workers` threads. The first
/// exception (lowest index) is rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& body);

/// Sample rows, filter columns, generate and run SQL. `rows` may be supplied
/// to reuse a sample. When SQL generation fails `execution` stays empty and
/// the failed attempts are kept.
OrganizerTrace organize(const TablePtr& table, std::string_view query,
                        const TableAugmentation* aug, const PipelineConfig& config,
                        PipelineContext& ctx,
                        std::optional<std::vector<std::size_t>> rows = std::nullopt);

/// End to end answer for one question. `aug` is ignored when augmentation is disabled.
PipelineTrace run_pipeline(const TablePtr& table, const TableAugmentation* aug,
                           std::string_view question, TaskKind task, const PipelineConfig& config,
                           PipelineContext& ctx);

std::size_t full_table_tokens(const Table& table);

nlohmann::ordered_json answer_to_json(const Answer& answer);
nlohmann::ordered_json trace_to_json(const PipelineTrace& trace, const Table& table);

}  // namespace alter
