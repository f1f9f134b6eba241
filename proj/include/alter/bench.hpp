#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "alter/pipeline.hpp"
#include "alter/profiler.hpp"
#include "alter/reasoner.hpp"
#include "alter/table.hpp"

namespace alter {

struct BenchExample {
  std::string id;
  std::string table_id;
  std::string question;
  TaskKind task = TaskKind::QA;
  Normalized gold;
};

struct Dataset {
  std::vector<BenchExample> examples;
  std::map<std::string, TablePtr, std::less<>> tables;
};

/// Manifest lines are JSON objects `{id?, table_id, question, answers | label}`;
/// tables live at `<tables_dir>/<table_id>.csv`. Every bad line is reported
/// in one ManifestError.
Dataset load_dataset(const std::filesystem::path& manifest, const std::filesystem::path& tables_dir);

enum class TokenBin { Small, Medium, Large };

std::string_view token_bin_name(TokenBin bin);
TokenBin token_bin_for(std::size_t tokens);
/// Bin of the full-table HTML token count.
TokenBin partition_by_tokens(const Table& table);

inline constexpr std::string_view kCellBins[] = {"<100",    "100-200", "200-300",
                                                 "300-400", "400-500", "500+"};
std::string_view cell_bin_for(std::size_t cells);
std::string_view partition_by_cells(const Table& table);

struct PerturbationPlan {
  std::size_t base_rows_to_add = 1;
  int factor = 1;
  std::uint64_t seed = 0;

  std::size_t total() const { return base_rows_to_add * static_cast<std::size_t>(factor); }
};

/// n for a table of `cells` cells: 1, 2, 4 or 8.
std::size_t base_rows_for_cells(std::size_t cells);
/// Throws ValidationError unless factor is 1, 2 or 4.
PerturbationPlan make_plan(const Table& table, int factor, std::uint64_t seed);
/// Appends plan.total() noise rows drawn per column type. The new table id is
/// `<id>~p<factor>s<seed>`. Throws UnprofiledTableError when `aug` does not
/// describe the table.
Table perturb(const Table& table, const TableAugmentation* aug, const PerturbationPlan& plan);

struct ExampleResult {
  std::string id;
  std::string table_id;
  std::string predicted;
  bool correct = false;
  std::string error;
  std::size_t table_tokens = 0;
  std::size_t table_cells = 0;
  std::size_t tokens_shown = 0;
  std::size_t rows_added = 0;
};

struct BinAccuracy {
  std::string bin;
  std::size_t count = 0;
  std::size_t correct = 0;
};

enum class Partition { tokens, cells };

struct EvalReport {
  Partition partition = Partition::tokens;
  int perturb_factor = 0;
  std::vector<ExampleResult> per_example;
  double accuracy = 0.0;
  std::vector<BinAccuracy> bins;
  double token_utilization = 0.0;
};

/// Aggregates computed from the per-example rows alone.
EvalReport summarize(std::vector<ExampleResult> rows, Partition partition, int perturb_factor);

struct BenchOptions {
  PipelineConfig pipeline;
  AugmentMode augment_mode = AugmentMode::deterministic_only;
  std::optional<std::filesystem::path> cache_dir;
  /// 0 disables perturbation.
  int perturb_factor = 0;
  std::uint64_t seed = 0;
  Partition partition = Partition::tokens;
  /// Concurrent examples.
  std::size_t parallelism = 4;
  AnswerComparator comparator = denotation_match;
};

/// Never aborts on a single example; failures are recorded as incorrect.
EvalReport run_benchmark(const Dataset& dataset, const BenchOptions& options, PipelineContext& ctx);

std::string report_to_json(const EvalReport& report);
std::string report_to_csv(const EvalReport& report);

}  // namespace alter
