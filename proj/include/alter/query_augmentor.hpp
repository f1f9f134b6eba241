#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "alter/table.hpp"

namespace alter {

class Gateway;
class PromptLibrary;

enum class TaskKind { QA, FactVerification };
enum class SubQueryKind { StepBack, Decomposed };

std::string_view task_name(TaskKind task);
std::string_view sub_query_kind_name(SubQueryKind kind);

struct SubQuery {
  std::string text;
  SubQueryKind kind = SubQueryKind::Decomposed;
};

struct QueryBundle {
  std::string original;
  TaskKind task = TaskKind::QA;
  /// At most one step-back plus three decomposed queries, pairwise distinct
  /// under normalize_query and never equal to the original.
  std::vector<SubQuery> sub_queries;
};

struct QueryAugFlags {
  bool enable_step_back = true;
  bool enable_sub_query = true;
};

inline constexpr std::size_t kMaxDecomposed = 3;

/// Lowercase, collapsed whitespace, terminal punctuation stripped.
std::string normalize_query(std::string_view query);

/// First non-empty line, minus a `New query:` label and surrounding quotes.
/// Empty when nothing usable is present.
std::string clean_step_back(std::string_view response);

/// Numbered/bulleted items, or at least two question lines. At most three;
/// empty on anything else.
std::vector<std::string> parse_sub_queries(std::string_view response);

/// Falls back to the original query on an empty response.
std::string step_back(std::string_view original, const SubTableView& sample, Gateway& gateway,
                      const PromptLibrary& prompts);

std::vector<std::string> decompose(std::string_view original, const SubTableView& sample,
                                   Gateway& gateway, const PromptLibrary& prompts);

/// Runs the enabled augmenters concurrently and merges their output.
QueryBundle build_bundle(std::string_view original, TaskKind task, const SubTableView& sample,
                         Gateway& gateway, const PromptLibrary& prompts, QueryAugFlags flags);

}  // namespace alter
