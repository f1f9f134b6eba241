#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "alter/query_augmentor.hpp"
#include "alter/sql_bridge.hpp"

namespace alter {

class Gateway;
class PromptLibrary;

inline constexpr std::string_view kIrrelevant = "IRRELEVANT";
inline constexpr std::string_view kAnswerMarker = "Answer:";
inline constexpr int kDefaultSelfConsistency = 5;
/// Result tables longer than this are truncated in prompts.
inline constexpr std::size_t kPromptResultRows = 50;

struct SubAnswer {
  std::string sub_query;
  SubQueryKind kind = SubQueryKind::Decomposed;
  std::string text;
  bool irrelevant = false;
  /// Set when the sub-pipeline failed; the answer is then irrelevant.
  std::string error;
};

SubAnswer make_sub_answer(const SubQuery& query, std::string_view response);
SubAnswer failed_sub_answer(const SubQuery& query, std::string error);

/// List of answer items for QA, a verdict for fact verification.
using Normalized = std::variant<std::vector<std::string>, bool>;

struct Answer {
  std::string raw;
  Normalized normalized;
  /// Extracted answer text of every usable sample, in sample order.
  std::vector<std::string> votes;
};

/// One QA item: trimmed, lowercased, unquoted, numbers canonicalized.
std::string normalize_item(std::string_view item);
bool parse_verdict(std::string_view text, bool& verdict);
Normalized normalize_answer(std::string_view raw, TaskKind task);
/// Stable key used for voting; QA item order does not matter.
std::string vote_key(const Normalized& normalized);

/// Text after the last `Answer:` marker on its line, if any.
std::optional<std::string> extract_answer_line(std::string_view sample);

/// Index of the winning key: most frequent, ties to the earliest first occurrence.
std::size_t majority_index(std::span<const std::string> keys);

/// Result rendering used in prompts, truncated to kPromptResultRows.
std::string render_result(const ResultTable& result);

SubAnswer answer_subquery(const ExecutionResult& result, const SubQuery& sub_query,
                          std::string_view original, Gateway& gateway,
                          const PromptLibrary& prompts);

std::string render_sub_answers(std::span<const SubAnswer> subs);

std::string build_joint_prompt(std::string_view result_html, std::span<const SubAnswer> subs,
                               std::string_view original, TaskKind task,
                               const PromptLibrary& prompts);

/// `result_html` is the primary sub-table as shown to the model.
Answer joint_reason(std::string_view result_html, std::span<const SubAnswer> subs,
                    std::string_view original, TaskKind task, Gateway& gateway,
                    const PromptLibrary& prompts, int sc_n = kDefaultSelfConsistency);

Answer joint_reason(const ExecutionResult& primary, std::span<const SubAnswer> subs,
                    std::string_view original, TaskKind task, Gateway& gateway,
                    const PromptLibrary& prompts, int sc_n = kDefaultSelfConsistency);

using AnswerComparator = std::function<bool(const Normalized& predicted, const Normalized& gold)>;

/// Set equality of QA items, numbers within 1e-6; verdict equality for FV.
bool denotation_match(const Normalized& predicted, const Normalized& gold);

std::string normalized_to_string(const Normalized& normalized);

}  // namespace alter
