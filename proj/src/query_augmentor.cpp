#include "alter/query_augmentor.hpp"

#include <cctype>
#include <future>
#include <optional>
#include <sstream>
#include <unordered_set>

#include "alter/gateway.hpp"
#include "alter/prompts.hpp"
#include "alter/tokenizer.hpp"

namespace alter {

namespace {

std::string strip_quotes(std::string_view text) {
  text = trim(text);
  while (text.size() >= 2 &&
         ((text.front() == '"' && text.back() == '"') || (text.front() == '\'' && text.back() == '\'') ||
          (text.front() == '`' && text.back() == '`'))) {
    text = trim(text.substr(1, text.size() - 2));
  }
  return std::string(text);
}

std::string_view strip_label(std::string_view line) {
  const std::string lower = to_lower(line.substr(0, std::min<std::size_t>(line.size(), 24)));
  for (std::string_view label : {"new query:", "step-back query:", "step-back question:", "query:"}) {
    if (lower.rfind(label, 0) == 0) return trim(line.substr(label.size()));
  }
  return line;
}

/// "1. x", "1) x", "- x", "* x", "Sub-query 1: x" -> "x"
std::optional<std::string> list_item(std::string_view line) {
  line = trim(line);
  if (line.empty()) return std::nullopt;
  if (line.front() == '-' || line.front() == '*' || line.front() == '\xE2') {
    // ASCII bullets, and the UTF-8 bullet U+2022.
    if (line.front() == '\xE2') {
      if (line.substr(0, 3) != "\xE2\x80\xA2") return std::nullopt;
      line.remove_prefix(3);
    } else {
      line.remove_prefix(1);
    }
    auto item = strip_quotes(line);
    return item.empty() ? std::nullopt : std::optional(item);
  }
  const std::string lower = to_lower(line.substr(0, std::min<std::size_t>(line.size(), 12)));
  for (std::string_view prefix : {"sub-query", "subquery", "sub query", "q"}) {
    if (lower.rfind(prefix, 0) == 0) {
      std::size_t i = prefix.size();
      while (i < line.size() && line[i] == ' ') ++i;
      if (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) {
        line.remove_prefix(i);
        break;
      }
    }
  }
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i == 0 || i > 2 || i >= line.size()) return std::nullopt;
  if (line[i] != '.' && line[i] != ')' && line[i] != ':') return std::nullopt;
  auto item = strip_quotes(line.substr(i + 1));
  return item.empty() ? std::nullopt : std::optional(item);
}

}  // namespace

std::string_view task_name(TaskKind task) {
  return task == TaskKind::QA ? "qa" : "fact_verification";
}

std::string_view sub_query_kind_name(SubQueryKind kind) {
  return kind == SubQueryKind::StepBack ? "step_back" : "decomposed";
}

std::string normalize_query(std::string_view query) {
  std::string out;
  bool pending_space = false;
  for (char c : trim(query)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  while (!out.empty() && std::string_view(".?!;:, ").find(out.back()) != std::string_view::npos) {
    out.pop_back();
  }
  return out;
}

std::string clean_step_back(std::string_view response) {
  std::istringstream in{std::string(response)};
  std::string line;
  while (std::getline(in, line)) {
    std::string text = strip_quotes(strip_label(trim(line)));
    if (!text.empty()) return text;
  }
  return {};
}

std::vector<std::string> parse_sub_queries(std::string_view response) {
  std::vector<std::string> listed;
  std::vector<std::string> questions;
  std::istringstream in{std::string(response)};
  std::string line;
  while (std::getline(in, line)) {
    if (auto item = list_item(line)) {
      listed.push_back(std::move(*item));
      continue;
    }
    std::string text = strip_quotes(strip_label(trim(line)));
    if (!text.empty() && text.back() == '?') questions.push_back(std::move(text));
  }
  std::vector<std::string>& chosen = !listed.empty() ? listed : questions;
  if (listed.empty() && questions.size() < 2) return {};
  if (chosen.size() > kMaxDecomposed) chosen.resize(kMaxDecomposed);
  return chosen;
}

std::string step_back(std::string_view original, const SubTableView& sample, Gateway& gateway,
                      const PromptLibrary& prompts) {
  const std::string html = serialize_html(sample);
  ChatRequest request;
  request.stage = Stage::step_back;
  request.prompt = prompts.render("step_back", {{"examples", prompts.get("step_back.examples")},
                                               {"sub_table", html},
                                               {"query", std::string(original)}});
  request.table_tokens = count_tokens(html);
  std::string text = clean_step_back(gateway.complete_one(request));
  return text.empty() ? std::string(original) : text;
}

std::vector<std::string> decompose(std::string_view original, const SubTableView& sample,
                                   Gateway& gateway, const PromptLibrary& prompts) {
  const std::string html = serialize_html(sample);
  ChatRequest request;
  request.stage = Stage::sub_query;
  request.prompt = prompts.render("sub_query", {{"examples", prompts.get("sub_query.examples")},
                                               {"sub_table", html},
                                               {"query", std::string(original)}});
  request.table_tokens = count_tokens(html);
  return parse_sub_queries(gateway.complete_one(request));
}

QueryBundle build_bundle(std::string_view original, TaskKind task, const SubTableView& sample,
                         Gateway& gateway, const PromptLibrary& prompts, QueryAugFlags flags) {
  std::future<std::string> stepped;
  if (flags.enable_step_back) {
    stepped = std::async(std::launch::async,
                         [&] { return step_back(original, sample, gateway, prompts); });
  }
  std::vector<std::string> decomposed;
  if (flags.enable_sub_query) decomposed = decompose(original, sample, gateway, prompts);

  QueryBundle bundle{std::string(original), task, {}};
  std::unordered_set<std::string> seen{normalize_query(original)};
  auto add = [&](std::string text, SubQueryKind kind) {
    std::string key = normalize_query(text);
    if (key.empty() || !seen.insert(std::move(key)).second) return;
    bundle.sub_queries.push_back({std::move(text), kind});
  };
  if (stepped.valid()) add(stepped.get(), SubQueryKind::StepBack);
  for (auto& q : decomposed) add(std::move(q), SubQueryKind::Decomposed);
  return bundle;
}

}  // namespace alter
