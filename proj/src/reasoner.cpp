#include "alter/reasoner.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

#include <fmt/format.h>

#include "alter/cell.hpp"
#include "alter/gateway.hpp"
#include "alter/prompts.hpp"
#include "alter/tokenizer.hpp"

namespace alter {

namespace {

std::string_view strip_wrapping(std::string_view text) {
  for (;;) {
    text = trim(text);
    if (text.size() >= 3 && text.back() == '.' && std::string_view("\"'`*").find(text[text.size() - 2]) !=
                                                      std::string_view::npos) {
      text.remove_suffix(1);
    }
    if (text.size() >= 2) {
      const char f = text.front();
      const char b = text.back();
      if ((f == '"' && b == '"') || (f == '\'' && b == '\'') || (f == '`' && b == '`') ||
          (f == '*' && b == '*')) {
        text = text.substr(1, text.size() - 2);
        continue;
      }
    }
    return text;
  }
}

std::optional<double> item_number(std::string_view item) {
  if (item.empty()) return std::nullopt;
  char* end = nullptr;
  const std::string s(item);
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

SubAnswer make_sub_answer(const SubQuery& query, std::string_view response) {
  SubAnswer out{query.text, query.kind, std::string(trim(response)), false, {}};
  std::string_view bare = strip_wrapping(out.text);
  while (!bare.empty() && (bare.back() == '.' || bare.back() == '!')) bare.remove_suffix(1);
  if (out.text.empty() || to_lower(bare) == to_lower(kIrrelevant)) {
    out.text = std::string(kIrrelevant);
    out.irrelevant = true;
  }
  return out;
}

SubAnswer failed_sub_answer(const SubQuery& query, std::string error) {
  return {query.text, query.kind, std::string(kIrrelevant), true, std::move(error)};
}

std::string normalize_item(std::string_view item) {
  std::string text = to_lower(strip_wrapping(item));
  std::string_view core = trim(text);
  std::string_view number = core;
  if (!number.empty() && number.front() == '$') number = trim(number.substr(1));
  if (!number.empty() && number.back() == '%') number = trim(number.substr(0, number.size() - 1));
  if (auto parsed = parse_number(number)) return format_real(parsed->value);
  return std::string(core);
}

bool parse_verdict(std::string_view text, bool& verdict) {
  std::string key = to_lower(strip_wrapping(text));
  while (!key.empty() && (key.back() == '.' || key.back() == '!')) key.pop_back();
  key = std::string(trim(key));
  if (key == "yes" || key == "true" || key == "supported" || key == "1") {
    verdict = true;
    return true;
  }
  if (key == "no" || key == "false" || key == "refuted" || key == "0") {
    verdict = false;
    return true;
  }
  return false;
}

Normalized normalize_answer(std::string_view raw, TaskKind task) {
  if (task == TaskKind::FactVerification) {
    bool verdict = false;
    if (!parse_verdict(raw, verdict)) {
      throw UnmappableVerdictError(fmt::format("cannot map verdict \"{}\"", raw));
    }
    return verdict;
  }
  std::vector<std::string> items;
  std::size_t start = 0;
  for (;;) {
    const std::size_t bar = raw.find('|', start);
    std::string item = normalize_item(raw.substr(start, bar - start));
    if (!item.empty()) items.push_back(std::move(item));
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  if (items.empty()) items.emplace_back();
  return items;
}

std::string vote_key(const Normalized& normalized) {
  if (const bool* verdict = std::get_if<bool>(&normalized)) return *verdict ? "true" : "false";
  auto items = std::get<std::vector<std::string>>(normalized);
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  std::string key;
  for (const auto& item : items) {
    key += item;
    key.push_back('\x1f');
  }
  return key;
}

std::optional<std::string> extract_answer_line(std::string_view sample) {
  const std::string lower = to_lower(sample);
  const std::string marker = to_lower(kAnswerMarker);
  const std::size_t at = lower.rfind(marker);
  if (at == std::string::npos) return std::nullopt;
  std::string_view rest = sample.substr(at + marker.size());
  rest = rest.substr(0, rest.find('\n'));
  std::string_view text = strip_wrapping(rest);
  if (text.empty()) return std::nullopt;
  return std::string(text);
}

std::size_t majority_index(std::span<const std::string> keys) {
  std::unordered_map<std::string_view, std::size_t> counts;
  for (const auto& key : keys) ++counts[key];
  std::size_t best = 0;
  std::size_t best_count = 0;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const std::size_t c = counts[keys[i]];
    if (c > best_count) {
      best = i;
      best_count = c;
    }
  }
  return best;
}

std::string render_result(const ResultTable& result) {
  std::string html = result.to_html(kPromptResultRows);
  if (result.rows.size() > kPromptResultRows) {
    html += fmt::format("\n(showing {} of {} rows)", kPromptResultRows, result.rows.size());
  }
  return html;
}

SubAnswer answer_subquery(const ExecutionResult& result, const SubQuery& sub_query,
                          std::string_view original, Gateway& gateway,
                          const PromptLibrary& prompts) {
  const std::string html = result.result ? render_result(*result.result) : std::string();
  ChatRequest request;
  request.stage = Stage::sub_answer;
  request.prompt = prompts.render("sub_answer", {{"result_table", html},
                                                {"sub_query", sub_query.text},
                                                {"original", std::string(original)}});
  request.table_tokens = count_tokens(html);
  return make_sub_answer(sub_query, gateway.complete_one(request));
}

std::string render_sub_answers(std::span<const SubAnswer> subs) {
  std::string out;
  for (const auto& sub : subs) {
    if (sub.irrelevant) continue;
    out += fmt::format("- {}: {}\n", sub.sub_query, sub.text);
  }
  if (out.empty()) return "(none)";
  out.pop_back();
  return out;
}

std::string build_joint_prompt(std::string_view result_html, std::span<const SubAnswer> subs,
                               std::string_view original, TaskKind task,
                               const PromptLibrary& prompts) {
  return prompts.render(
      "joint_reason",
      {{"result_table", std::string(result_html)},
       {"sub_answers", render_sub_answers(subs)},
       {"query", std::string(original)},
       {"task_instruction", prompts.get(task == TaskKind::QA ? "task_qa" : "task_fv")}});
}

Answer joint_reason(std::string_view result_html, std::span<const SubAnswer> subs,
                    std::string_view original, TaskKind task, Gateway& gateway,
                    const PromptLibrary& prompts, int sc_n) {
  if (sc_n < 1) throw ValidationError("sc_n must be at least 1");
  ChatRequest request;
  request.stage = Stage::joint_reason;
  request.prompt = build_joint_prompt(result_html, subs, original, task, prompts);
  request.temperature = default_temperature(Stage::joint_reason, sc_n > 1);
  request.n_samples = sc_n;
  request.table_tokens = count_tokens(result_html);
  const auto samples = gateway.complete(request);

  Answer answer;
  std::vector<Normalized> normalized;
  std::vector<std::string> keys;
  for (const auto& sample : samples) {
    auto text = extract_answer_line(sample);
    if (!text) continue;
    try {
      normalized.push_back(normalize_answer(*text, task));
    } catch (const UnmappableVerdictError&) {
      continue;
    }
    keys.push_back(vote_key(normalized.back()));
    answer.votes.push_back(std::move(*text));
  }
  if (keys.empty()) {
    throw AnswerExtractionError(
        fmt::format("no sample out of {} contained \"{}\"", samples.size(), kAnswerMarker));
  }
  const std::size_t winner = majority_index(keys);
  answer.raw = answer.votes[winner];
  answer.normalized = std::move(normalized[winner]);
  return answer;
}

Answer joint_reason(const ExecutionResult& primary, std::span<const SubAnswer> subs,
                    std::string_view original, TaskKind task, Gateway& gateway,
                    const PromptLibrary& prompts, int sc_n) {
  const std::string html = primary.result ? render_result(*primary.result) : std::string();
  return joint_reason(html, subs, original, task, gateway, prompts, sc_n);
}

bool denotation_match(const Normalized& predicted, const Normalized& gold) {
  if (predicted.index() != gold.index()) return false;
  if (const bool* p = std::get_if<bool>(&predicted)) return *p == std::get<bool>(gold);

  auto distinct = [](const std::vector<std::string>& items) {
    std::vector<std::string> out = items;
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  };
  const auto p = distinct(std::get<std::vector<std::string>>(predicted));
  const auto g = distinct(std::get<std::vector<std::string>>(gold));
  if (p.size() != g.size()) return false;
  auto same = [](const std::string& a, const std::string& b) {
    if (a == b) return true;
    const auto x = item_number(a);
    const auto y = item_number(b);
    return x && y && std::fabs(*x - *y) <= 1e-6 * std::max(1.0, std::fabs(*y));
  };
  std::vector<bool> used(g.size(), false);
  for (const auto& item : p) {
    bool found = false;
    for (std::size_t j = 0; j < g.size() && !found; ++j) {
      if (!used[j] && same(item, g[j])) found = used[j] = true;
    }
    if (!found) return false;
  }
  return true;
}

std::string normalized_to_string(const Normalized& normalized) {
  if (const bool* verdict = std::get_if<bool>(&normalized)) return *verdict ? "true" : "false";
  const auto& items = std::get<std::vector<std::string>>(normalized);
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += " | ";
    out += items[i];
  }
  return out;
}

}  // namespace alter
