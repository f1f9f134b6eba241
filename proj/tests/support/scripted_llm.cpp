#include "scripted_llm.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "alter/cell.hpp"
#include "alter/errors.hpp"

namespace alter::testing {

namespace {

std::string unescape(std::string_view text) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '&') {
      for (auto [entity, ch] : {std::pair{"&amp;", '&'}, std::pair{"&lt;", '<'},
                                std::pair{"&gt;", '>'}, std::pair{"&quot;", '"'}}) {
        const std::string_view e(entity);
        if (text.substr(i, e.size()) == e) {
          out.push_back(ch);
          i += e.size() - 1;
          goto next;
        }
      }
    }
    out.push_back(text[i]);
  next:;
  }
  return out;
}

std::vector<std::string> cells_between(std::string_view html, std::string_view open,
                                       std::string_view close) {
  std::vector<std::string> out;
  std::size_t at = 0;
  while ((at = html.find(open, at)) != std::string_view::npos) {
    at += open.size();
    const std::size_t end = html.find(close, at);
    out.push_back(unescape(html.substr(at, end - at)));
    at = end + close.size();
  }
  return out;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::string fenced(std::string_view sql) { return fmt::format("```sql\n{}\n```", sql); }

}  // namespace

HtmlTable parse_html_table(std::string_view html) {
  HtmlTable out;
  const auto body_at = html.find("<tbody>");
  out.headers = cells_between(html.substr(0, body_at), "<th>", "</th>");
  if (body_at == std::string_view::npos) return out;
  std::string_view body = html.substr(body_at);
  std::size_t at = 0;
  while ((at = body.find("<tr>", at)) != std::string_view::npos) {
    const std::size_t end = body.find("</tr>", at);
    out.rows.push_back(cells_between(body.substr(at, end - at), "<td>", "</td>"));
    at = end;
  }
  return out;
}

std::optional<std::string> last_labeled(std::string_view prompt, std::string_view label) {
  std::optional<std::string> found;
  std::istringstream in{std::string(prompt)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(label, 0) == 0) found = line.substr(label.size());
  }
  return found;
}

ScriptedTransport::ScriptedTransport(nlohmann::json script) : script_(std::move(script)) {}

ScriptedTransport ScriptedTransport::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open script " + path.string());
  return ScriptedTransport(nlohmann::json::parse(in));
}

const nlohmann::json* ScriptedTransport::entry(const std::string& query) const {
  auto it = script_.find(query);
  return it == script_.end() ? nullptr : &*it;
}

std::vector<std::string> ScriptedTransport::send(const ChatRequest& request) {
  ++calls_;
  if (request.stage == Stage::joint_reason) return joint(request);
  return {respond(request)};
}

std::string ScriptedTransport::respond(const ChatRequest& request) const {
  const std::string query = last_labeled(request.prompt, "Query: ").value_or("");
  const nlohmann::json* e = entry(query);
  auto scripted = [&](const char* key) -> const nlohmann::json* {
    if (e == nullptr || !e->contains(key)) return nullptr;
    return &(*e)[key];
  };
  const HtmlTable shown =
      parse_html_table(last_labeled(request.prompt, "Sub-table: ")
                           .value_or(last_labeled(request.prompt, "Table: ").value_or("")));

  switch (request.stage) {
    case Stage::step_back:
      if (auto* s = scripted("step_back")) return s->get<std::string>();
      return "";
    case Stage::sub_query: {
      auto* s = scripted("sub_queries");
      if (s == nullptr) return "The query is already simple enough.";
      std::string out;
      int n = 0;
      for (const auto& q : *s) out += fmt::format("{}. {}\n", ++n, q.get<std::string>());
      return out;
    }
    case Stage::col_filter:
      if (auto* s = scripted("columns")) {
        return "Columns: " + join(s->get<std::vector<std::string>>(), ", ");
      }
      return "Columns: " + join(shown.headers, ", ");
    case Stage::sql_gen: {
      const bool repair = request.prompt.find("The previous SQL failed.") != std::string::npos;
      if (auto* s = scripted(repair ? "sql_repair" : "sql")) return fenced(s->get<std::string>());
      return fenced("SELECT * FROM t");
    }
    case Stage::sub_answer: {
      const std::string sub = last_labeled(request.prompt, "Sub-query: ").value_or("");
      if (const nlohmann::json* se = entry(sub); se != nullptr && se->contains("answer")) {
        return (*se)["answer"].get<std::string>();
      }
      const HtmlTable result =
          parse_html_table(last_labeled(request.prompt, "Result table: ").value_or(""));
      if (result.rows.empty()) return "IRRELEVANT";
      return join(result.rows.front(), ", ");
    }
    case Stage::schema_aug: {
      std::string out;
      for (const auto& h : shown.headers) out += h + ": Char\n";
      return out;
    }
    case Stage::semantic_aug: {
      std::string out = fmt::format("Summary: A table with {} columns.\n", shown.headers.size());
      for (const auto& h : shown.headers) out += fmt::format("{}: the {} of each entry\n", h, to_lower(h));
      return out;
    }
    case Stage::literal_aug: {
      std::string out;
      for (const auto& h : shown.headers) {
        const std::string first = shown.rows.empty() ? std::string() : shown.rows.front().at(
            &h - shown.headers.data());
        out += fmt::format("{}: values like \"{}\"\n", h, first);
      }
      return out;
    }
    case Stage::joint_reason:
      break;
  }
  return "";
}

std::vector<std::string> ScriptedTransport::joint(const ChatRequest& request) const {
  const std::string query = last_labeled(request.prompt, "Query: ").value_or("");
  const bool verification = request.prompt.find("yes or no") != std::string::npos;
  std::vector<std::string> votes;
  if (const nlohmann::json* e = entry(query); e != nullptr && e->contains("votes")) {
    votes = (*e)["votes"].get<std::vector<std::string>>();
  } else {
    const HtmlTable result = parse_html_table(last_labeled(request.prompt, "Sub-table: ").value_or(""));
    std::string answer;
    if (verification) {
      answer = result.rows.empty() ? "no" : "yes";
    } else {
      std::vector<std::string> first;
      for (const auto& row : result.rows) {
        if (!row.empty()) first.push_back(row.front());
      }
      answer = first.empty() ? "none" : join(first, " | ");
    }
    votes = {answer, answer, answer, "unsure", answer};
  }
  std::vector<std::string> out;
  for (int i = 0; i < request.n_samples; ++i) {
    const std::string& v = votes[static_cast<std::size_t>(i) % votes.size()];
    if (v == "<none>") {
      out.push_back("The table does not say.");
    } else {
      out.push_back(fmt::format("The sub-table lists the relevant rows.\nAnswer: {}", v));
    }
  }
  return out;
}

}  // namespace alter::testing
