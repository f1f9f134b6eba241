// One PASS/FAIL line per acceptance criterion. Exit status is non-zero when
// any criterion fails.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "alter/bench.hpp"
#include "alter/pipeline.hpp"
#include "alter/profiler.hpp"
#include "alter/reasoner.hpp"
#include "alter/retrieval.hpp"
#include "alter/sql_bridge.hpp"
#include "fixtures.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;
using namespace alter;
using namespace alter::testing;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

int failures = 0;

void report(const std::string& name, const std::function<Verdict()>& check) {
  Verdict v;
  try {
    v = check();
  } catch (const std::exception& e) {
    v.pass = false;
    v.detail = std::string("exception: ") + e.what();
  }
  if (!v.pass) ++failures;
  std::cout << fmt::format("{} {}{}\n", v.pass ? "PASS" : "FAIL", name,
                           v.detail.empty() ? "" : " (" + v.detail + ")")
            << std::flush;
}

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

int run_cli(const std::vector<std::string>& args) {
  std::string cmd = quote(ALTER_CLI_PATH);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " >/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "alter_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string csv_text(const Table& t) {
  std::ostringstream out;
  write_csv(out, t);
  return out.str();
}

// ---------------------------------------------------------------------------

Verdict replay_determinism() {
  Verdict v;
  const auto dir = scratch("replay");
  const auto fixtures = fixture_dir();
  std::vector<std::string> reports;
  double slowest = 0;
  for (int run = 0; run < 2; ++run) {
    const auto out = dir / fmt::format("report{}.json", run);
    const auto start = std::chrono::steady_clock::now();
    const int code = run_cli({"bench", (fixtures / "golden" / "manifest.jsonl").string(),
                              (fixtures / "tables").string(), "--trace", golden_trace_path().string(),
                              "--cache-dir", (dir / "cache").string(), "--out", out.string()});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    slowest = std::max(slowest, secs);
    v.require(code == 0, fmt::format("bench exited {}", code));
    reports.push_back(read_file(out));
  }
  v.require(reports[0] == reports[1], "reports differ between runs");
  const auto golden = read_file(fixtures / "golden" / "bench_report.json");
  v.require(reports[0] == golden, "report differs from the pinned golden report");
  const auto doc = nlohmann::json::parse(reports[0]);
  v.require(doc["examples"] == 20, "expected 20 examples");
  v.require(slowest < 30.0, fmt::format("slowest run took {:.1f} s", slowest));
  if (v.pass) {
    v.detail = fmt::format("accuracy {}, slowest run {:.2f} s", doc["accuracy"].dump(), slowest);
  }
  return v;
}

std::vector<std::size_t> brute_force_top3(const Table& table, const std::string& query) {
  const auto q = fallback_embed(query);
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    const auto e = fallback_embed(serialize_row_text(table, r));
    double dot = 0, nq = 0, ne = 0;
    for (std::size_t i = 0; i < q.values.size(); ++i) {
      dot += q.values[i] * e.values[i];
      nq += q.values[i] * q.values[i];
      ne += e.values[i] * e.values[i];
    }
    const double cos = (nq == 0 || ne == 0) ? 0.0 : dot / (std::sqrt(nq) * std::sqrt(ne));
    scored.emplace_back(-cos, r);
  }
  std::sort(scored.begin(), scored.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min<std::size_t>(3, scored.size()); ++i) out.push_back(scored[i].second);
  return out;
}

Verdict sampler_oracle() {
  Verdict v;
  std::mt19937_64 rng(20240601);
  FallbackEmbedder embedder;
  std::size_t agree = 0;
  constexpr int kTables = 200;
  for (int i = 0; i < kTables; ++i) {
    const std::size_t rows = 5 + rng() % 496;
    const std::size_t cols = 2 + rng() % 9;
    const auto table = random_table(rng, rows, cols, fmt::format("r{}", i));
    const auto query = random_query(rng);
    auto got = sample_rows(table, query, {3}, embedder);
    auto want = brute_force_top3(table, query);
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    if (got == want) ++agree;
  }
  v.require(agree == kTables, fmt::format("{} of {} tables disagree", kTables - agree, kTables));
  if (v.pass) v.detail = fmt::format("{}/{} tables", agree, kTables);
  return v;
}

Verdict perturbation_exactness() {
  Verdict v;
  PromptLibrary prompts;
  const std::map<std::size_t, std::size_t> expected_n{{100, 1}, {200, 2}, {350, 4}, {500, 8}};
  for (const auto& [cells, n] : expected_n) {
    const auto table = make_transit_table(cells / 5, fmt::format("n{}", cells));
    v.require(table.cell_count() == cells, "fixture table has the wrong cell count");
    const auto aug = augment_table(table, nullptr, AugmentMode::deterministic_only, prompts);
    for (int factor : {1, 2, 4}) {
      const auto plan = make_plan(table, factor, 42);
      const auto a = perturb(table, &aug, plan);
      const auto b = perturb(table, &aug, plan);
      const std::size_t added = a.row_count() - table.row_count();
      v.require(added == n * static_cast<std::size_t>(factor),
                fmt::format("N={} factor={} added {} rows", cells, factor, added));
      v.require(csv_text(a) == csv_text(b), fmt::format("N={} factor={} not reproducible", cells, factor));
    }
  }
  if (v.pass) v.detail = "12 configurations";
  return v;
}

Verdict prompt_size_robustness() {
  Verdict v;
  PromptLibrary prompts;
  auto gateway = replay_gateway(golden_trace_path());
  std::map<int, std::vector<CapturedPrompt>> prompts_by_factor;
  std::map<int, std::size_t> full_tokens;
  std::map<int, double> utilization;
  for (int factor : kTransitFactors) {
    const auto table = std::make_shared<const Table>(scale_transit_table(kTransitBaseRows, factor));
    const auto aug = augment_table(*table, nullptr, AugmentMode::deterministic_only, prompts);
    std::size_t shown = 0, total = 0;
    for (const auto& q : transit_questions()) {
      PipelineTrace trace;
      auto captured = capture_prompts(table, &aug, q, TaskKind::QA, PipelineConfig{}, *gateway, &trace);
      auto& all = prompts_by_factor[factor];
      all.insert(all.end(), captured.begin(), captured.end());
      shown += trace.tokens_shown;
      total += trace.table_tokens;
    }
    full_tokens[factor] = full_table_tokens(*table);
    utilization[factor] = static_cast<double>(shown) / static_cast<double>(total);
  }

  const auto& base = prompts_by_factor.at(1);
  double worst = 0;
  std::string worst_at;
  for (int factor : kTransitFactors) {
    const auto& other = prompts_by_factor.at(factor);
    v.require(other.size() == base.size(), fmt::format("x{} issued {} prompts, x1 issued {}", factor,
                                                       other.size(), base.size()));
    if (other.size() != base.size()) break;
    for (std::size_t i = 0; i < base.size(); ++i) {
      v.require(other[i].stage == base[i].stage, "prompt stages do not line up");
      if (base[i].table_tokens == 0) {
        v.require(other[i].table_tokens == 0, "table content appeared in a prompt without any");
        continue;
      }
      const double delta = std::abs(static_cast<double>(other[i].table_tokens) -
                                    static_cast<double>(base[i].table_tokens)) /
                           static_cast<double>(base[i].table_tokens);
      if (delta > worst) {
        worst = delta;
        worst_at = fmt::format("{} prompt {} at x{}: {} vs {} tokens", stage_name(base[i].stage), i, factor,
                               other[i].table_tokens, base[i].table_tokens);
      }
    }
  }
  v.require(worst < 0.05, fmt::format("prompt table tokens changed by {:.2f}%, {}", worst * 100, worst_at));

  const double growth = static_cast<double>(full_tokens.at(8)) / static_cast<double>(full_tokens.at(1));
  v.require(growth >= 2.0, fmt::format("full table grew only x{:.2f}", growth));
  for (std::size_t i = 1; i < std::size(kTransitFactors); ++i) {
    const int prev = kTransitFactors[i - 1], cur = kTransitFactors[i];
    v.require(full_tokens.at(cur) > full_tokens.at(prev), "full-table tokens not increasing");
    v.require(utilization.at(cur) < utilization.at(prev),
              fmt::format("utilization x{} {:.4f} not below x{} {:.4f}", cur, utilization.at(cur), prev,
                          utilization.at(prev)));
  }
  if (v.pass) {
    v.detail = fmt::format("max prompt delta {:.2f}%, full table x{:.2f}, utilization {:.3f}>{:.3f}>{:.3f}>{:.3f}",
                           worst * 100, growth, utilization[1], utilization[2], utilization[4], utilization[8]);
  }
  return v;
}

bool cell_matches(const std::string& got, const nlohmann::json& want) {
  if (want.is_null()) return got.empty();
  if (want.is_number()) {
    char* end = nullptr;
    const double x = std::strtod(got.c_str(), &end);
    if (got.empty() || *end != '\0') return false;
    const double w = want.get<double>();
    return std::abs(x - w) <= 1e-9 * std::max(1.0, std::abs(w));
  }
  return got == want.get<std::string>();
}

bool rows_match(const std::vector<std::string>& got, const nlohmann::json& want) {
  if (got.size() != want.size()) return false;
  for (std::size_t i = 0; i < got.size(); ++i) {
    if (!cell_matches(got[i], want[i])) return false;
  }
  return true;
}

bool result_matches(const ResultTable& got, const nlohmann::json& want, bool ordered) {
  if (got.rows.size() != want.size()) return false;
  std::vector<bool> used(want.size(), false);
  for (std::size_t i = 0; i < got.rows.size(); ++i) {
    if (ordered) {
      if (!rows_match(got.rows[i], want[i])) return false;
      continue;
    }
    bool found = false;
    for (std::size_t j = 0; j < want.size() && !found; ++j) {
      if (!used[j] && rows_match(got.rows[i], want[j])) used[j] = found = true;
    }
    if (!found) return false;
  }
  return true;
}

Verdict sql_fidelity() {
  Verdict v;
  PromptLibrary prompts;
  std::ifstream in(fixture_dir() / "golden" / "sql_golden.json");
  const auto corpus = nlohmann::json::parse(in);
  v.require(corpus.size() == 50, "corpus must hold 50 queries");
  std::map<std::string, SqlEngine> engines;
  std::size_t matched = 0;
  for (const auto& q : corpus) {
    const std::string id = q["table"];
    if (!engines.contains(id)) {
      const auto table = fixture_table(id);
      engines.emplace(id, load_into_engine(*table, augment_table(*table, nullptr,
                                                                 AugmentMode::deterministic_only, prompts)));
    }
    const auto got = engines.at(id).execute(q["sql"].get<std::string>());
    if (result_matches(got, q["rows"], q["ordered"].get<bool>())) {
      ++matched;
    } else {
      v.require(false, "mismatch on " + q["sql"].get<std::string>());
    }
  }
  const std::vector<std::string> writes{
      "INSERT INTO t (Year) VALUES (1)", "UPDATE t SET Year = 0", "DELETE FROM t",
      "DROP TABLE t",  "CREATE TABLE u (a)", "ALTER TABLE t ADD COLUMN z",
      "SELECT 1; DELETE FROM t", "PRAGMA writable_schema = 1", "ATTACH DATABASE ':memory:' AS x",
      "REPLACE INTO t (Year) VALUES (1)", "VACUUM", "BEGIN"};
  const auto& engine = engines.at("vehicles");
  std::size_t rejected = 0;
  for (const auto& sql : writes) {
    try {
      engine.execute(sql);
      v.require(false, "accepted: " + sql);
    } catch (const SqlParseError&) {
      ++rejected;
    }
  }
  v.require(engine.execute("SELECT COUNT(*) FROM t").rows.at(0).at(0) == "10", "table was modified");
  if (v.pass) v.detail = fmt::format("{}/50 queries, {}/{} writes rejected", matched, rejected, writes.size());
  return v;
}

std::string oracle_winner(const std::vector<std::string>& keys) {
  std::map<std::string, int> count;
  for (const auto& k : keys) ++count[k];
  int best = 0;
  for (const auto& [k, c] : count) best = std::max(best, c);
  for (const auto& k : keys) {
    if (count[k] == best) return k;
  }
  return {};
}

Verdict voting_properties() {
  Verdict v;
  std::mt19937_64 rng(99);
  int strict = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::string> keys(1 + rng() % 9);
    for (auto& k : keys) k = std::string(1, static_cast<char>('a' + rng() % 4));
    const auto winner = keys[majority_index(keys)];
    v.require(winner == oracle_winner(keys), "winner differs from the counting oracle");
    std::map<std::string, int> count;
    for (const auto& k : keys) ++count[k];
    if (count[winner] * 2 > static_cast<int>(keys.size())) {
      ++strict;
      for (int p = 0; p < 5; ++p) {
        auto shuffled = keys;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        v.require(shuffled[majority_index(shuffled)] == winner, "permutation changed a strict majority");
      }
    }
  }

  // The golden corpus example m4 samples Japan, South Korea, South Korea, Japan, China.
  PromptLibrary prompts;
  FallbackEmbedder embedder;
  auto gateway = replay_gateway(golden_trace_path());
  PipelineContext ctx{*gateway, embedder, prompts, nullptr};
  const auto table = fixture_table("medals");
  const auto aug = augment_table(*table, nullptr, AugmentMode::deterministic_only, prompts);
  const auto trace = run_pipeline(table, &aug, "which nation ranked second?", TaskKind::QA,
                                  PipelineConfig{}, ctx);
  std::vector<std::string> keys;
  for (const auto& vote : trace.answer.votes) keys.push_back(vote_key(normalize_answer(vote, TaskKind::QA)));
  std::map<std::string, int> count;
  for (const auto& k : keys) ++count[k];
  int top = 0, tied = 0;
  for (const auto& [k, c] : count) top = std::max(top, c);
  for (const auto& [k, c] : count) tied += c == top;
  v.require(tied >= 2, "tie fixture does not contain a tie");
  v.require(trace.answer.raw == "Japan", "tie fixture resolved to " + trace.answer.raw);
  if (v.pass) v.detail = fmt::format("1000 multisets, {} strict majorities permuted, tie fixture -> Japan", strict);
  return v;
}

bool has_stage(const std::vector<CapturedPrompt>& ps, Stage s) {
  return std::any_of(ps.begin(), ps.end(), [&](const auto& p) { return p.stage == s; });
}

std::size_t count_stage(const std::vector<CapturedPrompt>& ps, Stage s) {
  return static_cast<std::size_t>(std::count_if(ps.begin(), ps.end(), [&](const auto& p) { return p.stage == s; }));
}

/// Body rows of the first sub-table in a prompt.
std::size_t first_table_rows(const std::string& prompt) {
  const auto start = prompt.find("<tbody>");
  const auto end = prompt.find("</tbody>", start);
  if (start == std::string::npos || end == std::string::npos) return 0;
  std::size_t rows = 0;
  for (auto pos = prompt.find("<tr>", start); pos != std::string::npos && pos < end; pos = prompt.find("<tr>", pos + 1)) {
    ++rows;
  }
  return rows;
}

const CapturedPrompt* original_prompt(const std::vector<CapturedPrompt>& ps, Stage s) {
  for (const auto& p : ps) {
    if (p.stage == s && p.prompt.find(kAblationQuestion) != std::string::npos &&
        p.prompt.find("Query: " + std::string(kAblationQuestion)) != std::string::npos) {
      return &p;
    }
  }
  return nullptr;
}

Verdict ablation_wiring() {
  Verdict v;
  PromptLibrary prompts;
  auto gateway = replay_gateway(golden_trace_path());
  const auto table = fixture_table(kAblationTable);
  const auto aug = augment_table(*table, nullptr, AugmentMode::deterministic_only, prompts);
  std::map<std::string, std::vector<CapturedPrompt>> captured;
  for (const auto& c : ablation_cases()) {
    auto ps = capture_prompts(table, &aug, kAblationQuestion, TaskKind::QA, c.config, *gateway);
    const auto dir = fixture_dir() / "golden_prompts" / c.name;
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(dir)) files += entry.is_regular_file();
    v.require(files == ps.size(), fmt::format("{}: {} prompts, {} golden files", c.name, ps.size(), files));
    for (std::size_t i = 0; i < ps.size() && v.pass; ++i) {
      const auto file = dir / fmt::format("{:02}_{}.txt", i, stage_name(ps[i].stage));
      v.require(fs::exists(file) && read_file(file) == ps[i].prompt,
                fmt::format("{}: prompt {} differs from {}", c.name, i, file.filename().string()));
    }
    captured[c.name] = std::move(ps);
  }
  if (!v.pass) return v;

  const auto& full = captured["full"];
  const std::string schema_marker = "(header \"Year\"): Numerical";
  const std::string detail_marker = "  semantic: ";

  v.require(has_stage(full, Stage::step_back) && has_stage(full, Stage::sub_query), "full run lacks query augmentation");
  v.require(count_stage(full, Stage::col_filter) > 1, "full run has no sub-query pipelines");

  const auto& nsb = captured["no_step_back"];
  v.require(!has_stage(nsb, Stage::step_back), "--no-step-back still issued a step-back prompt");
  v.require(count_stage(nsb, Stage::sub_query) == count_stage(full, Stage::sub_query), "--no-step-back changed decomposition");
  v.require(count_stage(nsb, Stage::col_filter) == count_stage(full, Stage::col_filter) - 1,
            "--no-step-back should drop exactly one sub-pipeline");

  const auto& nsq = captured["no_sub_query"];
  v.require(!has_stage(nsq, Stage::sub_query), "--no-sub-query still issued a decomposition prompt");
  v.require(count_stage(nsq, Stage::step_back) == 1, "--no-sub-query dropped step-back");
  v.require(count_stage(nsq, Stage::col_filter) == 2, "--no-sub-query should keep primary plus step-back pipelines");

  const auto& na = captured["no_augmentation"];
  for (const auto& p : na) {
    v.require(p.prompt.find(schema_marker) == std::string::npos && p.prompt.find(detail_marker) == std::string::npos,
              fmt::format("--no-augmentation left augmentation text in a {} prompt", stage_name(p.stage)));
  }
  const auto* full_filter = original_prompt(full, Stage::col_filter);
  const auto* full_sql = original_prompt(full, Stage::sql_gen);
  v.require(full_filter && full_filter->prompt.find(schema_marker) != std::string::npos,
            "full column-filter prompt lacks the schema block");
  v.require(full_sql && full_sql->prompt.find(detail_marker) != std::string::npos,
            "full SQL prompt lacks column details");
  v.require(count_stage(na, Stage::col_filter) == count_stage(full, Stage::col_filter),
            "--no-augmentation changed the pipeline shape");

  for (const auto& [name, rows] : std::vector<std::pair<std::string, std::size_t>>{{"k0", 0}, {"k1", 1}, {"full", 3}}) {
    const auto* filter = original_prompt(captured[name], Stage::col_filter);
    v.require(filter != nullptr, name + ": no column-filter prompt for the question");
    if (filter) {
      v.require(first_table_rows(filter->prompt) == rows,
                fmt::format("{}: column filter saw {} rows, expected {}", name, first_table_rows(filter->prompt), rows));
    }
  }
  const auto& k0na = captured["k0_no_augmentation"];
  const auto* bare = original_prompt(k0na, Stage::col_filter);
  v.require(bare && first_table_rows(bare->prompt) == 0 && bare->prompt.find(schema_marker) == std::string::npos,
            "k=0 without augmentation still shows rows or augmentation");
  if (v.pass) v.detail = fmt::format("{} configurations against golden prompts", captured.size());
  return v;
}

Verdict schema_inference() {
  Verdict v;
  std::ifstream in(fixture_dir() / "schema" / "cases.json");
  const auto cases = nlohmann::json::parse(in);
  v.require(cases.size() == 30, "expected 30 cases");
  int right = 0;
  for (const auto& c : cases) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& cell : c["cells"]) rows.push_back({cell.get<std::string>()});
    const Table t("s", {"c"}, rows);
    const auto got = std::string(schema_type_name(infer_schema_type(t.column(0))));
    if (got == c["expect"].get<std::string>()) {
      ++right;
    } else {
      v.require(false, fmt::format("{}: got {}", c["name"].get<std::string>(), got));
    }
  }
  if (v.pass) v.detail = fmt::format("{}/30", right);
  return v;
}

}  // namespace

int main() {
  report("replay_determinism", replay_determinism);
  report("row_sampler_oracle", sampler_oracle);
  report("perturbation_exactness", perturbation_exactness);
  report("prompt_size_robustness", prompt_size_robustness);
  report("sql_engine_fidelity", sql_fidelity);
  report("voting_properties", voting_properties);
  report("ablation_wiring", ablation_wiring);
  report("schema_inference", schema_inference);

  const char* smoke = std::getenv("ALTER_LIVE_SMOKE");
  const bool creds = std::getenv("ALTER_API_BASE") && std::getenv("ALTER_API_KEY");
  if (smoke && std::string(smoke) == "1" && creds) {
    report("live_smoke", [] {
      Verdict v;
      const auto dir = scratch("live");
      const int code = run_cli({"bench", (fixture_dir() / "live_smoke.jsonl").string(),
                                (fixture_dir() / "tables").string(),
                                "--backend", "live", "--trace", (dir / "live.jsonl").string(),
                                "--out", (dir / "report.json").string()});
      v.require(code == 0, fmt::format("bench exited {}", code));
      if (code == 0) {
        const auto doc = nlohmann::json::parse(read_file(dir / "report.json"));
        for (const auto& e : doc["per_example"]) {
          v.require(e["error"].get<std::string>().empty(), e["id"].get<std::string>() + ": " + e["error"].get<std::string>());
        }
        v.require(doc["examples"] == 5, "expected 5 questions");
      }
      return v;
    });
  } else {
    std::cout << "SKIP live_smoke (set ALTER_LIVE_SMOKE=1 with ALTER_API_BASE and ALTER_API_KEY)\n";
  }
  return failures == 0 ? 0 : 1;
}
