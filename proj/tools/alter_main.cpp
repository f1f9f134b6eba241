#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "alter/bench.hpp"
#include "alter/errors.hpp"
#include "alter/gateway.hpp"
#include "alter/http_transport.hpp"
#include "alter/pipeline.hpp"
#include "alter/profiler.hpp"
#include "alter/prompts.hpp"
#include "alter/table.hpp"

namespace fs = std::filesystem;
using namespace alter;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitBackend = 3;

struct RunConfig {
  std::size_t k = 3;
  bool no_step_back = false;
  bool no_sub_query = false;
  bool no_augmentation = false;
  int sc_n = kDefaultSelfConsistency;
  int max_repairs = kDefaultMaxRepairs;
  std::string backend = "replay";
  std::string trace_path;
  std::uint64_t seed = 0;
  std::string cache_dir = ".alter-cache";
  std::size_t parallelism = 4;
  std::string prompt_dir;
  std::string augment_mode = "deterministic";
  std::string embedder = "fallback";
  std::size_t budget = 0;

  PipelineConfig pipeline() const {
    PipelineConfig p;
    p.k = k;
    p.enable_step_back = !no_step_back;
    p.enable_sub_query = !no_sub_query;
    p.enable_augmentation = !no_augmentation;
    p.sc_n = sc_n;
    p.max_repairs = max_repairs;
    p.parallelism = parallelism;
    return p;
  }

  AugmentMode mode() const {
    return augment_mode == "llm" ? AugmentMode::llm_enriched : AugmentMode::deterministic_only;
  }

  void validate() const {
    if (backend == "replay" && trace_path.empty()) {
      throw ValidationError("--backend replay requires --trace");
    }
    pipeline().validate();
  }
};

void add_run_options(CLI::App& app, RunConfig& cfg) {
  app.add_option("--backend", cfg.backend, "Model backend")
      ->check(CLI::IsMember({"live", "replay"}))
      ->capture_default_str();
  app.add_option("--trace", cfg.trace_path,
                 "Trace JSONL: read by the replay backend, appended to by the live backend");
  app.add_option("--k", cfg.k, "Rows sampled per query")->capture_default_str();
  app.add_flag("--no-step-back", cfg.no_step_back, "Disable step-back query augmentation");
  app.add_flag("--no-sub-query", cfg.no_sub_query, "Disable sub-query decomposition");
  app.add_flag("--no-augmentation", cfg.no_augmentation, "Hide table augmentation from prompts");
  app.add_option("--sc-n", cfg.sc_n, "Self-consistency samples")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--max-repairs", cfg.max_repairs, "SQL repair attempts")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app.add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  app.add_option("--cache-dir", cfg.cache_dir, "Augmentation cache directory")->capture_default_str();
  app.add_option("--parallelism", cfg.parallelism, "Concurrent pipelines")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--prompt-dir", cfg.prompt_dir, "Directory of prompt template overrides");
  app.add_option("--augment-mode", cfg.augment_mode, "Table augmentation mode")
      ->check(CLI::IsMember({"deterministic", "llm"}))
      ->capture_default_str();
  app.add_option("--embedder", cfg.embedder, "Row embedder")
      ->check(CLI::IsMember({"fallback", "remote"}))
      ->capture_default_str();
  app.add_option("--budget", cfg.budget, "Maximum model calls, 0 for unlimited");
}

/// Backend, gateway and embedder, built on first use.
class Runtime {
 public:
  explicit Runtime(const RunConfig& cfg) : cfg_(cfg) {
    prompts_ = cfg.prompt_dir.empty() ? PromptLibrary() : PromptLibrary::with_overrides(cfg.prompt_dir);
  }

  Gateway& gateway() {
    if (!gateway_) {
      std::shared_ptr<ChatBackend> backend;
      if (cfg_.backend == "replay") {
        backend = std::make_shared<ReplayBackend>(fs::path(cfg_.trace_path));
      } else {
        backend = std::make_shared<LiveBackend>(
            std::make_shared<HttpTransport>(endpoint()),
            cfg_.trace_path.empty() ? nullptr : std::make_shared<TraceStore>(cfg_.trace_path));
      }
      GatewayOptions options;
      options.max_in_flight = cfg_.parallelism;
      if (cfg_.budget > 0) options.call_budget = cfg_.budget;
      gateway_ = std::make_unique<Gateway>(std::move(backend), options);
    }
    return *gateway_;
  }

  const Embedder& embedder() {
    if (!embedder_) {
      if (cfg_.embedder == "remote") {
        embedder_ = std::make_unique<HttpEmbedder>(endpoint());
      } else {
        embedder_ = std::make_unique<FallbackEmbedder>();
      }
    }
    return *embedder_;
  }

  const PromptLibrary& prompts() const { return prompts_; }

  PipelineContext context() { return PipelineContext{gateway(), embedder(), prompts_, &row_cache_}; }

  TableAugmentation augmentation(const Table& table, bool use_cache) {
    const AugmentMode mode = cfg_.mode();
    if (use_cache && !cfg_.cache_dir.empty()) {
      if (auto cached = load_augmentation(table.id(), cfg_.cache_dir); cached && cached->covers(table)) {
        return std::move(*cached);
      }
    }
    auto aug = augment_table(table, mode == AugmentMode::llm_enriched ? &gateway() : nullptr, mode,
                             prompts_);
    if (!cfg_.cache_dir.empty()) store_augmentation(aug, cfg_.cache_dir);
    return aug;
  }

 private:
  static EndpointConfig endpoint() {
    auto config = EndpointConfig::from_env();
    if (!config) throw BackendError("live backend needs ALTER_API_BASE and ALTER_API_KEY");
    return *config;
  }

  const RunConfig& cfg_;
  PromptLibrary prompts_;
  std::unique_ptr<Gateway> gateway_;
  std::unique_ptr<Embedder> embedder_;
  RowEmbeddingCache row_cache_;
};

TablePtr load_shared(const std::string& path) {
  return std::make_shared<const Table>(load_table_file(path));
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

// ---- converters ---------------------------------------------------------------

std::string table_id_from(std::string_view relative) {
  fs::path p(relative);
  std::string id = (p.parent_path().filename().string().empty()
                        ? std::string()
                        : p.parent_path().filename().string() + "_") +
                   p.stem().string();
  for (char& c : id) {
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  }
  return id;
}

void copy_as_csv(const fs::path& source, char delimiter, const fs::path& target) {
  std::ifstream in(source, std::ios::binary);
  if (!in) throw IoError("cannot open table " + source.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto records = parse_delimited(buffer.str(), delimiter);
  if (records.empty()) throw EmptyTableError("empty table " + source.string());
  std::vector<std::string> header = std::move(records.front());
  records.erase(records.begin());
  std::ostringstream out;
  write_csv(out, header, records);
  write_text(target, out.str());
}

/// WikiTQ question TSV (`id, utterance, context, targetValue`) with tables
/// under `root/<context>`.
void convert_wikitq(const fs::path& tsv, const fs::path& root, const fs::path& out_manifest,
                    const fs::path& out_tables) {
  std::ifstream in(tsv, std::ios::binary);
  if (!in) throw IoError("cannot open " + tsv.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  std::ostringstream manifest;
  std::set<std::string> copied;
  std::istringstream lines(text);
  std::string line;
  bool header = true;
  std::map<std::string, std::size_t> col;
  for (std::size_t number = 1; std::getline(lines, line); ++number) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (header) {
      for (std::size_t i = 0; i < fields.size(); ++i) col[fields[i]] = i;
      for (const char* need : {"id", "utterance", "context", "targetValue"}) {
        if (!col.contains(need)) throw ManifestError(fmt::format("{}: missing column {}", tsv.string(), need));
      }
      header = false;
      continue;
    }
    if (fields.size() < col.size()) {
      throw ManifestError(fmt::format("{}:{}: expected {} fields", tsv.string(), number, col.size()));
    }
    const std::string context = fields[col["context"]];
    const std::string table_id = table_id_from(context);
    if (copied.insert(table_id).second) copy_as_csv(root / context, ',', out_tables / (table_id + ".csv"));
    nlohmann::ordered_json entry;
    entry["id"] = fields[col["id"]];
    entry["table_id"] = table_id;
    entry["question"] = fields[col["utterance"]];
    std::vector<std::string> answers;
    std::string target = fields[col["targetValue"]];
    std::size_t s = 0;
    for (;;) {
      const auto bar = target.find('|', s);
      answers.push_back(target.substr(s, bar - s));
      if (bar == std::string::npos) break;
      s = bar + 1;
    }
    entry["answers"] = answers;
    manifest << entry.dump() << '\n';
  }
  write_text(out_manifest, manifest.str());
}

/// TabFact statement JSON (`{"file.csv": [[statements], [labels], caption]}`)
/// with `#`-delimited tables under `root`.
void convert_tabfact(const fs::path& json_path, const fs::path& root, const fs::path& out_manifest,
                     const fs::path& out_tables) {
  std::ifstream in(json_path, std::ios::binary);
  if (!in) throw IoError("cannot open " + json_path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw ManifestError(json_path.string() + ": " + e.what());
  }
  std::ostringstream manifest;
  for (const auto& [file, entry] : doc.items()) {
    if (!entry.is_array() || entry.size() < 2) throw ManifestError("unexpected entry for " + file);
    const std::string table_id = fs::path(file).stem().string();
    copy_as_csv(root / file, '#', out_tables / (table_id + ".csv"));
    const auto& statements = entry[0];
    const auto& labels = entry[1];
    if (statements.size() != labels.size()) throw ManifestError("label count mismatch for " + file);
    for (std::size_t i = 0; i < statements.size(); ++i) {
      nlohmann::ordered_json line;
      line["id"] = fmt::format("{}#{}", table_id, i);
      line["table_id"] = table_id;
      line["question"] = statements[i].get<std::string>();
      line["label"] = labels[i].get<int>();
      manifest << line.dump() << '\n';
    }
  }
  write_text(out_manifest, manifest.str());
}

// ---- trace maintenance ---------------------------------------------------------

int trace_stats(const fs::path& path) {
  const auto records = read_trace(path);
  std::map<std::string, std::size_t> per_stage;
  std::size_t responses = 0;
  for (const auto& r : records) {
    ++per_stage[std::string(stage_name(r.stage))];
    responses += r.responses.size();
  }
  nlohmann::ordered_json out;
  out["records"] = records.size();
  out["responses"] = responses;
  out["stages"] = per_stage;
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

int trace_verify(const fs::path& path) {
  const auto records = read_trace(path);
  std::size_t bad = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const std::string hash = request_hash({r.stage, r.prompt, r.temperature, r.n_samples, 0});
    std::string problem;
    if (hash != r.request_hash) {
      problem = "hash mismatch";
    } else if (static_cast<int>(r.responses.size()) != r.n_samples) {
      problem = fmt::format("{} responses for n_samples={}", r.responses.size(), r.n_samples);
    }
    if (!problem.empty()) {
      ++bad;
      std::cerr << fmt::format("record {}: {}\n", i + 1, problem);
    }
  }
  std::cout << fmt::format("{} records, {} invalid\n", records.size(), bad);
  if (bad != 0) throw ValidationError("trace failed verification");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ALTER: question answering and fact verification over large tables"};
  app.set_config("--config", "", "key=value configuration file");
  app.require_subcommand(1);
  RunConfig cfg;

  auto* augment = app.add_subcommand("augment", "Profile a table and write its augmentation cache");
  std::string table_path;
  augment->add_option("table", table_path, "Table file (.csv, .tsv, .json)")->required();

  auto* ask = app.add_subcommand("ask", "Answer one question about a table");
  std::string question;
  std::string task = "qa";
  bool explain = false;
  ask->add_option("table", table_path, "Table file")->required();
  ask->add_option("question", question, "Question or statement")->required();
  ask->add_option("--task", task, "qa or fv")->check(CLI::IsMember({"qa", "fv"}))->capture_default_str();
  ask->add_flag("--explain", explain, "Print the full stage trace");

  auto* bench = app.add_subcommand("bench", "Evaluate a manifest of examples");
  std::string manifest, tables_dir, report_path = "report.json", csv_path;
  std::string partition = "tokens";
  int perturb_factor = 0;
  bench->add_option("manifest", manifest, "Manifest JSONL")->required();
  bench->add_option("tables", tables_dir, "Directory of <table_id>.csv files")->required();
  bench->add_option("--out", report_path, "Report JSON path")->capture_default_str();
  bench->add_option("--csv", csv_path, "Per-example CSV path (default: report path with .csv)");
  bench->add_option("--partition", partition, "Accuracy bins")
      ->check(CLI::IsMember({"tokens", "cells"}))
      ->capture_default_str();
  bench->add_option("--perturb-factor", perturb_factor, "Append noise rows (1, 2 or 4)")
      ->check(CLI::IsMember({1, 2, 4}));

  auto* perturb_cmd = app.add_subcommand("perturb", "Append noise rows to a table");
  std::string out_path;
  int factor = 1;
  perturb_cmd->add_option("table", table_path, "Table file")->required();
  perturb_cmd->add_option("--factor", factor, "1, 2 or 4")->check(CLI::IsMember({1, 2, 4}))->capture_default_str();
  perturb_cmd->add_option("--out", out_path, "Output CSV")->required();

  auto* trace = app.add_subcommand("trace", "Inspect trace files");
  trace->require_subcommand(1);
  std::string trace_file;
  auto* stats = trace->add_subcommand("stats", "Record counts per stage");
  stats->add_option("file", trace_file)->required();
  auto* verify = trace->add_subcommand("verify", "Recompute hashes and sample counts");
  verify->add_option("file", trace_file)->required();

  std::string source, root, out_manifest, out_tables;
  auto* wikitq = app.add_subcommand("convert-wikitq", "WikiTQ TSV to manifest + CSV tables");
  auto* tabfact = app.add_subcommand("convert-tabfact", "TabFact JSON to manifest + CSV tables");
  for (auto* conv : {wikitq, tabfact}) {
    conv->add_option("source", source, "Question file")->required();
    conv->add_option("root", root, "Directory the table paths are relative to")->required();
    conv->add_option("--manifest", out_manifest, "Output manifest JSONL")->required();
    conv->add_option("--tables", out_tables, "Output table directory")->required();
  }

  add_run_options(app, cfg);
  for (auto* sub : {augment, ask, bench, perturb_cmd}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*augment) {
      Runtime rt(cfg);
      if (cfg.mode() == AugmentMode::llm_enriched) cfg.validate();
      const Table table = load_table_file(table_path);
      const auto aug = rt.augmentation(table, false);
      if (cfg.cache_dir.empty()) {
        std::cout << augmentation_to_json(aug) << '\n';
      } else {
        std::cout << augmentation_path(table.id(), cfg.cache_dir).string() << '\n';
      }
      return kExitOk;
    }
    if (*ask) {
      cfg.validate();
      Runtime rt(cfg);
      const TablePtr table = load_shared(table_path);
      std::optional<TableAugmentation> aug;
      if (!cfg.no_augmentation) aug = rt.augmentation(*table, true);
      auto ctx = rt.context();
      const auto result =
          run_pipeline(table, aug ? &*aug : nullptr, question,
                       task == "fv" ? TaskKind::FactVerification : TaskKind::QA, cfg.pipeline(), ctx);
      if (explain) {
        std::cout << trace_to_json(result, *table).dump(2) << '\n';
      } else {
        std::cout << answer_to_json(result.answer).dump() << '\n';
      }
      return kExitOk;
    }
    if (*bench) {
      cfg.validate();
      Runtime rt(cfg);
      const Dataset dataset = load_dataset(manifest, tables_dir);
      BenchOptions options;
      options.pipeline = cfg.pipeline();
      options.augment_mode = cfg.mode();
      if (!cfg.cache_dir.empty()) options.cache_dir = fs::path(cfg.cache_dir);
      options.perturb_factor = perturb_factor;
      options.seed = cfg.seed;
      options.partition = partition == "cells" ? Partition::cells : Partition::tokens;
      options.parallelism = cfg.parallelism;
      auto ctx = rt.context();
      const EvalReport report = run_benchmark(dataset, options, ctx);
      write_text(report_path, report_to_json(report));
      write_text(csv_path.empty() ? fs::path(report_path).replace_extension(".csv") : fs::path(csv_path),
                 report_to_csv(report));
      std::cout << fmt::format("accuracy {:.4f} over {} examples, token utilization {:.4f}\n",
                               report.accuracy, report.per_example.size(), report.token_utilization);
      return kExitOk;
    }
    if (*perturb_cmd) {
      Runtime rt(cfg);
      if (cfg.mode() == AugmentMode::llm_enriched) cfg.validate();
      const Table table = load_table_file(table_path);
      const auto aug = rt.augmentation(table, true);
      const auto plan = make_plan(table, factor, cfg.seed);
      const Table noisy = perturb(table, &aug, plan);
      std::ostringstream out;
      write_csv(out, noisy);
      write_text(out_path, out.str());
      std::cout << fmt::format("added {} rows ({} x {})\n", plan.total(), plan.base_rows_to_add,
                               plan.factor);
      return kExitOk;
    }
    if (*stats) return trace_stats(trace_file);
    if (*verify) return trace_verify(trace_file);
    if (*wikitq) {
      convert_wikitq(source, root, out_manifest, out_tables);
      return kExitOk;
    }
    if (*tabfact) {
      convert_tabfact(source, root, out_manifest, out_tables);
      return kExitOk;
    }
  } catch (const BackendError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBackend;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitValidation;
}
