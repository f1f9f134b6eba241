#include "alter/bench.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "alter/cell.hpp"
#include "alter/gateway.hpp"
#include "alter/tokenizer.hpp"

namespace alter {

namespace {

using json = nlohmann::json;

Normalized gold_from_json(const json& line, TaskKind& task) {
  if (line.contains("answers")) {
    task = TaskKind::QA;
    const json& answers = line.at("answers");
    std::vector<std::string> items;
    auto add = [&](const json& value) {
      items.push_back(normalize_item(value.is_string() ? value.get<std::string>() : value.dump()));
    };
    if (answers.is_array()) {
      for (const auto& a : answers) add(a);
    } else {
      add(answers);
    }
    if (items.empty()) throw ManifestError("empty answers");
    return items;
  }
  if (line.contains("label")) {
    task = TaskKind::FactVerification;
    const json& label = line.at("label");
    if (label.is_boolean()) return label.get<bool>();
    if (label.is_number_integer()) {
      const auto v = label.get<long long>();
      if (v == 0 || v == 1) return v == 1;
    }
    bool verdict = false;
    if (label.is_string() && parse_verdict(label.get<std::string>(), verdict)) return verdict;
    throw ManifestError("label must be 0/1, true/false or yes/no");
  }
  throw ManifestError("needs \"answers\" or \"label\"");
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& manifest,
                     const std::filesystem::path& tables_dir) {
  std::ifstream in(manifest);
  if (!in) throw ManifestError(fmt::format("cannot open manifest {}", manifest.string()));
  Dataset out;
  std::vector<std::string> problems;
  std::map<std::string, std::string, std::less<>> failed_tables;
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (trim(line).empty()) continue;
    try {
      const json doc = json::parse(line);
      if (!doc.is_object()) throw ManifestError("not a JSON object");
      BenchExample ex;
      ex.table_id = doc.at("table_id").get<std::string>();
      ex.question = doc.at("question").get<std::string>();
      ex.id = doc.contains("id") ? (doc["id"].is_string() ? doc["id"].get<std::string>()
                                                          : doc["id"].dump())
                                 : fmt::format("ex{}", number);
      ex.gold = gold_from_json(doc, ex.task);
      if (!out.tables.contains(ex.table_id)) {
        auto failed = failed_tables.find(ex.table_id);
        if (failed != failed_tables.end()) throw ManifestError(failed->second);
        const auto path = tables_dir / (ex.table_id + ".csv");
        try {
          std::ifstream table_in(path, std::ios::binary);
          if (!table_in) throw IoError(fmt::format("table '{}' not found at {}", ex.table_id, path.string()));
          out.tables.emplace(ex.table_id, std::make_shared<const Table>(
                                              load_table(table_in, TableFormat::csv, ex.table_id)));
        } catch (const Error& e) {
          failed_tables.emplace(ex.table_id, e.what());
          throw ManifestError(e.what());
        }
      }
      out.examples.push_back(std::move(ex));
    } catch (const std::exception& e) {
      problems.push_back(fmt::format("line {}: {}", number, e.what()));
    }
  }
  if (!problems.empty()) {
    std::string message = "invalid manifest " + manifest.string();
    for (const auto& p : problems) message += "\n  " + p;
    throw ManifestError(message);
  }
  if (out.examples.empty()) throw ManifestError("manifest has no examples: " + manifest.string());
  return out;
}

std::string_view token_bin_name(TokenBin bin) {
  switch (bin) {
    case TokenBin::Small: return "Small";
    case TokenBin::Medium: return "Medium";
    case TokenBin::Large: return "Large";
  }
  return "Small";
}

TokenBin token_bin_for(std::size_t tokens) {
  if (tokens < 2000) return TokenBin::Small;
  if (tokens <= 4000) return TokenBin::Medium;
  return TokenBin::Large;
}

TokenBin partition_by_tokens(const Table& table) { return token_bin_for(full_table_tokens(table)); }

std::string_view cell_bin_for(std::size_t cells) {
  const std::size_t index = std::min<std::size_t>(cells / 100, 5);
  return kCellBins[index];
}

std::string_view partition_by_cells(const Table& table) { return cell_bin_for(table.cell_count()); }

std::size_t base_rows_for_cells(std::size_t cells) {
  if (cells <= 150) return 1;
  if (cells <= 300) return 2;
  if (cells <= 450) return 4;
  return 8;
}

PerturbationPlan make_plan(const Table& table, int factor, std::uint64_t seed) {
  if (factor != 1 && factor != 2 && factor != 4) {
    throw ValidationError(fmt::format("perturbation factor must be 1, 2 or 4, got {}", factor));
  }
  return {base_rows_for_cells(table.cell_count()), factor, seed};
}

namespace {

class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, n).
  std::uint64_t index(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }
  /// Uniform in [0, 1).
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  char letter() { return static_cast<char>('a' + index(26)); }

 private:
  std::mt19937_64 engine_;
};

struct ColumnSampler {
  enum class Kind { number, date, text } kind = Kind::text;
  double lo = 0, hi = 0;
  int decimals = 0;
  std::int64_t first_day = 0, last_day = 0;
  std::vector<std::string> values;

  std::string draw(NoiseSource& rng) const {
    switch (kind) {
      case Kind::number: {
        const double v = lo + (hi - lo) * rng.unit();
        return fmt::format("{:.{}f}", v, decimals);
      }
      case Kind::date:
        return Date::from_days(first_day + static_cast<std::int64_t>(rng.index(
                                              static_cast<std::uint64_t>(last_day - first_day + 1))))
            .iso();
      case Kind::text: {
        std::string out = values.empty() ? std::string() : values[rng.index(values.size())];
        out.push_back(rng.letter());
        out.push_back(rng.letter());
        return out;
      }
    }
    return {};
  }
};

ColumnSampler make_sampler(const Column& column, const ColumnAugmentation& aug) {
  ColumnSampler s;
  std::set<std::string> seen;
  for (const auto& cell : column.cells) {
    if (!cell.empty() && seen.insert(cell.raw).second) s.values.push_back(cell.raw);
  }
  if (aug.schema_type == SchemaType::Numerical) {
    std::map<int, std::size_t> precision;
    std::optional<double> lo, hi;
    for (const auto& cell : column.cells) {
      if (const Number* n = cell.number()) {
        ++precision[n->decimals];
        lo = lo ? std::min(*lo, n->value) : n->value;
        hi = hi ? std::max(*hi, n->value) : n->value;
      }
    }
    if (lo) {
      s.kind = ColumnSampler::Kind::number;
      s.lo = aug.stats.numeric_min.value_or(*lo);
      s.hi = aug.stats.numeric_max.value_or(*hi);
      std::size_t best = 0;
      for (const auto& [decimals, count] : precision) {
        if (count > best) {
          best = count;
          s.decimals = decimals;
        }
      }
    }
  } else if (aug.schema_type == SchemaType::Date) {
    std::optional<std::int64_t> first, last;
    for (const auto& cell : column.cells) {
      if (const Date* d = cell.date()) {
        const auto day = d->days_since_epoch();
        first = first ? std::min(*first, day) : day;
        last = last ? std::max(*last, day) : day;
      }
    }
    if (first) {
      s.kind = ColumnSampler::Kind::date;
      s.first_day = *first;
      s.last_day = *last;
    }
  }
  return s;
}

}  // namespace

Table perturb(const Table& table, const TableAugmentation* aug, const PerturbationPlan& plan) {
  if (aug == nullptr || !aug->covers(table)) {
    throw UnprofiledTableError(fmt::format("table '{}' has not been profiled", table.id()));
  }
  std::vector<ColumnSampler> samplers;
  for (const auto& column : table.columns()) {
    samplers.push_back(make_sampler(column, aug->at(column.sanitized_name)));
  }
  std::set<std::vector<std::string>> existing;
  for (std::size_t r = 0; r < table.row_count(); ++r) existing.insert(table.row(r));

  NoiseSource rng(plan.seed);
  std::vector<std::vector<std::string>> extra;
  constexpr int kMaxDraws = 1000;
  while (extra.size() < plan.total()) {
    std::vector<std::string> row;
    for (int draw = 0;; ++draw) {
      if (draw == kMaxDraws) {
        throw ValidationError(
            fmt::format("cannot draw a distinct noise row for table '{}'", table.id()));
      }
      row.clear();
      for (const auto& s : samplers) row.push_back(s.draw(rng));
      if (existing.insert(row).second) break;
    }
    extra.push_back(std::move(row));
  }
  return table.with_rows_appended(fmt::format("{}~p{}s{}", table.id(), plan.factor, plan.seed),
                                  extra);
}

EvalReport summarize(std::vector<ExampleResult> rows, Partition partition, int perturb_factor) {
  EvalReport report;
  report.partition = partition;
  report.perturb_factor = perturb_factor;
  std::vector<std::string> names;
  if (partition == Partition::tokens) {
    for (auto bin : {TokenBin::Small, TokenBin::Medium, TokenBin::Large}) {
      names.emplace_back(token_bin_name(bin));
    }
  } else {
    for (auto bin : kCellBins) names.emplace_back(bin);
  }
  for (auto& name : names) report.bins.push_back({name, 0, 0});

  std::size_t correct = 0;
  std::size_t shown = 0;
  std::size_t total = 0;
  for (const auto& row : rows) {
    correct += row.correct ? 1 : 0;
    shown += row.tokens_shown;
    total += row.table_tokens;
    const std::string_view bin = partition == Partition::tokens
                                     ? token_bin_name(token_bin_for(row.table_tokens))
                                     : cell_bin_for(row.table_cells);
    for (auto& b : report.bins) {
      if (b.bin == bin) {
        ++b.count;
        b.correct += row.correct ? 1 : 0;
      }
    }
  }
  report.accuracy = rows.empty() ? 0.0 : static_cast<double>(correct) / rows.size();
  report.token_utilization = total == 0 ? 0.0 : static_cast<double>(shown) / total;
  report.per_example = std::move(rows);
  return report;
}

namespace {

struct PreparedTable {
  TablePtr table;
  std::optional<TableAugmentation> aug;
  std::size_t rows_added = 0;
  std::size_t tokens = 0;
};

TableAugmentation obtain_augmentation(const Table& table, AugmentMode mode,
                                      const std::optional<std::filesystem::path>& cache_dir,
                                      PipelineContext& ctx) {
  if (cache_dir) {
    if (auto cached = load_augmentation(table.id(), *cache_dir); cached && cached->covers(table)) {
      return std::move(*cached);
    }
  }
  auto aug = augment_table(table, mode == AugmentMode::llm_enriched ? &ctx.gateway : nullptr, mode,
                           ctx.prompts);
  if (cache_dir) store_augmentation(aug, *cache_dir);
  return aug;
}

}  // namespace

EvalReport run_benchmark(const Dataset& dataset, const BenchOptions& options,
                         PipelineContext& ctx) {
  options.pipeline.validate();
  const AugmentMode mode =
      options.pipeline.enable_augmentation ? options.augment_mode : AugmentMode::deterministic_only;

  std::map<std::string, PreparedTable, std::less<>> prepared;
  std::map<std::string, std::string, std::less<>> prepare_errors;
  for (const auto& [id, base] : dataset.tables) {
    try {
      PreparedTable p;
      p.table = base;
      p.aug = obtain_augmentation(*base, mode, options.cache_dir, ctx);
      if (options.perturb_factor != 0) {
        const auto plan = make_plan(*base, options.perturb_factor, options.seed);
        p.table = std::make_shared<const Table>(perturb(*base, &*p.aug, plan));
        p.rows_added = plan.total();
        p.aug = obtain_augmentation(*p.table, mode, options.cache_dir, ctx);
      }
      p.tokens = full_table_tokens(*p.table);
      prepared.emplace(id, std::move(p));
    } catch (const std::exception& e) {
      prepare_errors.emplace(id, e.what());
    }
  }

  std::vector<ExampleResult> rows(dataset.examples.size());
  parallel_for(rows.size(), options.parallelism, [&](std::size_t i) {
    const BenchExample& ex = dataset.examples[i];
    ExampleResult& row = rows[i];
    row.id = ex.id;
    row.table_id = ex.table_id;
    auto found = prepared.find(ex.table_id);
    if (found == prepared.end()) {
      auto err = prepare_errors.find(ex.table_id);
      row.error = err != prepare_errors.end() ? err->second : "table not loaded";
      if (auto base = dataset.tables.find(ex.table_id); base != dataset.tables.end()) {
        row.table_cells = base->second->cell_count();
        row.table_tokens = full_table_tokens(*base->second);
      }
      return;
    }
    const PreparedTable& p = found->second;
    row.table_tokens = p.tokens;
    row.table_cells = p.table->cell_count();
    row.rows_added = p.rows_added;
    try {
      const auto trace = run_pipeline(p.table, p.aug ? &*p.aug : nullptr, ex.question, ex.task,
                                      options.pipeline, ctx);
      row.predicted = trace.answer.raw;
      row.tokens_shown = trace.tokens_shown;
      row.correct = options.comparator(trace.answer.normalized, ex.gold);
    } catch (const std::exception& e) {
      row.error = e.what();
      row.correct = false;
    }
  });
  return summarize(std::move(rows), options.partition, options.perturb_factor);
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json out;
  out["examples"] = report.per_example.size();
  out["accuracy"] = report.accuracy;
  out["token_utilization"] = report.token_utilization;
  out["perturb_factor"] = report.perturb_factor;
  out["partition"] = report.partition == Partition::tokens ? "tokens" : "cells";
  auto bins = nlohmann::ordered_json::array();
  for (const auto& b : report.bins) {
    nlohmann::ordered_json entry{{"bin", b.bin}, {"count", b.count}, {"correct", b.correct}};
    entry["accuracy"] = b.count == 0 ? nlohmann::ordered_json(nullptr)
                                     : nlohmann::ordered_json(static_cast<double>(b.correct) / b.count);
    bins.push_back(std::move(entry));
  }
  out["bins"] = bins;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : report.per_example) {
    nlohmann::ordered_json entry{{"id", r.id},
                                 {"table_id", r.table_id},
                                 {"predicted", r.predicted},
                                 {"correct", r.correct},
                                 {"table_tokens", r.table_tokens},
                                 {"table_cells", r.table_cells},
                                 {"tokens_shown", r.tokens_shown},
                                 {"rows_added", r.rows_added}};
    if (!r.error.empty()) entry["error"] = r.error;
    rows.push_back(std::move(entry));
  }
  out["per_example"] = rows;
  return out.dump(2) + "\n";
}

std::string report_to_csv(const EvalReport& report) {
  const std::vector<std::string> header{"id",           "table_id",    "predicted",
                                        "correct",      "table_tokens", "table_cells",
                                        "tokens_shown", "rows_added",  "token_bin",
                                        "cell_bin",     "error"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : report.per_example) {
    rows.push_back({r.id, r.table_id, r.predicted, r.correct ? "1" : "0",
                    std::to_string(r.table_tokens), std::to_string(r.table_cells),
                    std::to_string(r.tokens_shown), std::to_string(r.rows_added),
                    std::string(token_bin_name(token_bin_for(r.table_tokens))),
                    std::string(cell_bin_for(r.table_cells)), r.error});
  }
  std::ostringstream out;
  write_csv(out, header, rows);
  return out.str();
}

}  // namespace alter
