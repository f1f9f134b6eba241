#include "alter/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "alter/gateway.hpp"
#include "alter/prompts.hpp"
#include "alter/tokenizer.hpp"

namespace alter {

void PipelineConfig::validate() const {
  if (sc_n < 1) throw ValidationError("sc_n must be at least 1");
  if (max_repairs < 0) throw ValidationError("max_repairs must be non-negative");
  if (parallelism < 1) throw ValidationError("parallelism must be at least 1");
}

void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& body) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t count = std::min(std::max<std::size_t>(workers, 1), n);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < count; ++w) pool.emplace_back(work);
    work();
  }
  for (auto& error : errors) {
    if (error) std::rethrow_exception(error);
  }
}

OrganizerTrace organize(const TablePtr& table, std::string_view query,
                        const TableAugmentation* aug, const PipelineConfig& config,
                        PipelineContext& ctx, std::optional<std::vector<std::size_t>> rows) {
  OrganizerTrace trace;
  trace.query = std::string(query);
  trace.rows = rows ? std::move(*rows)
                    : sample_rows(*table, query, SamplerConfig{config.k}, ctx.embedder,
                                  ctx.row_cache);
  trace.columns = filter_columns(table, query, aug, trace.rows, ctx.gateway, ctx.prompts);
  const SubTableView view = make_view(table, trace.rows, trace.columns);
  try {
    trace.execution =
        generate_and_execute(table, view, query, aug, ctx.gateway, ctx.prompts, config.max_repairs);
  } catch (const SqlGenerationFailedError& e) {
    trace.failed_attempts = e.attempts();
    trace.error = e.what();
  }
  return trace;
}

std::size_t full_table_tokens(const Table& table) {
  auto ptr = std::shared_ptr<const Table>(&table, [](const Table*) {});
  return count_tokens(serialize_html(SubTableView::full(ptr)));
}

namespace {

std::size_t shown_tokens(const TablePtr& table, const TableAugmentation* aug,
                         const PipelineTrace& trace) {
  std::set<std::size_t> rows(trace.primary.rows.begin(), trace.primary.rows.end());
  std::set<std::string> filtered(trace.primary.columns.begin(), trace.primary.columns.end());
  for (const auto& sub : trace.subs) {
    rows.insert(sub.organizer.rows.begin(), sub.organizer.rows.end());
    filtered.insert(sub.organizer.columns.begin(), sub.organizer.columns.end());
  }
  std::size_t tokens = 0;
  if (!rows.empty()) {
    // Sampled rows are shown over every column (query augmentation, column filter).
    const SubTableView shown(table, {rows.begin(), rows.end()}, table->sanitized_names());
    tokens += count_tokens(serialize_html(shown));
  }
  if (aug != nullptr) {
    tokens += count_tokens(render_schema_block(*aug, *table));
    tokens += count_tokens(render_semantic_block(*aug, *table));
    std::vector<std::size_t> columns;
    for (const auto& name : filtered) columns.push_back(*table->find_column(name));
    std::sort(columns.begin(), columns.end());
    tokens += count_tokens(render_column_details(*aug, *table, columns));
  }
  return tokens;
}

}  // namespace

PipelineTrace run_pipeline(const TablePtr& table, const TableAugmentation* aug,
                           std::string_view question, TaskKind task, const PipelineConfig& config,
                           PipelineContext& ctx) {
  config.validate();
  if (!config.enable_augmentation) aug = nullptr;
  if (config.enable_augmentation && aug == nullptr) {
    throw MissingAugmentationError(fmt::format("table '{}' has no augmentation", table->id()));
  }
  if (aug != nullptr && !aug->covers(*table)) {
    throw MissingAugmentationError(
        fmt::format("augmentation does not cover table '{}'", table->id()));
  }

  PipelineTrace trace;
  trace.table_tokens = full_table_tokens(*table);
  auto primary_rows =
      sample_rows(*table, question, SamplerConfig{config.k}, ctx.embedder, ctx.row_cache);
  const SubTableView sample(table, primary_rows, table->sanitized_names());
  trace.bundle = build_bundle(question, task, sample, ctx.gateway, ctx.prompts,
                              {config.enable_step_back, config.enable_sub_query});

  trace.subs.resize(trace.bundle.sub_queries.size());
  parallel_for(trace.bundle.sub_queries.size(), config.parallelism, [&](std::size_t i) {
    const SubQuery& sub = trace.bundle.sub_queries[i];
    SubPipelineTrace& out = trace.subs[i];
    out.organizer.query = sub.text;
    try {
      out.organizer = organize(table, sub.text, aug, config, ctx);
      if (!out.organizer.execution) {
        out.answer = failed_sub_answer(sub, out.organizer.error);
        return;
      }
      out.answer = answer_subquery(*out.organizer.execution, sub, question, ctx.gateway, ctx.prompts);
    } catch (const std::exception& e) {
      out.organizer.error = e.what();
      out.answer = failed_sub_answer(sub, e.what());
    }
  });

  trace.primary = organize(table, question, aug, config, ctx, primary_rows);
  if (trace.primary.execution && trace.primary.execution->result) {
    trace.joint_table = render_result(*trace.primary.execution->result);
  } else {
    trace.primary_fallback = true;
    const SubTableView view = make_view(table, trace.primary.rows, trace.primary.columns);
    trace.joint_table = serialize_html(view);
  }
  std::vector<SubAnswer> answers;
  for (const auto& sub : trace.subs) answers.push_back(sub.answer);
  trace.answer =
      joint_reason(trace.joint_table, answers, question, task, ctx.gateway, ctx.prompts, config.sc_n);
  trace.tokens_shown = std::min(shown_tokens(table, aug, trace), trace.table_tokens);
  return trace;
}

nlohmann::ordered_json answer_to_json(const Answer& answer) {
  nlohmann::ordered_json out;
  out["raw"] = answer.raw;
  if (const bool* verdict = std::get_if<bool>(&answer.normalized)) {
    out["normalized"] = *verdict;
  } else {
    out["normalized"] = std::get<std::vector<std::string>>(answer.normalized);
  }
  return out;
}

namespace {

nlohmann::ordered_json attempts_json(const std::vector<SqlAttempt>& attempts) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& a : attempts) {
    out.push_back({{"attempt_index", a.attempt_index},
                   {"sql", a.sql_text},
                   {"outcome", outcome_name(a.outcome)},
                   {"error", a.error}});
  }
  return out;
}

nlohmann::ordered_json organizer_json(const OrganizerTrace& o) {
  nlohmann::ordered_json out;
  out["query"] = o.query;
  out["sampled_rows"] = o.rows;
  out["columns"] = o.columns;
  if (o.execution) {
    out["sql"] = o.execution->final_sql;
    out["attempts"] = attempts_json(o.execution->attempts);
    if (o.execution->result) {
      out["result"] = nlohmann::ordered_json::parse(o.execution->result->to_json_rows());
    }
  } else {
    out["attempts"] = attempts_json(o.failed_attempts);
  }
  if (!o.error.empty()) out["error"] = o.error;
  return out;
}

}  // namespace

nlohmann::ordered_json trace_to_json(const PipelineTrace& trace, const Table& table) {
  nlohmann::ordered_json out;
  out["table_id"] = table.id();
  out["question"] = trace.bundle.original;
  out["task"] = task_name(trace.bundle.task);
  auto bundle = nlohmann::ordered_json::array();
  for (const auto& q : trace.bundle.sub_queries) {
    bundle.push_back({{"kind", sub_query_kind_name(q.kind)}, {"text", q.text}});
  }
  out["sub_queries"] = bundle;
  out["primary"] = organizer_json(trace.primary);
  out["primary_fallback"] = trace.primary_fallback;
  auto subs = nlohmann::ordered_json::array();
  for (const auto& sub : trace.subs) {
    auto entry = organizer_json(sub.organizer);
    entry["kind"] = sub_query_kind_name(sub.answer.kind);
    entry["answer"] = sub.answer.text;
    entry["irrelevant"] = sub.answer.irrelevant;
    subs.push_back(std::move(entry));
  }
  out["sub_pipelines"] = subs;
  out["votes"] = trace.answer.votes;
  out["answer"] = answer_to_json(trace.answer);
  out["table_tokens"] = trace.table_tokens;
  out["tokens_shown"] = trace.tokens_shown;
  return out;
}

}  // namespace alter
