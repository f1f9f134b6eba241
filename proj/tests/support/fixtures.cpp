#include "fixtures.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <sstream>

#include "alter/errors.hpp"
#include "scripted_llm.hpp"

namespace alter::testing {

std::filesystem::path fixture_dir() { return ALTER_FIXTURE_DIR; }

std::filesystem::path golden_trace_path() { return fixture_dir() / "traces" / "golden.jsonl"; }

TablePtr fixture_table(const std::string& id) {
  return std::make_shared<const Table>(load_table_file(fixture_dir() / "tables" / (id + ".csv")));
}

std::vector<AblationCase> ablation_cases() {
  std::vector<AblationCase> out;
  PipelineConfig full;
  out.push_back({"full", full});
  PipelineConfig c = full;
  c.enable_step_back = false;
  out.push_back({"no_step_back", c});
  c = full;
  c.enable_sub_query = false;
  out.push_back({"no_sub_query", c});
  c = full;
  c.enable_augmentation = false;
  out.push_back({"no_augmentation", c});
  c = full;
  c.k = 0;
  out.push_back({"k0", c});
  c.k = 1;
  out.push_back({"k1", c});
  c.k = 0;
  c.enable_augmentation = false;
  out.push_back({"k0_no_augmentation", c});
  return out;
}

std::vector<std::string> transit_questions() {
  return {"how many riders used Station 1007?",
          "which line serves Station 1012 and when did it open?"};
}

std::vector<CapturedPrompt> capture_prompts(const TablePtr& table, const TableAugmentation* aug,
                                            const std::string& question, TaskKind task,
                                            const PipelineConfig& config, Gateway& gateway,
                                            PipelineTrace* trace) {
  std::mutex mutex;
  std::vector<CapturedPrompt> prompts;
  gateway.set_observer([&](const ChatRequest& request, const std::vector<std::string>&) {
    std::lock_guard lock(mutex);
    prompts.push_back({request.stage, request.prompt, request.table_tokens});
  });
  FallbackEmbedder embedder;
  PromptLibrary library;
  PipelineContext ctx{gateway, embedder, library, nullptr};
  try {
    auto result = run_pipeline(table, aug, question, task, config, ctx);
    if (trace != nullptr) *trace = std::move(result);
  } catch (...) {
    gateway.set_observer(nullptr);
    throw;
  }
  gateway.set_observer(nullptr);
  std::sort(prompts.begin(), prompts.end(), [](const auto& a, const auto& b) {
    return std::tie(a.stage, a.prompt) < std::tie(b.stage, b.prompt);
  });
  return prompts;
}

std::shared_ptr<Gateway> replay_gateway(const std::filesystem::path& trace) {
  return std::make_shared<Gateway>(std::make_shared<ReplayBackend>(trace));
}

std::shared_ptr<Gateway> scripted_gateway(std::shared_ptr<TraceStore> sink) {
  auto transport = std::make_shared<ScriptedTransport>(
      ScriptedTransport::from_file(fixture_dir() / "script.json"));
  return std::make_shared<Gateway>(std::make_shared<LiveBackend>(transport, std::move(sink)));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace alter::testing
