#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "alter/embedding.hpp"
#include "alter/gateway.hpp"
#include "alter/pipeline.hpp"
#include "alter/prompts.hpp"
#include "alter/table.hpp"

namespace alter::testing {

std::filesystem::path fixture_dir();
std::filesystem::path golden_trace_path();
TablePtr fixture_table(const std::string& id);

struct AblationCase {
  std::string name;
  PipelineConfig config;
};

inline constexpr const char* kAblationTable = "vehicles";
inline constexpr const char* kAblationQuestion = "which vehicle came before the Jaguar XJS?";

/// full, no_step_back, no_sub_query, no_augmentation, k0, k1, plus the
/// k0_no_augmentation corner.
std::vector<AblationCase> ablation_cases();

inline constexpr std::size_t kTransitBaseRows = 40;
inline constexpr int kTransitFactors[] = {1, 2, 4, 8};
std::vector<std::string> transit_questions();

struct CapturedPrompt {
  Stage stage;
  std::string prompt;
  std::size_t table_tokens;
};

/// Runs the pipeline and returns every prompt sent, sorted by stage then text.
/// The gateway observer is replaced for the duration of the call.
std::vector<CapturedPrompt> capture_prompts(const TablePtr& table, const TableAugmentation* aug,
                                            const std::string& question, TaskKind task,
                                            const PipelineConfig& config, Gateway& gateway,
                                            PipelineTrace* trace = nullptr);

std::shared_ptr<Gateway> replay_gateway(const std::filesystem::path& trace);
std::shared_ptr<Gateway> scripted_gateway(std::shared_ptr<TraceStore> sink = nullptr);

std::string read_file(const std::filesystem::path& path);

}  // namespace alter::testing
