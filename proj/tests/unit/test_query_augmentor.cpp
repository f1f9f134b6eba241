#include <doctest.h>

#include <map>
#include <mutex>
#include <random>
#include <set>

#include "alter/gateway.hpp"
#include "alter/prompts.hpp"
#include "alter/query_augmentor.hpp"
#include "alter/retrieval.hpp"
#include "fixtures.hpp"

using namespace alter;

namespace {

struct StageBackend final : ChatBackend {
  std::map<Stage, std::string> replies;
  std::vector<std::string> complete(const ChatRequest& r) override {
    std::lock_guard lock(mutex);
    seen.push_back(r);
    return {replies[r.stage]};
  }
  std::mutex mutex;
  std::vector<ChatRequest> seen;
};

SubTableView vehicles_sample() {
  auto t = testing::fixture_table("vehicles");
  return SubTableView(t, {0, 1, 2}, t->sanitized_names());
}

std::vector<std::string> texts(const QueryBundle& b) {
  std::vector<std::string> out;
  for (const auto& q : b.sub_queries) out.push_back(q.text);
  return out;
}

}  // namespace

TEST_CASE("normalize_query") {
  CHECK(normalize_query("  Which   Vehicle?? ") == "which vehicle");
  CHECK(normalize_query("a\tb\nc.") == "a b c");
  CHECK(normalize_query("") == "");
}

TEST_CASE("clean_step_back") {
  CHECK(clean_step_back("\n  New query: \"What vehicles are listed?\"\n") ==
        "What vehicles are listed?");
  CHECK(clean_step_back("what are the years?\nsecond line") == "what are the years?");
  CHECK(clean_step_back("   ") == "");
}

TEST_CASE("parse_sub_queries formats") {
  CHECK(parse_sub_queries("1. When did he start?\n2. When did he leave?") ==
        std::vector<std::string>{"When did he start?", "When did he leave?"});
  CHECK(parse_sub_queries("- a?\n* b?\n• c?") == std::vector<std::string>{"a?", "b?", "c?"});
  CHECK(parse_sub_queries("Sub-query 1: x\nSub-query 2: y") == std::vector<std::string>{"x", "y"});
  CHECK(parse_sub_queries("1) x\n2) y") == std::vector<std::string>{"x", "y"});
  CHECK(parse_sub_queries("Here you go:\nWhat is x?\nWhat is y?") ==
        std::vector<std::string>{"What is x?", "What is y?"});
  CHECK(parse_sub_queries("1. a\n2. b\n3. c\n4. d\n5. e").size() == kMaxDecomposed);
  CHECK(parse_sub_queries("The query is already simple enough.").empty());
  CHECK(parse_sub_queries("").empty());
}

TEST_CASE("step_back falls back to the original on an empty reply") {
  PromptLibrary prompts;
  auto backend = std::make_shared<StageBackend>();
  Gateway gw(backend);
  CHECK(step_back("which one?", vehicles_sample(), gw, prompts) == "which one?");
  backend->replies[Stage::step_back] = "'list all vehicles'";
  CHECK(step_back("which one?", vehicles_sample(), gw, prompts) == "list all vehicles");
  REQUIRE(backend->seen.size() == 2);
  CHECK(backend->seen[0].prompt.find("<table><thead><tr><th>Year</th>") != std::string::npos);
  CHECK(backend->seen[0].prompt.find("which one?") != std::string::npos);
}

TEST_CASE("decompose tolerates prose") {
  PromptLibrary prompts;
  auto backend = std::make_shared<StageBackend>();
  backend->replies[Stage::sub_query] = "I cannot split this question.";
  Gateway gw(backend);
  CHECK(decompose("q", vehicles_sample(), gw, prompts).empty());
}

TEST_CASE("bundle with both flags off makes no calls") {
  PromptLibrary prompts;
  auto backend = std::make_shared<StageBackend>();
  Gateway gw(backend);
  auto b = build_bundle("q?", TaskKind::QA, vehicles_sample(), gw, prompts, {false, false});
  CHECK(b.sub_queries.empty());
  CHECK(b.original == "q?");
  CHECK(gw.calls() == 0);
}

TEST_CASE("bundle dedups and drops the original") {
  PromptLibrary prompts;
  auto backend = std::make_shared<StageBackend>();
  backend->replies[Stage::step_back] = "When did he start?";
  backend->replies[Stage::sub_query] = "1. when did he start\n2. Q?\n3. When did he leave?";
  Gateway gw(backend);
  auto b = build_bundle("q", TaskKind::QA, vehicles_sample(), gw, prompts, {true, true});
  CHECK(texts(b) == std::vector<std::string>{"When did he start?", "When did he leave?"});
  CHECK(b.sub_queries[0].kind == SubQueryKind::StepBack);
  CHECK(b.sub_queries[1].kind == SubQueryKind::Decomposed);

  backend->replies[Stage::step_back] = "";
  auto fallback = build_bundle("q", TaskKind::QA, vehicles_sample(), gw, prompts, {true, false});
  CHECK(fallback.sub_queries.empty());
}

TEST_CASE("flags are independent") {
  PromptLibrary prompts;
  auto backend = std::make_shared<StageBackend>();
  backend->replies[Stage::step_back] = "broad?";
  backend->replies[Stage::sub_query] = "1. a?\n2. b?";
  Gateway gw(backend);
  auto both = texts(build_bundle("q", TaskKind::QA, vehicles_sample(), gw, prompts, {true, true}));
  auto sb = texts(build_bundle("q", TaskKind::QA, vehicles_sample(), gw, prompts, {true, false}));
  auto sq = texts(build_bundle("q", TaskKind::QA, vehicles_sample(), gw, prompts, {false, true}));
  CHECK(both == std::vector<std::string>{"broad?", "a?", "b?"});
  CHECK(sb == std::vector<std::string>{"broad?"});
  CHECK(sq == std::vector<std::string>{"a?", "b?"});
}

TEST_CASE("bundle invariants under random replies") {
  PromptLibrary prompts;
  std::mt19937_64 rng(3);
  const std::vector<std::string> pool{"A?", "a", "b.", "B", "c", "d?", "q", "Q!", "e"};
  for (int round = 0; round < 200; ++round) {
    auto backend = std::make_shared<StageBackend>();
    backend->replies[Stage::step_back] = pool[rng() % pool.size()];
    std::string list;
    const int items = static_cast<int>(rng() % 6);
    for (int i = 0; i < items; ++i) list += std::to_string(i + 1) + ". " + pool[rng() % pool.size()] + "\n";
    backend->replies[Stage::sub_query] = list;
    Gateway gw(backend);
    auto b = build_bundle("q", TaskKind::QA, vehicles_sample(), gw, prompts, {true, true});
    CHECK(b.sub_queries.size() <= 4);
    std::set<std::string> seen{normalize_query("q")};
    for (const auto& s : b.sub_queries) CHECK(seen.insert(normalize_query(s.text)).second);
  }
}

TEST_CASE("recorded bundle for the ablation question") {
  PromptLibrary prompts;
  FallbackEmbedder embedder;
  auto gw = testing::replay_gateway(testing::golden_trace_path());
  auto table = testing::fixture_table(testing::kAblationTable);
  auto rows = sample_rows(*table, testing::kAblationQuestion, {3}, embedder);
  SubTableView sample(table, rows, table->sanitized_names());
  auto b = build_bundle(testing::kAblationQuestion, TaskKind::QA, sample, *gw, prompts, {true, true});
  REQUIRE(b.sub_queries.size() == 3);
  CHECK(b.sub_queries[0].kind == SubQueryKind::StepBack);
  CHECK(b.sub_queries[1].kind == SubQueryKind::Decomposed);
  CHECK(b.sub_queries[2].kind == SubQueryKind::Decomposed);
}
