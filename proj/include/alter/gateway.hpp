#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace alter {

enum class Stage {
  schema_aug,
  semantic_aug,
  literal_aug,
  step_back,
  sub_query,
  col_filter,
  sql_gen,
  sub_answer,
  joint_reason,
};

std::string_view stage_name(Stage stage);
std::optional<Stage> parse_stage(std::string_view name);

/// 0.0 everywhere except joint_reason under self-consistency (0.7).
double default_temperature(Stage stage, bool self_consistency);

struct ChatRequest {
  Stage stage = Stage::joint_reason;
  std::string prompt;
  double temperature = 0.0;
  int n_samples = 1;
  /// Tokens of table-derived content inside `prompt`. Bookkeeping only; not hashed.
  std::size_t table_tokens = 0;
};

/// SHA-256 over (stage, temperature, n_samples, prompt).
std::string request_hash(const ChatRequest& request);

struct TraceRecord {
  std::string request_hash;
  Stage stage = Stage::joint_reason;
  std::string prompt;
  double temperature = 0.0;
  int n_samples = 1;
  std::vector<std::string> responses;
  std::string timestamp;
};

std::string to_jsonl(const TraceRecord& record);
TraceRecord parse_trace_line(std::string_view line);
std::vector<TraceRecord> read_trace(const std::filesystem::path& path);

/// Append-only JSONL trace file. Each record is written and flushed as one line
/// under a lock, so concurrent appends never interleave.
class TraceStore {
 public:
  explicit TraceStore(const std::filesystem::path& path);
  void append(const TraceRecord& record);
  std::size_t appended() const;

 private:
  mutable std::mutex mutex_;
  std::ofstream out_;
  std::size_t appended_ = 0;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::vector<std::string> complete(const ChatRequest& request) = 0;
};

/// Wire-level access to a chat endpoint. May return fewer responses than
/// requested; throws TransportError on failure.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::vector<std::string> send(const ChatRequest& request) = 0;
};

struct RetryPolicy {
  int max_retries = 2;
  std::chrono::milliseconds initial_backoff{500};
};

class LiveBackend final : public ChatBackend {
 public:
  LiveBackend(std::shared_ptr<Transport> transport, std::shared_ptr<TraceStore> sink,
              RetryPolicy retry = {});
  std::vector<std::string> complete(const ChatRequest& request) override;

 private:
  std::vector<std::string> send_with_retry(const ChatRequest& request);

  std::shared_ptr<Transport> transport_;
  std::shared_ptr<TraceStore> sink_;
  RetryPolicy retry_;
};

class ReplayBackend final : public ChatBackend {
 public:
  explicit ReplayBackend(const std::filesystem::path& trace_path);
  explicit ReplayBackend(const std::vector<TraceRecord>& records);
  std::vector<std::string> complete(const ChatRequest& request) override;
  std::size_t size() const { return store_.size(); }

 private:
  std::unordered_map<std::string, std::vector<std::string>> store_;
};

struct GatewayOptions {
  std::size_t max_in_flight = 4;
  std::optional<std::size_t> call_budget;
};

/// Thread-safe entry point for every model call in the pipeline.
class Gateway {
 public:
  using Observer =
      std::function<void(const ChatRequest&, const std::vector<std::string>& responses)>;

  explicit Gateway(std::shared_ptr<ChatBackend> backend, GatewayOptions options = {});
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  std::vector<std::string> complete(const ChatRequest& request);
  std::string complete_one(const ChatRequest& request);

  /// Invoked after each successful call, serialized under an internal lock.
  void set_observer(Observer observer);
  std::size_t calls() const { return calls_.load(); }

 private:
  std::shared_ptr<ChatBackend> backend_;
  GatewayOptions options_;
  std::counting_semaphore<1024> slots_;
  std::atomic<std::size_t> calls_{0};
  std::mutex observer_mutex_;
  Observer observer_;
};

}  // namespace alter
