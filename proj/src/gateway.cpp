#include "alter/gateway.hpp"

#include <algorithm>
#include <array>
#include <ctime>
#include <thread>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "alter/digest.hpp"
#include "alter/errors.hpp"

namespace alter {

namespace {

constexpr std::array<std::pair<Stage, std::string_view>, 9> kStageNames = {{
    {Stage::schema_aug, "schema_aug"},
    {Stage::semantic_aug, "semantic_aug"},
    {Stage::literal_aug, "literal_aug"},
    {Stage::step_back, "step_back"},
    {Stage::sub_query, "sub_query"},
    {Stage::col_filter, "col_filter"},
    {Stage::sql_gen, "sql_gen"},
    {Stage::sub_answer, "sub_answer"},
    {Stage::joint_reason, "joint_reason"},
}};

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(now));
}

}  // namespace

std::string_view stage_name(Stage stage) {
  for (const auto& [s, name] : kStageNames) {
    if (s == stage) return name;
  }
  return "unknown";
}

std::optional<Stage> parse_stage(std::string_view name) {
  for (const auto& [s, n] : kStageNames) {
    if (n == name) return s;
  }
  return std::nullopt;
}

double default_temperature(Stage stage, bool self_consistency) {
  return stage == Stage::joint_reason && self_consistency ? 0.7 : 0.0;
}

std::string request_hash(const ChatRequest& request) {
  const std::string material = fmt::format("{}\n{:.4f}\n{}\n{}", stage_name(request.stage),
                                           request.temperature, request.n_samples, request.prompt);
  return sha256_hex(material);
}

std::string to_jsonl(const TraceRecord& record) {
  nlohmann::ordered_json j;
  j["request_hash"] = record.request_hash;
  j["stage_label"] = stage_name(record.stage);
  j["temperature"] = record.temperature;
  j["n_samples"] = record.n_samples;
  j["prompt"] = record.prompt;
  j["responses"] = record.responses;
  j["timestamp"] = record.timestamp;
  return j.dump();
}

TraceRecord parse_trace_line(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    TraceRecord record;
    record.request_hash = j.at("request_hash").get<std::string>();
    const auto stage_text = j.at("stage_label").get<std::string>();
    auto stage = parse_stage(stage_text);
    if (!stage) throw DecodeError("unknown stage label '" + stage_text + "'");
    record.stage = *stage;
    record.prompt = j.at("prompt").get<std::string>();
    record.temperature = j.value("temperature", 0.0);
    record.n_samples = j.value("n_samples", 1);
    record.responses = j.at("responses").get<std::vector<std::string>>();
    record.timestamp = j.value("timestamp", std::string{});
    return record;
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError(std::string("malformed trace record: ") + e.what());
  }
}

std::vector<TraceRecord> read_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace " + path.string());
  std::vector<TraceRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(parse_trace_line(line));
    } catch (const DecodeError& e) {
      throw DecodeError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

TraceStore::TraceStore(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::app);
  if (!out_) throw IoError("cannot open trace for append: " + path.string());
}

void TraceStore::append(const TraceRecord& record) {
  const std::string line = to_jsonl(record) + "\n";
  std::lock_guard lock(mutex_);
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) throw IoError("trace append failed");
  ++appended_;
}

std::size_t TraceStore::appended() const {
  std::lock_guard lock(mutex_);
  return appended_;
}

LiveBackend::LiveBackend(std::shared_ptr<Transport> transport, std::shared_ptr<TraceStore> sink,
                         RetryPolicy retry)
    : transport_(std::move(transport)), sink_(std::move(sink)), retry_(retry) {
  if (!transport_) throw TransportError("live backend without a transport");
}

std::vector<std::string> LiveBackend::send_with_retry(const ChatRequest& request) {
  auto backoff = retry_.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    try {
      return transport_->send(request);
    } catch (const TransportError&) {
      if (attempt >= retry_.max_retries) throw;
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
}

std::vector<std::string> LiveBackend::complete(const ChatRequest& request) {
  std::vector<std::string> responses;
  // Some endpoints ignore `n`; top up with further calls.
  for (int round = 0; static_cast<int>(responses.size()) < request.n_samples; ++round) {
    ChatRequest partial = request;
    partial.n_samples = request.n_samples - static_cast<int>(responses.size());
    auto batch = send_with_retry(partial);
    if (batch.empty()) {
      if (round >= request.n_samples) throw TransportError("endpoint returned no choices");
      continue;
    }
    for (auto& r : batch) {
      if (static_cast<int>(responses.size()) < request.n_samples) responses.push_back(std::move(r));
    }
  }
  if (sink_) {
    TraceRecord record{request_hash(request), request.stage,     request.prompt,
                       request.temperature,   request.n_samples, responses,
                       utc_timestamp()};
    sink_->append(record);
  }
  return responses;
}

ReplayBackend::ReplayBackend(const std::filesystem::path& trace_path)
    : ReplayBackend(read_trace(trace_path)) {}

ReplayBackend::ReplayBackend(const std::vector<TraceRecord>& records) {
  for (const auto& record : records) {
    // First record wins; identical requests recorded twice carry the same content.
    store_.try_emplace(record.request_hash, record.responses);
  }
}

std::vector<std::string> ReplayBackend::complete(const ChatRequest& request) {
  const std::string hash = request_hash(request);
  auto it = store_.find(hash);
  if (it == store_.end()) throw ReplayMissError(hash, std::string(stage_name(request.stage)));
  return it->second;
}

Gateway::Gateway(std::shared_ptr<ChatBackend> backend, GatewayOptions options)
    : backend_(std::move(backend)),
      options_(options),
      slots_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(options.max_in_flight, 1, 1024))) {
  if (!backend_) throw BackendError("gateway without a backend");
}

std::vector<std::string> Gateway::complete(const ChatRequest& request) {
  if (request.n_samples < 1) throw ValidationError("n_samples must be >= 1");
  if (request.temperature < 0.0) throw ValidationError("temperature must be >= 0");
  const std::size_t issued = calls_.fetch_add(1);
  if (options_.call_budget && issued >= *options_.call_budget) {
    throw BudgetExceededError("call budget of " + std::to_string(*options_.call_budget) +
                              " exhausted");
  }
  slots_.acquire();
  std::vector<std::string> responses;
  try {
    responses = backend_->complete(request);
  } catch (...) {
    slots_.release();
    throw;
  }
  slots_.release();
  if (static_cast<int>(responses.size()) != request.n_samples) {
    throw BackendError(fmt::format("backend returned {} responses for {} requested at stage {}",
                                   responses.size(), request.n_samples,
                                   stage_name(request.stage)));
  }
  {
    std::lock_guard lock(observer_mutex_);
    if (observer_) observer_(request, responses);
  }
  return responses;
}

std::string Gateway::complete_one(const ChatRequest& request) {
  ChatRequest single = request;
  single.n_samples = 1;
  return complete(single).front();
}

void Gateway::set_observer(Observer observer) {
  std::lock_guard lock(observer_mutex_);
  observer_ = std::move(observer);
}

}  // namespace alter
