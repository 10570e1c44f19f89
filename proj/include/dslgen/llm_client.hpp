#pragma once

#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "dslgen/dsl.hpp"

namespace dslgen {

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string id;  // example id; replay endpoints key on it
  std::vector<ChatMessage> messages;
};

struct CallRecord {
  std::string example_id;
  std::string request_id;
  std::string model;
  double latency_ms = 0.0;
  long prompt_tokens = 0;
  long completion_tokens = 0;
  std::size_t attempts = 0;
  std::string error;  // empty on success

  Json to_json() const;
};

// Thread-safe append-only call log.
class CallLog {
 public:
  void append(CallRecord record);
  std::vector<CallRecord> records() const;
  // Sorted by example id so logs of concurrent runs compare stably.
  std::string to_jsonl() const;

 private:
  mutable std::mutex mu_;
  std::vector<CallRecord> records_;
};

struct EndpointConfig {
  std::string kind = "chat";  // "chat" (HTTP chat completions) or "replay"
  std::string base_url = "https://api.openai.com/v1";
  std::string model_id;
  std::string api_key_env = "OPENAI_API_KEY";
  long max_output_tokens = 1024;
  double temperature = 0.0;
  double timeout_s = 60.0;
  std::size_t max_retries = 3;
  double backoff_s = 1.0;  // first retry delay; doubles per attempt, jittered
  std::size_t max_in_flight = 4;
  std::filesystem::path replay_path;  // kind == "replay"

  // Throws ConfigError on negative temperature or an unknown kind.
  void validate() const;

  Json to_json() const;
  static EndpointConfig from_json(const Json& j);
};

class GenerationEndpoint {
 public:
  virtual ~GenerationEndpoint() = default;

  // First choice text. Throws HttpError, RateLimited or ContentEmpty.
  virtual std::string complete(const ChatRequest& request) = 0;

  CallLog& log() { return log_; }
  const CallLog& log() const { return log_; }

 protected:
  CallLog log_;
};

// Chat-completions client: POST {base_url}/chat/completions with
// {"model", "messages", "temperature", "max_tokens"}. Retries 429, 5xx and
// transport failures with exponential jittered backoff. Each attempt is cut
// off after timeout_s.
class ChatCompletionClient : public GenerationEndpoint {
 public:
  explicit ChatCompletionClient(EndpointConfig config);

  std::string complete(const ChatRequest& request) override;

  const EndpointConfig& config() const { return config_; }

 private:
  struct Attempt {
    int status = 0;  // 0: no response
    std::string body;
    std::string request_id;
    std::string transport_error;
  };

  Attempt attempt(const std::string& payload, const std::string& api_key);
  void acquire_slot();
  void release_slot();

  EndpointConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::mutex slot_mu_;
  std::condition_variable slot_cv_;
  std::size_t in_flight_ = 0;
};

// Canned responses keyed by example id, read from JSONL rows
// {"id": ..., "response": ...}. Rows of the form {"id": ..., "error": ...}
// simulate an endpoint that fails after retries.
class ReplayEndpoint : public GenerationEndpoint {
 public:
  explicit ReplayEndpoint(const std::filesystem::path& path, std::string model = "replay");
  ReplayEndpoint(std::map<std::string, std::string> responses, std::string model = "replay");

  std::string complete(const ChatRequest& request) override;

 private:
  std::map<std::string, std::string> responses_;
  std::map<std::string, std::string> errors_;
  std::string model_;
};

std::unique_ptr<GenerationEndpoint> make_endpoint(const EndpointConfig& config);

// Text strictly between the first <START> and the next <END>; otherwise the
// interior of the first fenced code block; otherwise the trimmed input.
// Applied until nothing changes, so it is idempotent.
std::string strip_markers(std::string_view raw);

}  // namespace dslgen
