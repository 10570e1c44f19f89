#include "dslgen/llm_client.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <future>
#include <random>
#include <thread>

#include "dslgen/errors.hpp"
#include "dslgen/util.hpp"
#include "httplib.h"

namespace dslgen {

Json CallRecord::to_json() const {
  Json j;
  j["example_id"] = example_id;
  j["request_id"] = request_id;
  j["model"] = model;
  j["latency_ms"] = latency_ms;
  j["prompt_tokens"] = prompt_tokens;
  j["completion_tokens"] = completion_tokens;
  j["attempts"] = attempts;
  if (!error.empty()) j["error"] = error;
  return j;
}

void CallLog::append(CallRecord record) {
  std::lock_guard lock(mu_);
  records_.push_back(std::move(record));
}

std::vector<CallRecord> CallLog::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::string CallLog::to_jsonl() const {
  auto recs = records();
  std::stable_sort(recs.begin(), recs.end(),
                   [](const CallRecord& a, const CallRecord& b) { return a.example_id < b.example_id; });
  std::vector<Json> rows;
  for (const auto& r : recs) rows.push_back(r.to_json());
  return dslgen::to_jsonl(rows);
}

void EndpointConfig::validate() const {
  if (kind != "chat" && kind != "replay") throw ConfigError("unknown endpoint kind " + kind);
  if (temperature < 0) throw ConfigError("temperature must be >= 0");
  if (timeout_s <= 0) throw ConfigError("timeout must be positive");
  if (backoff_s < 0) throw ConfigError("backoff must be >= 0");
  if (max_in_flight == 0) throw ConfigError("max_in_flight must be >= 1");
  if (kind == "replay" && replay_path.empty()) throw ConfigError("replay endpoint needs replay_path");
}

Json EndpointConfig::to_json() const {
  Json j;
  j["kind"] = kind;
  j["base_url"] = base_url;
  j["model_id"] = model_id;
  j["api_key_env"] = api_key_env;
  j["max_output_tokens"] = max_output_tokens;
  j["temperature"] = temperature;
  j["timeout_s"] = timeout_s;
  j["max_retries"] = max_retries;
  j["backoff_s"] = backoff_s;
  j["max_in_flight"] = max_in_flight;
  j["replay_path"] = replay_path.string();
  return j;
}

EndpointConfig EndpointConfig::from_json(const Json& j) {
  EndpointConfig c;
  try {
    c.kind = j.value("kind", c.kind);
    c.base_url = j.value("base_url", c.base_url);
    c.model_id = j.value("model_id", c.model_id);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.max_output_tokens = j.value("max_output_tokens", c.max_output_tokens);
    c.temperature = j.value("temperature", c.temperature);
    c.timeout_s = j.value("timeout_s", c.timeout_s);
    if (j.contains("max_retries")) {
      if (j["max_retries"].is_number_integer() && j["max_retries"].get<long long>() < 0) {
        throw ConfigError("max_retries must be >= 0");
      }
      c.max_retries = j["max_retries"].get<std::size_t>();
    }
    c.backoff_s = j.value("backoff_s", c.backoff_s);
    c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
    c.replay_path = j.value("replay_path", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("endpoint config: ") + e.what());
  }
  c.validate();
  return c;
}

ChatCompletionClient::ChatCompletionClient(EndpointConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto scheme_end = config_.base_url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("base_url needs a scheme: " + config_.base_url);
  const auto path_start = config_.base_url.find('/', scheme_end + 3);
  scheme_host_port_ = config_.base_url.substr(0, path_start);
  if (path_start != std::string::npos) path_prefix_ = config_.base_url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

void ChatCompletionClient::acquire_slot() {
  std::unique_lock lock(slot_mu_);
  slot_cv_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
  ++in_flight_;
}

void ChatCompletionClient::release_slot() {
  {
    std::lock_guard lock(slot_mu_);
    --in_flight_;
  }
  slot_cv_.notify_one();
}

ChatCompletionClient::Attempt ChatCompletionClient::attempt(const std::string& payload,
                                                            const std::string& api_key) {
  httplib::Client client(scheme_host_port_);
  const auto timeout = std::chrono::duration<double>(config_.timeout_s);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(timeout).count();
  client.set_connection_timeout(micros / 1000000, micros % 1000000);
  client.set_read_timeout(micros / 1000000, micros % 1000000);
  client.set_write_timeout(micros / 1000000, micros % 1000000);
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

  // The socket timeouts bound each phase separately; the future bounds the
  // whole attempt.
  auto pending = std::async(std::launch::async, [&] {
    return client.Post(path_prefix_ + "/chat/completions", headers, payload, "application/json");
  });
  Attempt out;
  if (pending.wait_for(timeout) != std::future_status::ready) {
    client.stop();
    pending.wait();
    out.transport_error = "timed out after " + std::to_string(config_.timeout_s) + " s";
    return out;
  }
  auto res = pending.get();
  if (!res) {
    out.transport_error = httplib::to_string(res.error());
    return out;
  }
  out.status = res->status;
  out.body = res->body;
  if (res->has_header("x-request-id")) out.request_id = res->get_header_value("x-request-id");
  return out;
}

std::string ChatCompletionClient::complete(const ChatRequest& request) {
  Json payload;
  payload["model"] = config_.model_id;
  payload["messages"] = Json::array();
  for (const auto& m : request.messages) {
    payload["messages"].push_back(Json{{"role", m.role}, {"content", m.content}});
  }
  payload["temperature"] = config_.temperature;
  payload["max_tokens"] = config_.max_output_tokens;
  const std::string body = payload.dump(-1, ' ', false, Json::error_handler_t::replace);

  std::string api_key;
  if (!config_.api_key_env.empty()) {
    if (const char* v = std::getenv(config_.api_key_env.c_str())) api_key = v;
  }

  thread_local std::mt19937 jitter_rng{std::random_device{}()};
  std::uniform_real_distribution<double> jitter(0.5, 1.0);

  CallRecord record;
  record.example_id = request.id;
  record.model = config_.model_id;
  const auto started = std::chrono::steady_clock::now();
  auto finish = [&](std::string error) {
    record.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    record.error = std::move(error);
    log_.append(record);
  };

  acquire_slot();
  struct SlotGuard {
    ChatCompletionClient* self;
    ~SlotGuard() { self->release_slot(); }
  } guard{this};

  Attempt last;
  for (std::size_t attempt_no = 0; attempt_no <= config_.max_retries; ++attempt_no) {
    if (attempt_no > 0) {
      const double delay = config_.backoff_s * static_cast<double>(1ull << std::min<std::size_t>(attempt_no - 1, 30)) *
                           jitter(jitter_rng);
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
    record.attempts = attempt_no + 1;
    last = attempt(body, api_key);
    const bool retryable = last.status == 0 || last.status == 429 || last.status >= 500;
    if (last.status >= 200 && last.status < 300) break;
    if (!retryable) break;
  }

  if (last.status == 0) {
    finish(last.transport_error);
    throw HttpError("request failed after " + std::to_string(record.attempts) +
                        " attempt(s): " + last.transport_error,
                    0, record.attempts);
  }
  if (last.status == 429) {
    finish("rate limited");
    throw RateLimited("rate limited after " + std::to_string(record.attempts) + " attempt(s)", 429,
                      record.attempts);
  }
  if (last.status < 200 || last.status >= 300) {
    finish("HTTP " + std::to_string(last.status));
    throw HttpError("HTTP " + std::to_string(last.status) + " after " +
                        std::to_string(record.attempts) + " attempt(s): " + last.body.substr(0, 200),
                    last.status, record.attempts);
  }

  Json response;
  try {
    response = Json::parse(last.body);
  } catch (const nlohmann::json::exception& e) {
    finish("malformed response");
    throw HttpError(std::string("malformed response body: ") + e.what(), last.status, record.attempts);
  }
  record.request_id = response.value("id", last.request_id);
  if (auto usage = response.find("usage"); usage != response.end() && usage->is_object()) {
    record.prompt_tokens = usage->value("prompt_tokens", 0L);
    record.completion_tokens = usage->value("completion_tokens", 0L);
  }
  std::string text;
  try {
    const auto& choice = response.at("choices").at(0);
    if (choice.contains("message")) {
      const auto& content = choice["message"]["content"];
      if (content.is_string()) text = content.get<std::string>();
    } else if (choice.contains("text") && choice["text"].is_string()) {
      text = choice["text"].get<std::string>();
    }
  } catch (const nlohmann::json::exception&) {
    text.clear();
  }
  if (trim(text).empty()) {
    finish("empty content");
    throw ContentEmpty("endpoint returned no content for " + request.id);
  }
  finish({});
  return text;
}

ReplayEndpoint::ReplayEndpoint(const std::filesystem::path& path, std::string model)
    : model_(std::move(model)) {
  for (const auto& row : read_jsonl(path)) {
    if (!row.is_object() || !row.contains("id") || !row["id"].is_string()) {
      throw LoadError(path.string() + ": replay rows need a string id");
    }
    const auto id = row["id"].get<std::string>();
    if (row.contains("error")) {
      errors_[id] = row["error"].is_string() ? row["error"].get<std::string>() : row["error"].dump();
    } else if (row.contains("response") && row["response"].is_string()) {
      responses_[id] = row["response"].get<std::string>();
    } else {
      throw LoadError(path.string() + ": replay row " + id + " has neither response nor error");
    }
  }
}

ReplayEndpoint::ReplayEndpoint(std::map<std::string, std::string> responses, std::string model)
    : responses_(std::move(responses)), model_(std::move(model)) {}

std::string ReplayEndpoint::complete(const ChatRequest& request) {
  CallRecord record;
  record.example_id = request.id;
  record.request_id = "replay-" + request.id;
  record.model = model_;
  record.attempts = 1;
  if (auto err = errors_.find(request.id); err != errors_.end()) {
    record.error = err->second;
    log_.append(record);
    throw HttpError("replayed failure for " + request.id + ": " + err->second, 0, 1);
  }
  auto it = responses_.find(request.id);
  if (it == responses_.end()) {
    record.error = "no replay entry";
    log_.append(record);
    throw HttpError("no replay entry for " + request.id, 404, 1);
  }
  log_.append(record);
  return it->second;
}

std::unique_ptr<GenerationEndpoint> make_endpoint(const EndpointConfig& config) {
  config.validate();
  if (config.kind == "replay") return std::make_unique<ReplayEndpoint>(config.replay_path, config.model_id.empty() ? "replay" : config.model_id);
  return std::make_unique<ChatCompletionClient>(config);
}

namespace {

std::string strip_once(std::string_view raw) {
  static constexpr std::string_view kStart = "<START>";
  static constexpr std::string_view kEnd = "<END>";
  if (auto s = raw.find(kStart); s != std::string_view::npos) {
    auto body = s + kStart.size();
    if (auto e = raw.find(kEnd, body); e != std::string_view::npos) {
      return trim(raw.substr(body, e - body));
    }
  }
  if (auto open = raw.find("```"); open != std::string_view::npos) {
    auto line_end = raw.find('\n', open);
    if (line_end != std::string_view::npos) {
      auto close = raw.find("```", line_end + 1);
      if (close != std::string_view::npos) return trim(raw.substr(line_end + 1, close - line_end - 1));
    }
  }
  return trim(raw);
}

}  // namespace

std::string strip_markers(std::string_view raw) {
  std::string current = strip_once(raw);
  for (;;) {
    std::string next = strip_once(current);
    if (next == current) return current;
    current = std::move(next);
  }
}

}  // namespace dslgen
