#include "dslgen/embedding.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <future>
#include <set>
#include <thread>

#include "dslgen/errors.hpp"
#include "dslgen/util.hpp"
#include "httplib.h"

namespace dslgen {

Vector EmbeddingProvider::embed_one(std::string_view text) const {
  std::string owned(text);
  auto out = embed(std::span<const std::string>(&owned, 1));
  if (out.size() != 1) throw EmbedError("provider returned " + std::to_string(out.size()) + " vectors for 1 text");
  return std::move(out.front());
}

HashingEmbeddingProvider::HashingEmbeddingProvider(std::size_t dimension)
    : dimension_(dimension), name_("hashing-d" + std::to_string(dimension)) {
  if (dimension_ == 0) throw std::invalid_argument("embedding dimension must be positive");
}

HashingEmbeddingProvider::HashingEmbeddingProvider(std::size_t dimension,
                                                   std::span<const std::string> idf_corpus)
    : HashingEmbeddingProvider(dimension) {
  use_idf_ = true;
  corpus_size_ = idf_corpus.size();
  for (const auto& doc : idf_corpus) {
    auto tokens = tokenize(doc);
    std::set<std::string> distinct(tokens.begin(), tokens.end());
    for (const auto& t : distinct) ++document_frequency_[t];
  }
  std::string fingerprint = std::to_string(corpus_size_) + "\n";
  for (const auto& [token, df] : document_frequency_) {
    fingerprint += token + "\t" + std::to_string(df) + "\n";
  }
  name_ += "-idf-" + sha256_hex(fingerprint).substr(0, 12);
}

std::vector<std::string> HashingEmbeddingProvider::tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      cur += static_cast<char>(c);
    } else if (c >= 'A' && c <= 'Z') {
      cur += static_cast<char>(c - 'A' + 'a');
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::size_t HashingEmbeddingProvider::bucket(std::string_view token) const {
  return static_cast<std::size_t>(fnv1a64(token) % dimension_);
}

double HashingEmbeddingProvider::idf(std::string_view token) const {
  if (!use_idf_) return 1.0;
  auto it = document_frequency_.find(token);
  const double df = it == document_frequency_.end() ? 0.0 : static_cast<double>(it->second);
  return std::log((1.0 + static_cast<double>(corpus_size_)) / (1.0 + df)) + 1.0;
}

std::vector<Vector> HashingEmbeddingProvider::embed(std::span<const std::string> texts) const {
  std::vector<Vector> out(texts.size(), Vector(dimension_, 0.0));
  const auto n = static_cast<std::int64_t>(texts.size());
#pragma omp parallel for schedule(dynamic, 32) if (n > 256)
  for (std::int64_t i = 0; i < n; ++i) {
    auto& v = out[static_cast<std::size_t>(i)];
    for (const auto& token : tokenize(texts[static_cast<std::size_t>(i)])) {
      v[bucket(token)] += idf(token);
    }
  }
  return out;
}

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEmbeddingConfig config) : config_(std::move(config)) {
  if (config_.dimension == 0) throw ConfigError("HTTP embedding provider needs a dimension");
  if (config_.batch_size == 0 || config_.max_in_flight == 0) {
    throw ConfigError("batch_size and max_in_flight must be positive");
  }
  std::tie(scheme_host_port_, path_) = split_url(config_.url);
}

std::string HttpEmbeddingProvider::name() const {
  return "http:" + config_.model + "@" + config_.url;
}

std::vector<Vector> HttpEmbeddingProvider::embed_batch(std::span<const std::string> texts) const {
  Json payload;
  payload["input"] = Json::array();
  for (const auto& t : texts) payload["input"].push_back(t);
  if (!config_.model.empty()) payload["model"] = config_.model;
  const std::string body = payload.dump(-1, ' ', false, Json::error_handler_t::replace);

  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }

  std::string failure;
  for (std::size_t attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(
          config_.backoff_s * static_cast<double>(1ull << std::min<std::size_t>(attempt - 1, 30))));
    }
    httplib::Client client(scheme_host_port_);
    const auto micros = static_cast<long long>(config_.timeout_s * 1e6);
    client.set_connection_timeout(micros / 1000000, micros % 1000000);
    client.set_read_timeout(micros / 1000000, micros % 1000000);
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      failure = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      failure = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw EmbedError("embedding endpoint returned HTTP " + std::to_string(res->status));
    }
    try {
      auto j = Json::parse(res->body);
      const auto& data = j.at("data");
      if (!data.is_array() || data.size() != texts.size()) {
        throw EmbedError("embedding endpoint returned " + std::to_string(data.size()) +
                         " vectors for " + std::to_string(texts.size()) + " texts");
      }
      std::vector<Vector> out(texts.size());
      for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t slot = data[i].contains("index") ? data[i]["index"].get<std::size_t>() : i;
        if (slot >= out.size() || !out[slot].empty()) throw EmbedError("bad or repeated embedding index");
        out[slot] = data[i].at("embedding").get<Vector>();
        if (out[slot].size() != config_.dimension) {
          throw EmbedError("embedding has dimension " + std::to_string(out[slot].size()) +
                           ", expected " + std::to_string(config_.dimension));
        }
      }
      return out;
    } catch (const nlohmann::json::exception& e) {
      throw EmbedError(std::string("malformed embedding response: ") + e.what());
    }
  }
  throw EmbedError("embedding request failed: " + failure);
}

std::vector<Vector> HttpEmbeddingProvider::embed(std::span<const std::string> texts) const {
  std::vector<Vector> out;
  out.reserve(texts.size());
  std::vector<std::future<std::vector<Vector>>> window;
  auto drain_one = [&] {
    auto part = window.front().get();
    window.erase(window.begin());
    for (auto& v : part) out.push_back(std::move(v));
  };
  for (std::size_t start = 0; start < texts.size(); start += config_.batch_size) {
    const auto len = std::min(config_.batch_size, texts.size() - start);
    if (window.size() == config_.max_in_flight) drain_one();
    window.push_back(std::async(std::launch::async, [this, batch = texts.subspan(start, len)] {
      return embed_batch(batch);
    }));
  }
  while (!window.empty()) drain_one();
  return out;
}

Json ProviderSpec::to_json() const {
  Json j;
  j["kind"] = kind;
  j["dimension"] = dimension;
  if (kind == "hashing") {
    j["idf"] = idf;
  } else {
    j["url"] = http.url;
    j["model"] = http.model;
    j["api_key_env"] = http.api_key_env;
    j["batch_size"] = http.batch_size;
    j["max_in_flight"] = http.max_in_flight;
    j["timeout_s"] = http.timeout_s;
    j["max_retries"] = http.max_retries;
    j["backoff_s"] = http.backoff_s;
  }
  return j;
}

ProviderSpec ProviderSpec::from_json(const Json& j) {
  ProviderSpec s;
  try {
    s.kind = j.value("kind", s.kind);
    s.dimension = j.value("dimension", s.dimension);
    if (s.kind == "hashing") {
      s.idf = j.value("idf", false);
    } else if (s.kind == "http") {
      s.http.url = j.at("url").get<std::string>();
      s.http.model = j.value("model", std::string{});
      s.http.api_key_env = j.value("api_key_env", std::string{});
      s.http.batch_size = j.value("batch_size", s.http.batch_size);
      s.http.max_in_flight = j.value("max_in_flight", s.http.max_in_flight);
      s.http.timeout_s = j.value("timeout_s", s.http.timeout_s);
      s.http.max_retries = j.value("max_retries", s.http.max_retries);
      s.http.backoff_s = j.value("backoff_s", s.http.backoff_s);
    } else {
      throw ConfigError("unknown embedding provider kind " + s.kind);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("provider spec: ") + e.what());
  }
  s.http.dimension = s.dimension;
  if (s.dimension == 0) throw ConfigError("provider dimension must be positive");
  return s;
}

ProviderSpec ProviderSpec::from_cli(std::string_view text) {
  if (text.starts_with("hashing")) {
    ProviderSpec s;
    auto rest = text.substr(std::string_view("hashing").size());
    if (rest.starts_with(":")) {
      rest.remove_prefix(1);
      auto colon = rest.find(':');
      s.dimension = std::stoul(std::string(rest.substr(0, colon)));
      if (colon != std::string_view::npos) {
        if (rest.substr(colon + 1) != "idf") throw ConfigError("unknown provider option " + std::string(rest.substr(colon + 1)));
        s.idf = true;
      }
    }
    if (s.dimension == 0) throw ConfigError("provider dimension must be positive");
    return s;
  }
  return from_json(Json::parse(read_file(std::filesystem::path(std::string(text)))));
}

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderSpec& spec,
                                                 std::span<const std::string> idf_corpus) {
  if (spec.kind == "hashing") {
    if (spec.idf) return std::make_unique<HashingEmbeddingProvider>(spec.dimension, idf_corpus);
    return std::make_unique<HashingEmbeddingProvider>(spec.dimension);
  }
  if (spec.kind == "http") {
    auto cfg = spec.http;
    cfg.dimension = spec.dimension;
    return std::make_unique<HttpEmbeddingProvider>(cfg);
  }
  throw ConfigError("unknown embedding provider kind " + spec.kind);
}

}  // namespace dslgen
