#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dslgen/dsl.hpp"

namespace dslgen {

using Vector = std::vector<double>;

// Maps text batches to fixed-dimension vectors. Implementations are
// deterministic per instance and safe to call from several threads.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  // Identifies the embedding space; indexes record it and refuse queries
  // from a provider with a different name.
  virtual std::string name() const = 0;
  virtual std::size_t dimension() const = 0;

  // One vector of dimension() per input text, in input order. Throws EmbedError.
  virtual std::vector<Vector> embed(std::span<const std::string> texts) const = 0;

  Vector embed_one(std::string_view text) const;
};

// Offline provider: lower-cased alphanumeric tokens hashed (FNV-1a) into
// `dimension` buckets, weighted by term frequency times smoothed IDF
// ln((1 + N) / (1 + df)) + 1. Without an IDF corpus every token weighs its
// term frequency.
class HashingEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HashingEmbeddingProvider(std::size_t dimension = 256);
  HashingEmbeddingProvider(std::size_t dimension, std::span<const std::string> idf_corpus);

  std::string name() const override { return name_; }
  std::size_t dimension() const override { return dimension_; }
  std::vector<Vector> embed(std::span<const std::string> texts) const override;

  static std::vector<std::string> tokenize(std::string_view text);
  std::size_t bucket(std::string_view token) const;
  double idf(std::string_view token) const;

 private:
  std::size_t dimension_;
  std::size_t corpus_size_ = 0;
  std::map<std::string, std::size_t, std::less<>> document_frequency_;
  bool use_idf_ = false;
  std::string name_;
};

struct HttpEmbeddingConfig {
  std::string url;  // full endpoint URL, e.g. http://host:8080/v1/embeddings
  std::string model;
  std::string api_key_env;
  std::size_t dimension = 0;
  std::size_t batch_size = 64;
  std::size_t max_in_flight = 4;
  double timeout_s = 30.0;
  std::size_t max_retries = 3;
  double backoff_s = 0.5;
};

// POST {"input": [texts], "model": ...} -> {"data": [{"embedding": [...]}, ...]}.
// Batches go out concurrently up to max_in_flight; results keep input order.
class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(HttpEmbeddingConfig config);

  std::string name() const override;
  std::size_t dimension() const override { return config_.dimension; }
  std::vector<Vector> embed(std::span<const std::string> texts) const override;

 private:
  std::vector<Vector> embed_batch(std::span<const std::string> texts) const;

  HttpEmbeddingConfig config_;
  std::string scheme_host_port_;
  std::string path_;
};

// Provider selection as stored in experiment configs:
//   {"kind": "hashing", "dimension": 256, "idf": true}
//   {"kind": "http", "url": ..., "model": ..., "dimension": 768, ...}
struct ProviderSpec {
  std::string kind = "hashing";
  std::size_t dimension = 256;
  bool idf = false;  // hashing: fit IDF on the example pool's NL texts
  HttpEmbeddingConfig http;

  Json to_json() const;
  static ProviderSpec from_json(const Json& j);
  // "hashing:256", "hashing:256:idf" or a path to a JSON spec file.
  static ProviderSpec from_cli(std::string_view text);
};

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderSpec& spec,
                                                 std::span<const std::string> idf_corpus = {});

}  // namespace dslgen
