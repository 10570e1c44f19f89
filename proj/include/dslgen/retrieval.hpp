#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dslgen/dsl.hpp"
#include "dslgen/embedding.hpp"
#include "dslgen/vector_index.hpp"

namespace dslgen {

// One (natural-language query, flow) exemplar.
struct ExamplePair {
  std::string id;
  std::string nl;
  std::string dsl;
  std::vector<ApiName> api_set;  // distinct names in the flow, sorted

  // Parses `dsl` and derives api_set. Throws InvalidExample.
  static ExamplePair make(std::string id, std::string nl, std::string dsl);

  Json to_json() const;  // {"id", "nl", "dsl"}
  static ExamplePair from_json(const Json& j);

  bool operator==(const ExamplePair&) const = default;
};

// Dataset JSONL rows {"id", "nl", "dsl"}. Throws LoadError or InvalidExample.
std::vector<ExamplePair> load_examples(const std::filesystem::path& path);
std::string examples_to_jsonl(std::span<const ExamplePair> pairs);

class ShotIndex {
 public:
  const std::string& provider_name() const { return provider_name_; }
  std::size_t dimension() const { return vectors_.dimension(); }
  std::size_t size() const { return pairs_.size(); }
  const std::vector<ExamplePair>& pairs() const { return pairs_; }  // ascending id
  const VectorIndex& vectors() const { return vectors_; }

  void save(const std::filesystem::path& path) const;
  static ShotIndex load(const std::filesystem::path& path);

 private:
  friend ShotIndex build_index(std::vector<ExamplePair> pairs, const EmbeddingProvider& provider);

  std::string provider_name_;
  std::vector<ExamplePair> pairs_;
  VectorIndex vectors_;
};

// Embeds each pair's NL text. Throws InvalidExample (unparseable flow or
// duplicate id), EmbedError, DegenerateVector, or std::invalid_argument for
// an empty pool.
ShotIndex build_index(std::vector<ExamplePair> pairs, const EmbeddingProvider& provider);

struct ScoredExample {
  ExamplePair pair;
  double score = 0.0;
};

// Top-k by cosine, ties by ascending id. Throws ProviderMismatch when the
// provider is not the one the index was built with.
std::vector<ScoredExample> retrieve_few_shots(const ShotIndex& index, std::string_view query,
                                              std::size_t k, const EmbeddingProvider& provider);

// Jaccard over two sorted, distinct name sets; 1 when both are empty.
double jaccard(std::span<const ApiName> a, std::span<const ApiName> b);

// Jaccard over the distinct API names of two flows. Throws ParseException.
double program_similarity(std::string_view a, std::string_view b);

// One mined pair for target-similarity tuning of a retrieval model.
struct TstPairRecord {
  std::string id_i;
  std::string id_j;
  std::string u_i;
  std::string u_j;
  double cosine_nl = 0.0;
  bool positive = false;  // cosine_nl > threshold
  double target_s = 0.0;  // Jaccard of the two flows' API sets

  Json to_json() const;
  static TstPairRecord from_json(const Json& j);

  bool operator==(const TstPairRecord&) const = default;
};

inline constexpr double kDefaultTstThreshold = 0.7;

// Samples up to `budget` unordered pairs (i < j) without replacement with a
// seeded generator, then labels each by NL cosine and attaches the Jaccard
// target. Identical (dataset, provider, threshold, budget, seed) give
// identical output.
std::vector<TstPairRecord> generate_tst_pairs(std::span<const ExamplePair> dataset,
                                              const EmbeddingProvider& provider,
                                              double threshold, std::size_t budget,
                                              std::uint64_t seed);

std::string tst_pairs_to_jsonl(std::span<const TstPairRecord> records);

// Maps a pair ordinal in [0, n(n-1)/2) to (i, j), i < j, in row-major order.
std::pair<std::size_t, std::size_t> pair_from_ordinal(std::uint64_t ordinal, std::size_t n);

}  // namespace dslgen
