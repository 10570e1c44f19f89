#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dslgen/catalog.hpp"
#include "dslgen/llm_client.hpp"
#include "dslgen/retrieval.hpp"

namespace dslgen {

enum class DistributionMode { usage_weighted, uniform };

std::string to_string(DistributionMode mode);
DistributionMode distribution_mode_from_string(std::string_view text);  // throws ConfigError

struct DatasetSpec {
  std::filesystem::path source_flows;
  std::filesystem::path catalog;
  std::size_t target_count = 500;  // 0: use the whole pool
  double train_fraction = 0.9;
  double test_fraction = 0.1;
  std::uint64_t seed = 0;
  DistributionMode distribution_mode = DistributionMode::usage_weighted;

  // Throws ConfigError unless both fractions lie in [0, 1] and sum to 1.
  void validate() const;

  Json to_json() const;
  static DatasetSpec from_json(const Json& j);
};

struct FlowRecord {
  std::string id;
  std::string dsl;
};

// JSONL rows {"id", "dsl"}. Throws LoadError.
std::vector<FlowRecord> load_flows(const std::filesystem::path& path);

struct NlGenerationOptions {
  std::size_t max_attempts = 3;
  std::string template_id = "nl-description-v1";
};

// Reason an NL candidate is unusable, or nullopt when it is fine: empty,
// contains "({", or names a catalog API verbatim.
std::optional<std::string> reject_reason(std::string_view text, const Catalog& catalog);

// Asks the endpoint to describe `dsl`, with the definition of every API it
// calls. The request id is `flow_id`. Throws ParseException, UnresolvedApi,
// GenerationRejected after max_attempts, or endpoint errors.
std::string generate_nl_for_flow(const std::string& flow_id, std::string_view dsl, const Catalog& catalog,
                                 GenerationEndpoint& endpoint, const NlGenerationOptions& options = {});
std::string generate_nl_for_flow(const std::string& flow_id, std::string_view dsl, const Catalog& catalog,
                                 const EndpointConfig& client, const NlGenerationOptions& options = {});

struct NlGenerationResult {
  std::string id;
  std::string dsl;
  std::string nl;     // empty on failure
  std::string error;  // empty on success

  bool ok() const { return error.empty(); }
};

// Runs up to `concurrency` flows at once; results ordered by id. One flow's
// failure never stops the others.
std::vector<NlGenerationResult> generate_nl_batch(std::span<const FlowRecord> flows, const Catalog& catalog,
                                                  GenerationEndpoint& endpoint, std::size_t concurrency,
                                                  const NlGenerationOptions& options = {});

// Successful results as examples. Throws InvalidExample.
std::vector<ExamplePair> to_examples(std::span<const NlGenerationResult> results);

// Columns: id, status, nl, dsl, error. For manual audit of generated text.
std::string review_csv(std::span<const NlGenerationResult> results);

struct SplitResult {
  std::vector<ExamplePair> train;  // ascending id
  std::vector<ExamplePair> test;   // ascending id
  Json manifest;
};

// Samples target_count pairs stratified by each flow's first API, either in
// proportion to the pool (usage-weighted) or as evenly as the strata allow
// (uniform), then deals them into train and test so both splits keep the
// sample's mix. Throws EmptyInput, InsufficientData or ConfigError.
SplitResult build_splits(const DatasetSpec& spec, std::span<const ExamplePair> pairs);

// Flows with no calls share this stratum.
inline constexpr const char* kNoActionStratum = "(none)";

}  // namespace dslgen
