#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dslgen/catalog.hpp"
#include "dslgen/embedding.hpp"
#include "dslgen/grounding.hpp"
#include "dslgen/llm_client.hpp"
#include "dslgen/metrics.hpp"
#include "dslgen/retrieval.hpp"

namespace dslgen {

struct RetrievalConfig {
  ProviderSpec provider;
  std::filesystem::path index_path;  // prebuilt shot index, or
  std::filesystem::path pool_path;   // example JSONL indexed at run start
};

struct ExperimentConfig {
  std::string name;
  GroundingConfig grounding;
  RetrievalConfig retrieval;
  std::optional<ProviderSpec> sfd_provider;  // defaults to the retrieval provider
  EndpointConfig endpoint;
  std::filesystem::path testset;  // JSONL {"id", "nl", "dsl"}
  std::filesystem::path catalog;
  std::optional<std::filesystem::path> baseline_summary;
  std::size_t concurrency = 4;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs";

  // Throws ConfigError on a bad name or a referenced path that does not exist.
  void validate(bool check_endpoint = true) const;

  Json to_json() const;
  // Relative paths resolve against `base_dir`.
  static ExperimentConfig from_json(const Json& j, const std::filesystem::path& base_dir = {});

  // Fields that can change results; excludes concurrency and output_dir.
  Json semantic_json() const;
  // sha256 over semantic_json() and the instruction template's content.
  std::string hash() const;

  std::filesystem::path run_dir() const { return output_dir / name; }
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// What summary.json holds. Deterministic for a given config and replay file.
struct RunSummary {
  std::string name;
  std::string testset_hash;
  std::string config_hash;
  MetricsSummary metrics;
  std::vector<std::string> warnings;

  Json to_json() const;
  static RunSummary from_json(const Json& j);
};

// Accepts a run directory or a summary.json path. Throws LoadError.
RunSummary load_run_summary(const std::filesystem::path& path);

// Retrieval and grounding for one configuration: loads the catalog and the
// shot and definition indexes once, then assembles a prompt per query.
class PromptBuilder {
 public:
  explicit PromptBuilder(const ExperimentConfig& config);

  // Shots whose id equals `example_id` are skipped.
  AssembledPrompt build(const std::string& example_id, std::string_view query) const;

  const Catalog& catalog() const { return *catalog_; }
  const PromptTemplate& prompt_template() const { return template_; }

 private:
  GroundingConfig grounding_;
  std::unique_ptr<Catalog> catalog_;  // stable address; fd_index_ points into it
  PromptTemplate template_;
  std::optional<ShotIndex> shot_index_;
  std::unique_ptr<EmbeddingProvider> shot_provider_;
  std::optional<FdIndex> fd_index_;
  std::unique_ptr<EmbeddingProvider> fd_provider_;
};

struct RunResult {
  Json config;  // snapshot, with config_hash and template_hash
  std::vector<FlowScore> scores;  // ascending example id
  RunSummary summary;
  std::optional<DeltaTable> delta;
  std::string calls_jsonl;
  std::vector<Json> prompt_manifests;  // ascending example id
  Json stats;  // wall clock; not reproducible
};

struct RunOptions {
  // Replaces the configured endpoint, e.g. a ReplayEndpoint built in memory.
  GenerationEndpoint* endpoint = nullptr;
  // Overrides config.baseline_summary.
  std::optional<std::filesystem::path> baseline_summary;
  bool write_outputs = true;
};

// Retrieval, grounding, generation, validation and scoring for every test
// example, then aggregation. Per-example failures never abort the run;
// endpoint errors become generation failures. Writes run_dir() contents
// unless disabled. Throws ConfigError, LoadError or InvalidExample before
// any example runs.
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

// Writes config.json, scores.jsonl, summary.json, delta.md, calls.jsonl,
// prompts.jsonl and stats.json. Throws ConfigError when the directory holds
// a run with a different config hash.
void write_run_outputs(const RunResult& result, const std::filesystem::path& dir);

// Hash of a test set's canonical JSONL (sorted by id).
std::string testset_hash(std::span<const ExamplePair> testset);

struct ComparisonReport {
  std::string markdown;
  Json json;
};

// One delta row per run against the baseline; the best cell per column is
// bold, ties included. Throws TestsetMismatch or EmptyInput.
ComparisonReport compare_runs(std::span<const RunSummary> runs, const RunSummary& baseline);

}  // namespace dslgen
