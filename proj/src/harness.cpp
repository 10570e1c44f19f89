#include "dslgen/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "dslgen/errors.hpp"
#include "dslgen/retrieval.hpp"
#include "dslgen/util.hpp"
#include "dslgen/validator.hpp"

namespace dslgen {

namespace fs = std::filesystem;

namespace {

fs::path resolve_path(const Json& j, const char* key, const fs::path& base) {
  if (!j.contains(key) || j[key].is_null()) return {};
  fs::path p = j[key].get<std::string>();
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

void require_file(const fs::path& p, const std::string& what) {
  std::error_code ec;
  if (p.empty()) throw ConfigError(what + " path is not set");
  if (!fs::is_regular_file(p, ec)) throw ConfigError(what + " not found: " + p.string());
}

}  // namespace

void ExperimentConfig::validate(bool check_endpoint) const {
  if (name.empty()) throw ConfigError("experiment name is empty");
  if (name.find_first_of("/\\") != std::string::npos || name == "." || name == "..") {
    throw ConfigError("experiment name must be a plain directory name: " + name);
  }
  if (concurrency == 0) throw ConfigError("concurrency must be at least 1");
  grounding.validate();
  endpoint.validate();
  require_file(testset, "test set");
  require_file(catalog, "catalog");
  if (!retrieval.index_path.empty()) {
    require_file(retrieval.index_path, "shot index");
  } else if (!retrieval.pool_path.empty()) {
    require_file(retrieval.pool_path, "example pool");
  } else if (grounding.n_shots > 0) {
    throw ConfigError("retrieval needs index_path or pool_path when n_shots > 0");
  }
  if (check_endpoint && endpoint.kind == "replay") require_file(endpoint.replay_path, "replay file");
  if (baseline_summary) {
    std::error_code ec;
    const bool is_dir = fs::is_directory(*baseline_summary, ec);
    require_file(is_dir ? *baseline_summary / "summary.json" : *baseline_summary, "baseline summary");
  }
  (void)PromptTemplate::resolve(grounding.instruction_template);
}

Json ExperimentConfig::to_json() const {
  Json j = semantic_json();
  j["endpoint"] = endpoint.to_json();
  j["concurrency"] = concurrency;
  j["output_dir"] = output_dir.string();
  return j;
}

Json ExperimentConfig::semantic_json() const {
  Json j;
  j["name"] = name;
  j["grounding"] = grounding.to_json();
  Json r;
  r["provider"] = retrieval.provider.to_json();
  r["index_path"] = retrieval.index_path.string();
  r["pool_path"] = retrieval.pool_path.string();
  j["retrieval"] = r;
  j["sfd_provider"] = sfd_provider ? sfd_provider->to_json() : Json(nullptr);
  Json e;
  e["kind"] = endpoint.kind;
  e["base_url"] = endpoint.base_url;
  e["model_id"] = endpoint.model_id;
  e["max_output_tokens"] = endpoint.max_output_tokens;
  e["temperature"] = endpoint.temperature;
  e["replay_path"] = endpoint.replay_path.string();
  j["endpoint"] = e;
  j["testset"] = testset.string();
  j["catalog"] = catalog.string();
  j["baseline_summary"] = baseline_summary ? Json(baseline_summary->string()) : Json(nullptr);
  j["seed"] = seed;
  return j;
}

std::string ExperimentConfig::hash() const {
  std::string tmpl_hash;
  try {
    tmpl_hash = PromptTemplate::resolve(grounding.instruction_template).content_hash();
  } catch (const ConfigError&) {
    tmpl_hash = "unresolved";
  }
  return sha256_hex(semantic_json().dump() + "\n" + tmpl_hash);
}

ExperimentConfig ExperimentConfig::from_json(const Json& j, const fs::path& base_dir) {
  ExperimentConfig c;
  try {
    c.name = j.at("name").get<std::string>();
    if (j.contains("grounding")) c.grounding = GroundingConfig::from_json(j["grounding"]);
    if (j.contains("retrieval")) {
      const auto& r = j["retrieval"];
      if (r.contains("provider")) c.retrieval.provider = ProviderSpec::from_json(r["provider"]);
      c.retrieval.index_path = resolve_path(r, "index_path", base_dir);
      c.retrieval.pool_path = resolve_path(r, "pool_path", base_dir);
    }
    if (j.contains("sfd_provider") && !j["sfd_provider"].is_null()) {
      c.sfd_provider = ProviderSpec::from_json(j["sfd_provider"]);
    }
    if (j.contains("endpoint")) {
      c.endpoint = EndpointConfig::from_json(j["endpoint"]);
      c.endpoint.replay_path = resolve_path(j["endpoint"], "replay_path", base_dir);
    }
    c.testset = resolve_path(j, "testset", base_dir);
    c.catalog = resolve_path(j, "catalog", base_dir);
    if (auto b = resolve_path(j, "baseline_summary", base_dir); !b.empty()) c.baseline_summary = b;
    c.concurrency = j.value("concurrency", c.concurrency);
    c.seed = j.value("seed", c.seed);
    if (j.contains("output_dir")) c.output_dir = resolve_path(j, "output_dir", base_dir);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return ExperimentConfig::from_json(j, path.parent_path());
}

// ---- summaries

Json RunSummary::to_json() const {
  Json j;
  j["name"] = name;
  j["testset_hash"] = testset_hash;
  j["config_hash"] = config_hash;
  j["metrics"] = metrics.to_json();
  j["warnings"] = warnings;
  return j;
}

RunSummary RunSummary::from_json(const Json& j) {
  RunSummary s;
  try {
    if (j.contains("metrics")) {
      s.name = j.value("name", std::string{});
      s.testset_hash = j.value("testset_hash", std::string{});
      s.config_hash = j.value("config_hash", std::string{});
      s.metrics = MetricsSummary::from_json(j["metrics"]);
      s.warnings = j.value("warnings", std::vector<std::string>{});
    } else {
      s.metrics = MetricsSummary::from_json(j);  // bare metrics object
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("run summary: ") + e.what());
  }
  return s;
}

RunSummary load_run_summary(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / "summary.json" : path;
  try {
    auto s = RunSummary::from_json(Json::parse(read_file(file)));
    if (s.name.empty()) s.name = file.parent_path().filename().string();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(file.string() + ": " + e.what());
  }
}

std::string testset_hash(std::span<const ExamplePair> testset) {
  std::vector<ExamplePair> sorted(testset.begin(), testset.end());
  std::sort(sorted.begin(), sorted.end(), [](const ExamplePair& a, const ExamplePair& b) { return a.id < b.id; });
  return sha256_hex(examples_to_jsonl(sorted));
}

// ---- running

namespace {

struct ExampleOutcome {
  FlowScore score;
  Json manifest;
};

std::vector<ExamplePair> load_testset(const fs::path& path) {
  auto examples = load_examples(path);
  if (examples.empty()) throw InvalidExample("test set " + path.string() + " is empty");
  std::sort(examples.begin(), examples.end(), [](const ExamplePair& a, const ExamplePair& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (i > 0 && examples[i].id == examples[i - 1].id) {
      throw InvalidExample("duplicate test id " + examples[i].id);
    }
    if (examples[i].api_set.empty()) {
      throw InvalidExample("test example " + examples[i].id + " has no API calls");
    }
  }
  return examples;
}

std::vector<std::string> nl_texts(std::span<const ExamplePair> pairs) {
  std::vector<std::string> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(p.nl);
  return out;
}

}  // namespace

PromptBuilder::PromptBuilder(const ExperimentConfig& config)
    : grounding_(config.grounding),
      catalog_(std::make_unique<Catalog>(load_catalog(config.catalog))),
      template_(PromptTemplate::resolve(config.grounding.instruction_template)) {
  grounding_.validate();
  template_.require({"query"});
  if (grounding_.n_shots > 0) {
    if (!config.retrieval.index_path.empty()) {
      shot_index_ = ShotIndex::load(config.retrieval.index_path);
      shot_provider_ = make_provider(config.retrieval.provider, nl_texts(shot_index_->pairs()));
    } else {
      auto pool = load_examples(config.retrieval.pool_path);
      shot_provider_ = make_provider(config.retrieval.provider, nl_texts(pool));
      shot_index_ = build_index(std::move(pool), *shot_provider_);
    }
  }
  if (grounding_.use_sfd) {
    std::vector<std::string> fd_texts;
    for (const auto* def : catalog_->definitions()) fd_texts.push_back(render_fd(*def));
    fd_provider_ = make_provider(config.sfd_provider.value_or(config.retrieval.provider), fd_texts);
    fd_index_ = build_fd_index(*catalog_, *fd_provider_);
  }
}

AssembledPrompt PromptBuilder::build(const std::string& example_id, std::string_view query) const {
  std::vector<ScoredExample> shots;
  if (shot_index_) {
    // One extra so the example itself can be skipped if it sits in the pool.
    for (auto& s : retrieve_few_shots(*shot_index_, query, grounding_.n_shots + 1, *shot_provider_)) {
      if (s.pair.id != example_id && shots.size() < grounding_.n_shots) shots.push_back(std::move(s));
    }
  }
  std::vector<const FunctionDefinition*> regular;
  std::vector<ApiName> missing;
  if (grounding_.use_fd) {
    std::vector<ExamplePair> shot_pairs;
    for (const auto& s : shots) shot_pairs.push_back(s.pair);
    auto sel = extract_fds_for_shots(shot_pairs, *catalog_);
    regular = std::move(sel.definitions);
    missing = std::move(sel.missing);
  }
  std::vector<ScoredDefinition> semantic;
  if (fd_index_) semantic = retrieve_semantic_fds(*fd_index_, query, grounding_.sfd_k, *fd_provider_);

  auto prompt = assemble_metaprompt(grounding_, template_, shots, regular, semantic, query);
  for (const auto& m : missing) prompt.manifest.push_back({"fd", m.str(), "dropped", "missing_from_catalog"});
  return prompt;
}

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  ExperimentConfig cfg = config;
  if (options.baseline_summary) cfg.baseline_summary = options.baseline_summary;
  cfg.validate(/*check_endpoint=*/options.endpoint == nullptr);
  const auto config_hash = cfg.hash();
  if (options.write_outputs) {
    const auto existing = cfg.run_dir() / "config.json";
    if (fs::exists(existing)) {
      const auto old = Json::parse(read_file(existing));
      if (old.value("config_hash", std::string{}) != config_hash) {
        throw ConfigError("run directory " + cfg.run_dir().string() + " holds a different configuration");
      }
    }
  }

  const PromptBuilder builder(cfg);
  const auto& catalog = builder.catalog();
  const auto testset = load_testset(cfg.testset);
  std::optional<RunSummary> baseline;
  if (cfg.baseline_summary) baseline = load_run_summary(*cfg.baseline_summary);

  std::unique_ptr<GenerationEndpoint> owned_endpoint;
  GenerationEndpoint* endpoint = options.endpoint;
  if (!endpoint) {
    owned_endpoint = make_endpoint(cfg.endpoint);
    endpoint = owned_endpoint.get();
  }

  auto run_one = [&](const ExamplePair& example) -> ExampleOutcome {
    const Program truth = parse(example.dsl);
    ExampleOutcome outcome;
    try {
      const auto prompt = builder.build(example.id, example.nl);
      outcome.manifest = prompt.manifest_json();
      outcome.manifest["id"] = example.id;

      const auto raw = endpoint->complete(prompt.to_chat_request(example.id));
      const auto text = strip_markers(raw);
      outcome.score = score_flow(example.id, truth, classify(catalog, std::string_view(text)));
      outcome.score.prediction = text;
    } catch (const std::exception& e) {
      outcome.score = generation_failure(example.id, e.what());
      if (outcome.manifest.is_null()) outcome.manifest = {{"id", example.id}, {"error", e.what()}};
    }
    return outcome;
  };

  std::vector<ExampleOutcome> outcomes(testset.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < testset.size(); i = next++) outcomes[i] = run_one(testset[i]);
  };
  const std::size_t n_threads = std::min(cfg.concurrency, testset.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
  }

  RunResult result;
  for (auto& o : outcomes) {
    result.scores.push_back(std::move(o.score));
    result.prompt_manifests.push_back(std::move(o.manifest));
  }

  result.summary.name = cfg.name;
  result.summary.testset_hash = testset_hash(testset);
  result.summary.config_hash = config_hash;
  const auto n_failed = std::count_if(result.scores.begin(), result.scores.end(),
                                      [](const FlowScore& s) { return s.generation_failed; });
  if (static_cast<std::size_t>(n_failed) == result.scores.size()) {
    result.summary.warnings.push_back("every generation failed; no flow was scored");
    result.summary.metrics.n_generation_failed = static_cast<std::size_t>(n_failed);
  } else {
    result.summary.metrics = aggregate(result.scores);
  }
  if (n_failed > 0) {
    result.summary.warnings.push_back(std::to_string(n_failed) + " of " + std::to_string(result.scores.size()) +
                                      " generations failed; they score 0 and are excluded from the rate denominators");
  }
  if (baseline) {
    if (!baseline->testset_hash.empty() && baseline->testset_hash != result.summary.testset_hash) {
      throw TestsetMismatch("baseline " + baseline->name + " was scored on a different test set");
    }
    result.delta = delta_table(result.summary.metrics, baseline->metrics);
  }

  result.config = cfg.to_json();
  result.config["config_hash"] = config_hash;
  result.config["template_hash"] = builder.prompt_template().content_hash();
  result.calls_jsonl = endpoint->log().to_jsonl();

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  result.stats = {{"wall_clock_s", wall},
                  {"examples", result.scores.size()},
                  {"generation_failed", n_failed},
                  {"threads", n_threads}};

  if (options.write_outputs) write_run_outputs(result, cfg.run_dir());
  return result;
}

void write_run_outputs(const RunResult& result, const fs::path& dir) {
  const auto hash = result.config.value("config_hash", std::string{});
  if (fs::exists(dir / "config.json")) {
    const auto old = Json::parse(read_file(dir / "config.json"));
    if (old.value("config_hash", std::string{}) != hash) {
      throw ConfigError("run directory " + dir.string() + " holds a different configuration");
    }
  }
  write_file(dir / "config.json", result.config.dump(2) + "\n");

  std::vector<Json> rows;
  for (const auto& s : result.scores) rows.push_back(s.to_json());
  write_file(dir / "scores.jsonl", to_jsonl(rows));
  write_file(dir / "summary.json", result.summary.to_json().dump(2) + "\n");

  std::string md = "# " + result.summary.name + "\n\n";
  if (result.delta) {
    md += result.delta->to_markdown();
  } else {
    md += "No baseline given.\n";
  }
  for (const auto& w : result.summary.warnings) md += "\nWARNING: " + w + "\n";
  write_file(dir / "delta.md", md);

  write_file(dir / "calls.jsonl", result.calls_jsonl);
  write_file(dir / "prompts.jsonl", to_jsonl(result.prompt_manifests));
  write_file(dir / "stats.json", result.stats.dump(2) + "\n");
}

// ---- comparison

namespace {

struct Column {
  const char* label;
  const char* metric;
  bool higher_is_better;
};

constexpr Column kColumns[] = {
    {"Avg. Similarity", "avg_similarity", true},
    {"%Unparsed flows", "pct_unparsed", false},
    {"%made-up API names", "pct_made_up_apis", false},
    {"%made-up API parameters", "pct_made_up_params", false},
};

}  // namespace

ComparisonReport compare_runs(std::span<const RunSummary> runs, const RunSummary& baseline) {
  if (runs.empty()) throw EmptyInput("no runs to compare");
  for (const auto& r : runs) {
    if (r.testset_hash != baseline.testset_hash) {
      throw TestsetMismatch("run " + r.name + " and baseline " + baseline.name + " used different test sets");
    }
  }

  std::vector<DeltaTable> tables;
  for (const auto& r : runs) tables.push_back(delta_table(r.metrics, baseline.metrics));

  // Best delta per column; ties share the mark.
  std::vector<std::optional<double>> best(std::size(kColumns));
  for (std::size_t c = 0; c < std::size(kColumns); ++c) {
    for (const auto& t : tables) {
      const auto& d = t.row(kColumns[c].metric).delta;
      if (!d) continue;
      const double v = std::stod(format_delta(*d));  // compare as displayed
      if (!best[c] || (kColumns[c].higher_is_better ? v > *best[c] : v < *best[c])) best[c] = v;
    }
  }

  ComparisonReport report;
  std::string& md = report.markdown;
  md = "| Model";
  for (const auto& col : kColumns) md += std::string(" | ") + col.label;
  md += " |\n|---";
  for (std::size_t c = 0; c < std::size(kColumns); ++c) md += "|---:";
  md += "|\n";

  report.json["baseline"] = baseline.to_json();
  report.json["note"] = kOrientationNote;
  report.json["rows"] = Json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    md += "| " + runs[i].name;
    Json row;
    row["name"] = runs[i].name;
    for (std::size_t c = 0; c < std::size(kColumns); ++c) {
      const auto& d = tables[i].row(kColumns[c].metric).delta;
      std::string cell = "n/a";
      bool is_best = false;
      if (d) {
        cell = format_delta(*d);
        is_best = best[c] && std::stod(cell) == *best[c];
        if (is_best) cell = "**" + cell + "**";
      }
      md += " | " + cell;
      row[kColumns[c].metric] = {{"delta", d ? Json(*d) : Json(nullptr)}, {"best", is_best}};
    }
    md += " |\n";
    report.json["rows"].push_back(row);
  }
  md += "\nDeltas against " + (baseline.name.empty() ? std::string("the baseline") : baseline.name) + ". ";
  md += kOrientationNote;
  md += "\n";
  return report;
}

}  // namespace dslgen
