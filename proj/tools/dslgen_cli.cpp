#include <iostream>
#include <iterator>
#include <sstream>

#include "CLI11.hpp"
#include "dslgen/catalog.hpp"
#include "dslgen/datagen.hpp"
#include "dslgen/dsl.hpp"
#include "dslgen/errors.hpp"
#include "dslgen/grounding.hpp"
#include "dslgen/harness.hpp"
#include "dslgen/metrics.hpp"
#include "dslgen/retrieval.hpp"
#include "dslgen/util.hpp"
#include "dslgen/validator.hpp"

using namespace dslgen;
namespace fs = std::filesystem;

namespace {

std::string read_input(const std::string& path) {
  if (path == "-") {
    return std::string(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
  }
  return read_file(path);
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
  } else {
    write_file(out_path, text);
  }
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!trim(item).empty()) out.push_back(trim(item));
  }
  return out;
}

// Truth rows need "id" and "dsl"; prediction rows need "id" and one of
// "text", "response" or "dsl".
std::vector<TruthRecord> load_truths(const fs::path& path) {
  std::vector<TruthRecord> out;
  for (const auto& row : read_jsonl(path)) {
    const auto id = row.at("id").get<std::string>();
    out.push_back({id, parse(row.at("dsl").get<std::string>())});
  }
  return out;
}

std::vector<PredictionRecord> load_predictions(const fs::path& path) {
  std::vector<PredictionRecord> out;
  for (const auto& row : read_jsonl(path)) {
    PredictionRecord p;
    p.id = row.at("id").get<std::string>();
    for (const char* key : {"text", "response", "dsl"}) {
      if (row.contains(key) && row[key].is_string()) {
        p.text = row[key].get<std::string>();
        break;
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DSL workflow generation toolkit: parse, validate, retrieve, ground, generate, evaluate."};
  app.require_subcommand(1);

  // parse
  std::string parse_in = "-";
  bool parse_json = false;
  auto* parse_cmd = app.add_subcommand("parse", "Parse a flow and print its canonical form");
  parse_cmd->add_option("file", parse_in, "Flow file, or - for stdin");
  parse_cmd->add_flag("--json", parse_json, "Print the result as JSON");

  // validate
  std::string val_in = "-", val_catalog;
  auto* val_cmd = app.add_subcommand("validate", "Classify a flow against an API catalog");
  val_cmd->add_option("file", val_in, "Flow file, or - for stdin");
  val_cmd->add_option("--catalog", val_catalog, "Catalog JSON")->required();

  // eval
  std::string ev_catalog, ev_truth, ev_pred, ev_baseline, ev_out;
  auto* ev_cmd = app.add_subcommand("eval", "Score predictions against ground truths");
  ev_cmd->add_option("--catalog", ev_catalog, "Catalog JSON")->required();
  ev_cmd->add_option("--truth", ev_truth, "Ground truth JSONL {id, dsl}")->required();
  ev_cmd->add_option("--pred", ev_pred, "Prediction JSONL {id, text}")->required();
  ev_cmd->add_option("--baseline", ev_baseline, "Baseline summary.json for a delta table");
  ev_cmd->add_option("--scores-out", ev_out, "Write per-example scores JSONL here");

  // catalog
  auto* cat_cmd = app.add_subcommand("catalog", "Inspect an API catalog");
  cat_cmd->require_subcommand(1);
  std::string cat_file, cat_name;
  auto* cat_validate = cat_cmd->add_subcommand("validate", "Load a catalog and report its size");
  cat_validate->add_option("file", cat_file, "Catalog JSON")->required();
  auto* cat_show = cat_cmd->add_subcommand("show", "Render function definitions as grounding text");
  cat_show->add_option("file", cat_file, "Catalog JSON")->required();
  cat_show->add_option("--name", cat_name, "Only this function");

  // index
  auto* idx_cmd = app.add_subcommand("index", "Build or query a few-shot index");
  idx_cmd->require_subcommand(1);
  std::string idx_pool, idx_provider = "hashing:256", idx_out, idx_path, idx_query;
  std::size_t idx_k = 5;
  auto* idx_build = idx_cmd->add_subcommand("build", "Embed an example pool");
  idx_build->add_option("--pool", idx_pool, "Example JSONL {id, nl, dsl}")->required();
  idx_build->add_option("--provider", idx_provider, "hashing:DIM[:idf] or a provider JSON file");
  idx_build->add_option("--out", idx_out, "Index file")->required();
  auto* idx_q = idx_cmd->add_subcommand("query", "Retrieve the top-k examples for a query");
  idx_q->add_option("--index", idx_path, "Index file")->required();
  idx_q->add_option("--provider", idx_provider, "Provider the index was built with");
  idx_q->add_option("--query", idx_query, "Natural-language query")->required();
  idx_q->add_option("-k", idx_k, "Number of results")->check(CLI::PositiveNumber);

  // tst-pairs
  std::string tst_dataset, tst_provider = "hashing:256", tst_out;
  double tst_threshold = kDefaultTstThreshold;
  std::size_t tst_budget = 10000;
  std::uint64_t tst_seed = 0;
  auto* tst_cmd = app.add_subcommand("tst-pairs", "Mine labeled pairs for retriever tuning");
  tst_cmd->add_option("--dataset", tst_dataset, "Example JSONL {id, nl, dsl}")->required();
  tst_cmd->add_option("--provider", tst_provider, "Embedding provider");
  tst_cmd->add_option("--threshold", tst_threshold, "Cosine threshold for positive pairs");
  tst_cmd->add_option("--budget", tst_budget, "Maximum number of pairs");
  tst_cmd->add_option("--seed", tst_seed, "Sampling seed");
  tst_cmd->add_option("--out", tst_out, "Output JSONL (default stdout)");

  // prompt
  auto* pr_cmd = app.add_subcommand("prompt", "Metaprompt tools");
  pr_cmd->require_subcommand(1);
  std::string pr_config, pr_query, pr_id = "query";
  bool pr_manifest = false;
  auto* pr_assemble = pr_cmd->add_subcommand("assemble", "Assemble the prompt an experiment would send");
  pr_assemble->add_option("--config", pr_config, "Experiment config JSON")->required();
  pr_assemble->add_option("--query", pr_query, "Natural-language query")->required();
  pr_assemble->add_option("--id", pr_id, "Example id; a shot with this id is skipped");
  pr_assemble->add_flag("--manifest", pr_manifest, "Print the inclusion manifest instead of the prompt");

  // datagen
  auto* dg_cmd = app.add_subcommand("datagen", "Synthesize NL prompts and build splits");
  dg_cmd->require_subcommand(1);
  std::string dg_flows, dg_catalog, dg_endpoint, dg_out, dg_review, dg_spec, dg_pairs, dg_out_dir;
  std::size_t dg_concurrency = 4, dg_attempts = 3;
  auto* dg_nl = dg_cmd->add_subcommand("nl", "Describe each flow in natural language");
  dg_nl->add_option("--flows", dg_flows, "Flow JSONL {id, dsl}")->required();
  dg_nl->add_option("--catalog", dg_catalog, "Catalog JSON")->required();
  dg_nl->add_option("--endpoint", dg_endpoint, "Endpoint config JSON")->required();
  dg_nl->add_option("--out", dg_out, "Example JSONL output")->required();
  dg_nl->add_option("--review", dg_review, "Review CSV output");
  dg_nl->add_option("--concurrency", dg_concurrency, "Flows in flight")->check(CLI::PositiveNumber);
  dg_nl->add_option("--max-attempts", dg_attempts, "Attempts per flow")->check(CLI::PositiveNumber);
  auto* dg_split = dg_cmd->add_subcommand("split", "Build seeded train/test splits");
  dg_split->add_option("--spec", dg_spec, "Dataset spec JSON")->required();
  dg_split->add_option("--pairs", dg_pairs, "Example JSONL (defaults to the spec's source_flows)");
  dg_split->add_option("--out-dir", dg_out_dir, "Directory for train.jsonl, test.jsonl, manifest.json")->required();

  // run
  std::string run_config, run_baseline;
  auto* run_cmd = app.add_subcommand("run", "Run one experiment arm");
  run_cmd->add_option("--config", run_config, "Experiment config JSON")->required();
  run_cmd->add_option("--baseline", run_baseline, "Baseline summary.json or run directory");

  // compare
  std::string cmp_runs, cmp_baseline, cmp_out;
  bool cmp_json = false;
  auto* cmp_cmd = app.add_subcommand("compare", "Delta table of several runs against a baseline");
  cmp_cmd->add_option("--runs", cmp_runs, "Comma-separated run directories or summary files")->required();
  cmp_cmd->add_option("--baseline", cmp_baseline, "Baseline run directory or summary file")->required();
  cmp_cmd->add_option("--out", cmp_out, "Write the report here");
  cmp_cmd->add_flag("--json", cmp_json, "Emit JSON instead of markdown");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*parse_cmd) {
      auto result = try_parse(read_input(parse_in));
      if (parse_json) {
        Json j;
        j["parsed"] = result.ok();
        if (result.ok()) {
          j["canonical"] = serialize(*result.program);
          j["actions"] = Json::array();
          for (const auto& a : extract_actions(*result.program)) j["actions"].push_back(a.str());
        } else {
          j["error"] = result.error->to_json();
        }
        std::cout << j.dump(2) << '\n';
      } else if (result.ok()) {
        std::cout << serialize(*result.program) << '\n';
      } else {
        std::cerr << result.error->message() << '\n';
      }
      return result.ok() ? 0 : 1;
    }

    if (*val_cmd) {
      const auto catalog = load_catalog(val_catalog);
      const auto report = classify(catalog, std::string_view(strip_markers(read_input(val_in))));
      std::cout << report.to_json().dump(2) << '\n';
      return report.clean() ? 0 : 1;
    }

    if (*ev_cmd) {
      const auto catalog = load_catalog(ev_catalog);
      const auto truths = load_truths(ev_truth);
      const auto preds = load_predictions(ev_pred);
      const auto scores = evaluate_predictions(catalog, truths, preds);
      if (!ev_out.empty()) {
        std::vector<Json> rows;
        for (const auto& s : scores) rows.push_back(s.to_json());
        write_file(ev_out, to_jsonl(rows));
      }
      const auto summary = aggregate(scores);
      std::cout << summary.to_json().dump(2) << '\n';
      if (!ev_baseline.empty()) {
        std::cout << '\n' << delta_table(summary, load_run_summary(ev_baseline).metrics).to_markdown();
      }
      return 0;
    }

    if (*cat_validate) {
      const auto catalog = load_catalog(cat_file);
      std::cout << "ok: " << catalog.size() << " function definitions\n";
      return 0;
    }
    if (*cat_show) {
      const auto catalog = load_catalog(cat_file);
      if (!cat_name.empty()) {
        const auto* def = catalog.lookup(std::string_view(cat_name));
        if (!def) {
          std::cerr << "no function named " << cat_name << '\n';
          return 1;
        }
        std::cout << render_fd(*def) << '\n';
        return 0;
      }
      bool first = true;
      for (const auto* def : catalog.definitions()) {
        std::cout << (first ? "" : "\n") << render_fd(*def) << '\n';
        first = false;
      }
      return 0;
    }

    if (*idx_build) {
      auto pool = load_examples(idx_pool);
      std::vector<std::string> texts;
      for (const auto& p : pool) texts.push_back(p.nl);
      const auto provider = make_provider(ProviderSpec::from_cli(idx_provider), texts);
      const auto index = build_index(std::move(pool), *provider);
      index.save(idx_out);
      std::cout << "indexed " << index.size() << " examples with " << index.provider_name() << '\n';
      return 0;
    }
    if (*idx_q) {
      const auto index = ShotIndex::load(idx_path);
      std::vector<std::string> texts;
      for (const auto& p : index.pairs()) texts.push_back(p.nl);
      const auto provider = make_provider(ProviderSpec::from_cli(idx_provider), texts);
      for (const auto& hit : retrieve_few_shots(index, idx_query, idx_k, *provider)) {
        Json j = hit.pair.to_json();
        j["score"] = hit.score;
        std::cout << j.dump() << '\n';
      }
      return 0;
    }

    if (*tst_cmd) {
      const auto data = load_examples(tst_dataset);
      std::vector<std::string> texts;
      for (const auto& p : data) texts.push_back(p.nl);
      const auto provider = make_provider(ProviderSpec::from_cli(tst_provider), texts);
      const auto pairs = generate_tst_pairs(data, *provider, tst_threshold, tst_budget, tst_seed);
      emit(tst_pairs_to_jsonl(pairs), tst_out);
      return 0;
    }

    if (*pr_assemble) {
      const auto config = load_experiment_config(pr_config);
      const PromptBuilder builder(config);
      const auto prompt = builder.build(pr_id, pr_query);
      if (pr_manifest) {
        std::cout << prompt.manifest_json().dump(2) << '\n';
      } else {
        std::cout << "=== system\n" << prompt.system_text << "\n=== user\n" << prompt.user_text << '\n';
        std::cerr << "token estimate: " << prompt.token_estimate << '\n';
      }
      return 0;
    }

    if (*dg_nl) {
      const auto flows = load_flows(dg_flows);
      const auto catalog = load_catalog(dg_catalog);
      const auto endpoint_cfg = EndpointConfig::from_json(Json::parse(read_file(dg_endpoint)));
      auto endpoint = make_endpoint(endpoint_cfg);
      NlGenerationOptions opts;
      opts.max_attempts = dg_attempts;
      const auto results = generate_nl_batch(flows, catalog, *endpoint, dg_concurrency, opts);
      const auto examples = to_examples(results);
      write_file(dg_out, examples_to_jsonl(examples));
      if (!dg_review.empty()) write_file(dg_review, review_csv(results));
      const auto failed = results.size() - examples.size();
      std::cout << examples.size() << " generated, " << failed << " failed\n";
      for (const auto& r : results) {
        if (!r.ok()) std::cerr << r.id << ": " << r.error << '\n';
      }
      return failed == 0 ? 0 : 1;
    }
    if (*dg_split) {
      const fs::path spec_path = dg_spec;
      auto spec = DatasetSpec::from_json(Json::parse(read_file(spec_path)));
      fs::path pairs_path = dg_pairs.empty() ? spec.source_flows : fs::path(dg_pairs);
      if (dg_pairs.empty() && pairs_path.is_relative()) pairs_path = spec_path.parent_path() / pairs_path;
      const auto pairs = load_examples(pairs_path);
      const auto split = build_splits(spec, pairs);
      const fs::path dir = dg_out_dir;
      write_file(dir / "train.jsonl", examples_to_jsonl(split.train));
      write_file(dir / "test.jsonl", examples_to_jsonl(split.test));
      write_file(dir / "manifest.json", split.manifest.dump(2) + "\n");
      std::cout << "train " << split.train.size() << ", test " << split.test.size() << '\n';
      for (const auto& w : split.manifest["warnings"]) std::cerr << "warning: " << w.get<std::string>() << '\n';
      return 0;
    }

    if (*run_cmd) {
      const auto config = load_experiment_config(run_config);
      RunOptions opts;
      if (!run_baseline.empty()) opts.baseline_summary = fs::path(run_baseline);
      const auto result = run_experiment(config, opts);
      std::cout << result.summary.to_json().dump(2) << '\n';
      if (result.delta) std::cout << '\n' << result.delta->to_markdown();
      for (const auto& w : result.summary.warnings) std::cerr << "WARNING: " << w << '\n';
      std::cerr << "outputs in " << config.run_dir().string() << '\n';
      return 0;
    }

    if (*cmp_cmd) {
      std::vector<RunSummary> runs;
      for (const auto& r : split_commas(cmp_runs)) runs.push_back(load_run_summary(r));
      const auto baseline = load_run_summary(cmp_baseline);
      const auto report = compare_runs(runs, baseline);
      emit(cmp_json ? report.json.dump(2) + "\n" : report.markdown, cmp_out);
      return 0;
    }
  } catch (const ParseException& e) {
    std::cerr << "parse error: " << e.error().message() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
