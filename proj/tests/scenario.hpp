#pragma once

// Builds throwaway experiment workspaces on the fixture corpus: a test set,
// a shot pool, the catalog and replay files, plus corruption helpers.

#include <map>
#include <string>
#include <vector>

#include "dslgen/harness.hpp"
#include "dslgen/util.hpp"
#include "test_support.hpp"

namespace testsupport {

// Appends a call to an API no catalog knows.
inline std::string with_fake_api(const std::string& dsl) {
  return dsl + "\nfabricated = shared_fabricated.DoesNotExist({});";
}

// Adds one unknown key to the first call's argument.
inline std::string with_fake_param(const std::string& dsl) {
  auto program = dslgen::parse(dsl);
  auto& first = std::get<dslgen::Assignment>(program.statements.front().node);
  first.call.argument["inventedKey"] = "x";
  return dslgen::serialize(program);
}

// Cuts the closing ");" so the flow no longer parses.
inline std::string with_broken_syntax(const std::string& dsl) {
  const auto end = dsl.rfind(");");
  return dsl.substr(0, end);
}

inline std::string wrap(const std::string& dsl) { return "<START>" + dsl + "<END>"; }

struct Scenario {
  TempDir dir;
  std::vector<dslgen::ExamplePair> examples;
  std::filesystem::path testset, pool, catalog;

  explicit Scenario(std::size_t n, const std::string& tag = "scenario") : dir(tag) {
    auto all = dslgen::load_examples(data("examples.jsonl"));
    examples.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
    testset = dir / "test.jsonl";
    pool = dir / "pool.jsonl";
    catalog = data("catalog.json");
    dslgen::write_file(testset, dslgen::examples_to_jsonl(examples));
    dslgen::write_file(pool, dslgen::examples_to_jsonl(all));
  }

  // Echo responses for every example, with per-id overrides.
  std::map<std::string, std::string> responses(const std::map<std::string, std::string>& overrides = {}) const {
    std::map<std::string, std::string> out;
    for (const auto& e : examples) out[e.id] = wrap(e.dsl);
    for (const auto& [id, text] : overrides) out[id] = text;
    return out;
  }

  std::filesystem::path write_replay(const std::string& name, const std::map<std::string, std::string>& responses,
                                     const std::map<std::string, std::string>& errors = {}) const {
    std::vector<dslgen::Json> rows;
    for (const auto& [id, text] : responses) {
      if (!errors.count(id)) rows.push_back({{"id", id}, {"response", text}});
    }
    for (const auto& [id, err] : errors) rows.push_back({{"id", id}, {"error", err}});
    const auto p = dir / (name + ".jsonl");
    dslgen::write_file(p, dslgen::to_jsonl(rows));
    return p;
  }

  dslgen::ExperimentConfig config(const std::string& name, const std::filesystem::path& replay) const {
    dslgen::ExperimentConfig c;
    c.name = name;
    c.grounding.n_shots = 5;
    c.grounding.use_fd = true;
    c.retrieval.pool_path = pool;
    c.endpoint.kind = "replay";
    c.endpoint.replay_path = replay;
    c.endpoint.model_id = "replay";
    c.testset = testset;
    c.catalog = catalog;
    c.output_dir = dir / "runs";
    c.concurrency = 4;
    c.seed = 1;
    return c;
  }
};

}  // namespace testsupport
