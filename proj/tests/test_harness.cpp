#include <gtest/gtest.h>

#include "dslgen/errors.hpp"
#include "dslgen/harness.hpp"
#include "dslgen/util.hpp"
#include "scenario.hpp"
#include "test_support.hpp"

using namespace dslgen;
using testsupport::Scenario;

TEST(Harness, EchoRunIsPerfect) {
  Scenario s(10, "echo");
  const auto cfg = s.config("echo", s.write_replay("echo", s.responses()));
  const auto r = run_experiment(cfg);
  const auto& m = r.summary.metrics;
  EXPECT_EQ(m.n_total, 10u);
  EXPECT_DOUBLE_EQ(m.avg_similarity, 1.0);
  EXPECT_EQ(m.pct_unparsed, 0.0);
  EXPECT_EQ(m.pct_made_up_apis, 0.0);
  EXPECT_EQ(m.pct_made_up_params, 0.0);
  EXPECT_TRUE(r.summary.warnings.empty());
  ASSERT_EQ(r.scores.size(), 10u);
  EXPECT_EQ(r.scores.front().example_id, "ex000");

  const auto dir = cfg.run_dir();
  for (const char* f : {"config.json", "scores.jsonl", "summary.json", "delta.md", "calls.jsonl", "prompts.jsonl",
                        "stats.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  EXPECT_EQ(load_run_summary(dir).metrics, m);
  EXPECT_NE(read_file(dir / "delta.md").find("No baseline given."), std::string::npos);
  EXPECT_EQ(read_jsonl(dir / "calls.jsonl").size(), 10u);

  // The example's own pair never comes back as a shot.
  for (const auto& row : read_jsonl(dir / "prompts.jsonl")) {
    for (const auto& e : row["entries"]) {
      if (e["kind"] == "shot") EXPECT_NE(e["id"], row["id"]);
    }
  }
}

TEST(Harness, TwoCorruptedOfTenIsTwentyPercentUnparsed) {
  Scenario s(10, "corrupt");
  const auto& ex = s.examples;
  const auto cfg = s.config("corrupt", s.write_replay("corrupt", s.responses({
      {ex[3].id, testsupport::wrap(testsupport::with_broken_syntax(ex[3].dsl))},
      {ex[7].id, "I cannot help with that."},
  })));
  const auto m = run_experiment(cfg, {.write_outputs = false}).summary.metrics;
  EXPECT_EQ(m.n_unparsed, 2u);
  EXPECT_DOUBLE_EQ(m.pct_unparsed, 20.0);
  EXPECT_DOUBLE_EQ(m.avg_similarity, 0.8);
  EXPECT_EQ(m.pct_made_up_apis, 0.0);
}

TEST(Harness, GenerationFailuresAreIsolated) {
  Scenario s(10, "isolate");
  const auto cfg = s.config("isolate", s.write_replay("isolate", s.responses(), {{s.examples[2].id, "HTTP 503"}}));
  const auto r = run_experiment(cfg, {.write_outputs = false});
  ASSERT_EQ(r.scores.size(), 10u);
  EXPECT_TRUE(r.scores[2].generation_failed);
  const auto& m = r.summary.metrics;
  EXPECT_EQ(m.n_generation_failed, 1u);
  EXPECT_EQ(m.n_total, 9u);
  EXPECT_DOUBLE_EQ(m.pct_unparsed, 0.0);
  EXPECT_DOUBLE_EQ(m.avg_similarity, 0.9);
  ASSERT_EQ(r.summary.warnings.size(), 1u);

  // A throwing endpoint for everything still completes the run.
  ReplayEndpoint none(std::map<std::string, std::string>{});
  const auto all_failed = run_experiment(cfg, {.endpoint = &none, .write_outputs = false});
  EXPECT_EQ(all_failed.summary.metrics.n_generation_failed, 10u);
  EXPECT_EQ(all_failed.summary.warnings.size(), 2u);
}

TEST(Harness, DeterministicUnderReplay) {
  Scenario s(20, "determinism");
  const auto replay = s.write_replay("r", s.responses({{s.examples[1].id, testsupport::wrap(testsupport::with_fake_api(s.examples[1].dsl))}}));
  auto a_cfg = s.config("a", replay);
  auto b_cfg = s.config("b", replay);
  a_cfg.concurrency = 1;
  b_cfg.concurrency = 8;
  const auto a = run_experiment(a_cfg);
  const auto b = run_experiment(b_cfg);
  EXPECT_EQ(a.summary.metrics, b.summary.metrics);
  EXPECT_EQ(read_file(a_cfg.run_dir() / "scores.jsonl"), read_file(b_cfg.run_dir() / "scores.jsonl"));
  EXPECT_EQ(read_file(a_cfg.run_dir() / "prompts.jsonl"), read_file(b_cfg.run_dir() / "prompts.jsonl"));
  EXPECT_EQ(read_file(a_cfg.run_dir() / "calls.jsonl"), read_file(b_cfg.run_dir() / "calls.jsonl"));
  // Re-running into the same directory reproduces the summary byte for byte.
  const auto before = read_file(a_cfg.run_dir() / "summary.json");
  run_experiment(a_cfg);
  EXPECT_EQ(read_file(a_cfg.run_dir() / "summary.json"), before);
}

TEST(Harness, ConfigHashTracksSemanticFields) {
  Scenario s(5, "hash");
  const auto base = s.config("h", s.write_replay("r", s.responses()));
  const auto h = base.hash();

  auto same = base;
  same.concurrency = 16;
  same.output_dir = "elsewhere";
  same.endpoint.max_retries = 9;
  same.endpoint.timeout_s = 1;
  EXPECT_EQ(same.hash(), h);

  std::vector<std::function<void(ExperimentConfig&)>> edits = {
      [](auto& c) { c.grounding.n_shots = 20; },
      [](auto& c) { c.grounding.use_fd = false; },
      [](auto& c) { c.grounding.use_sfd = true; },
      [](auto& c) { c.grounding.sfd_k = 7; },
      [](auto& c) { c.grounding.token_budget = 999; },
      [](auto& c) { c.retrieval.provider.dimension = 512; },
      [](auto& c) { c.retrieval.provider.idf = true; },
      [](auto& c) { c.endpoint.model_id = "other"; },
      [](auto& c) { c.endpoint.temperature = 0.5; },
      [](auto& c) { c.seed = 2; },
      [](auto& c) { c.testset = "other.jsonl"; },
  };
  for (std::size_t i = 0; i < edits.size(); ++i) {
    auto c = base;
    edits[i](c);
    EXPECT_NE(c.hash(), h) << "edit " << i;
  }

  // A different config cannot reuse a run directory.
  run_experiment(base);
  auto changed = base;
  changed.grounding.n_shots = 3;
  EXPECT_THROW(run_experiment(changed), ConfigError);
}

TEST(Harness, ConfigFileResolvesRelativePaths) {
  Scenario s(5, "cfgfile");
  const auto replay = s.write_replay("r", s.responses());
  auto j = s.config("fromfile", replay).to_json();
  j["testset"] = "test.jsonl";
  j["retrieval"]["pool_path"] = "pool.jsonl";
  j["endpoint"]["replay_path"] = "r.jsonl";
  j["output_dir"] = "runs";
  write_file(s.dir / "exp.json", j.dump(2));
  const auto cfg = load_experiment_config(s.dir / "exp.json");
  EXPECT_EQ(cfg.testset, s.dir.path() / "test.jsonl");
  EXPECT_EQ(cfg.endpoint.replay_path, s.dir.path() / "r.jsonl");
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_DOUBLE_EQ(run_experiment(cfg).summary.metrics.avg_similarity, 1.0);

  auto bad = cfg;
  bad.catalog = s.dir / "missing.json";
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.name = "../escape";
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Harness, TwoArmsAgainstBaselineHaveCorrectDeltaSigns) {
  Scenario s(10, "arms");
  const auto& ex = s.examples;
  auto broken = [&](std::size_t i) { return testsupport::wrap(testsupport::with_broken_syntax(ex[i].dsl)); };
  // Baseline: 3 unparsed. Arm A (5 shots): 4 unparsed. Arm B (20 shots): 1 unparsed.
  auto base_cfg = s.config("baseline", s.write_replay("base", s.responses({{ex[0].id, broken(0)}, {ex[1].id, broken(1)}, {ex[2].id, broken(2)}})));
  auto a_cfg = s.config("shots5", s.write_replay("a", s.responses({{ex[0].id, broken(0)}, {ex[1].id, broken(1)}, {ex[2].id, broken(2)}, {ex[3].id, broken(3)}})));
  auto b_cfg = s.config("shots20", s.write_replay("b", s.responses({{ex[0].id, broken(0)}})));
  a_cfg.grounding.n_shots = 5;
  b_cfg.grounding.n_shots = 20;
  const auto base = run_experiment(base_cfg);

  const auto a = run_experiment(a_cfg, {.baseline_summary = base_cfg.run_dir() / "summary.json"});
  const auto b = run_experiment(b_cfg, {.baseline_summary = base_cfg.run_dir()});
  ASSERT_TRUE(a.delta && b.delta);
  EXPECT_LT(*a.delta->row("avg_similarity").delta, 0.0);
  EXPECT_GT(*a.delta->row("pct_unparsed").delta, 0.0);
  EXPECT_GT(*b.delta->row("avg_similarity").delta, 0.0);
  EXPECT_LT(*b.delta->row("pct_unparsed").delta, 0.0);
  EXPECT_DOUBLE_EQ(*a.delta->row("pct_unparsed").delta, 10.0);
  EXPECT_DOUBLE_EQ(*b.delta->row("pct_unparsed").delta, -20.0);
  EXPECT_NE(read_file(a_cfg.run_dir() / "delta.md").find("| Avg. Similarity"), std::string::npos);
}

TEST(Compare, TableShapeBestMarksAndMismatch) {
  auto summary = [](std::string name, double avg, double unparsed, double apis, double params) {
    RunSummary s;
    s.name = std::move(name);
    s.testset_hash = "t";
    s.metrics.n_total = 100;
    s.metrics.avg_similarity = avg;
    s.metrics.pct_unparsed = unparsed;
    s.metrics.pct_made_up_apis = apis;
    s.metrics.pct_made_up_params = params;
    return s;
  };
  const auto base = summary("Baseline", 0.5, 10, 10, 10);
  const std::vector<RunSummary> runs = {summary("A", 0.6, 8, 12, 10), summary("B", 0.6, 9, 5, 10),
                                        summary("C", 0.4, 12, 5, 11)};
  const auto report = compare_runs(runs, base);
  const auto& md = report.markdown;
  EXPECT_EQ(md.substr(0, md.find('\n')),
            "| Model | Avg. Similarity | %Unparsed flows | %made-up API names | %made-up API parameters |");
  EXPECT_NE(md.find("| A | **+0.1** | **-2** | +2 | **0** |"), std::string::npos) << md;
  EXPECT_NE(md.find("| B | **+0.1** | -1 | **-5** | **0** |"), std::string::npos) << md;
  EXPECT_NE(md.find("| C | -0.1 | +2 | **-5** | +1 |"), std::string::npos) << md;
  EXPECT_NE(md.find("Deltas against Baseline."), std::string::npos);
  EXPECT_EQ(report.json["rows"].size(), 3u);

  const auto self = compare_runs(std::vector<RunSummary>{base}, base);
  EXPECT_NE(self.markdown.find("| Baseline | **0** | **0** | **0** | **0** |"), std::string::npos) << self.markdown;

  auto other = runs[0];
  other.testset_hash = "u";
  EXPECT_THROW(compare_runs(std::vector<RunSummary>{other}, base), TestsetMismatch);
  EXPECT_THROW(compare_runs(std::vector<RunSummary>{}, base), EmptyInput);
}

TEST(Harness, BaselineOnOtherTestsetIsRejected) {
  Scenario s(5, "mismatch");
  const auto cfg = s.config("a", s.write_replay("r", s.responses()));
  RunSummary foreign;
  foreign.name = "foreign";
  foreign.testset_hash = "deadbeef";
  foreign.metrics.n_total = 5;
  write_file(s.dir / "foreign.json", foreign.to_json().dump());
  EXPECT_THROW(run_experiment(cfg, {.baseline_summary = s.dir / "foreign.json", .write_outputs = false}),
               TestsetMismatch);
}

TEST(Harness, PromptBuilderSkipsSelf) {
  Scenario s(5, "builder");
  auto cfg = s.config("p", s.write_replay("r", s.responses()));
  cfg.grounding.n_shots = 3;
  const PromptBuilder builder(cfg);
  const auto& ex = s.examples[0];
  const auto p = builder.build(ex.id, ex.nl);
  ASSERT_EQ(p.shots.size(), 3u);
  for (const auto& shot : p.shots) EXPECT_NE(shot.first, ex.nl);
  const auto other = builder.build("not-in-pool", ex.nl);
  EXPECT_EQ(other.shots.back().first, ex.nl);
}
