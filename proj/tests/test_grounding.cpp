#include <gtest/gtest.h>

#include <set>

#include "dslgen/errors.hpp"
#include "dslgen/grounding.hpp"
#include "dslgen/util.hpp"
#include "test_support.hpp"

using namespace dslgen;

namespace {

struct Fixture {
  Catalog catalog = load_catalog(testsupport::data("catalog.json"));
  std::vector<ExamplePair> pool = load_examples(testsupport::data("examples.jsonl"));
  HashingEmbeddingProvider provider{256};
  ShotIndex index = build_index(pool, provider);
  FdIndex fd_index = build_fd_index(catalog, provider);
};

Fixture& fx() {
  static Fixture f;
  return f;
}

std::size_t count_of(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

AssembledPrompt assemble_for(const GroundingConfig& cfg, const std::string& query) {
  auto& f = fx();
  std::vector<ScoredExample> shots;
  if (cfg.n_shots > 0) shots = retrieve_few_shots(f.index, query, cfg.n_shots, f.provider);
  std::vector<ExamplePair> shot_pairs;
  for (const auto& s : shots) shot_pairs.push_back(s.pair);
  const auto regular = extract_fds_for_shots(shot_pairs, f.catalog).definitions;
  const auto semantic = retrieve_semantic_fds(f.fd_index, query, cfg.sfd_k, f.provider);
  return assemble_metaprompt(cfg, PromptTemplate::resolve(cfg.instruction_template), shots, regular, semantic, query);
}

}  // namespace

TEST(Template, BuiltinsResolveAndRender) {
  const auto t = PromptTemplate::resolve("default-v1");
  EXPECT_NO_THROW(t.require({"fds", "shots", "query"}));
  EXPECT_EQ(t.content_hash().size(), 64u);
  EXPECT_NO_THROW(PromptTemplate::resolve("nl-description-v1").require({"fds", "flow"}));
  EXPECT_THROW(PromptTemplate::resolve("no-such-template"), ConfigError);
  EXPECT_THROW(t.require({"flow"}), ConfigError);
}

TEST(Template, SectionsAndPlaceholders) {
  const auto t = PromptTemplate::from_text("t", "A\n{{#x}}\nX: {{x}}\n{{/x}}\nB {{y}} {{unknown}}");
  EXPECT_EQ(t.render({{"x", "1"}, {"y", "{{x}}"}}), "A\nX: 1\nB {{x}} {{unknown}}");
  EXPECT_EQ(t.render({{"x", ""}, {"y", "2"}}), "A\nB 2 {{unknown}}");
}

TEST(Template, FileTemplate) {
  testsupport::TempDir tmp("tmpl");
  write_file(tmp / "mine.txt", "Rules.\n{{shots}}\nQ: {{query}}\n");
  const auto t = PromptTemplate::resolve((tmp / "mine.txt").string());
  EXPECT_EQ(t.text, "Rules.\n{{shots}}\nQ: {{query}}\n");
}

TEST(Grounding, ExtractFdsDeduplicatesInFirstOccurrenceOrder) {
  std::vector<ExamplePair> shots = {
      ExamplePair::make("1", "", R"(t = await shared_recurrence.Recurrence({}); a = shared_slack.PostMessage({}); b = made.Up({});)"),
      ExamplePair::make("2", "", R"(t = await shared_recurrence.Recurrence({}); c = shared_todo.CreateToDoV2({});)"),
  };
  const auto sel = extract_fds_for_shots(shots, fx().catalog);
  ASSERT_EQ(sel.definitions.size(), 3u);
  EXPECT_EQ(sel.definitions[0]->function_name.str(), "shared_recurrence.Recurrence");
  EXPECT_EQ(sel.definitions[1]->function_name.str(), "shared_slack.PostMessage");
  EXPECT_EQ(sel.definitions[2]->function_name.str(), "shared_todo.CreateToDoV2");
  ASSERT_EQ(sel.missing.size(), 1u);
  EXPECT_EQ(sel.missing[0].str(), "made.Up");
}

TEST(Grounding, SemanticFdsRankAndCheckProvider) {
  auto& f = fx();
  const auto hits = retrieve_semantic_fds(f.fd_index, "translate text into a target language", 3, f.provider);
  ASSERT_EQ(hits.size(), 3u);
  EXPECT_EQ(hits[0].definition->function_name.str(), "shared_translator.Translate");
  EXPECT_GE(hits[0].score, hits[1].score);
  HashingEmbeddingProvider other(64);
  EXPECT_THROW(retrieve_semantic_fds(f.fd_index, "x", 3, other), ProviderMismatch);
  EXPECT_THROW(build_fd_index(Catalog{}, f.provider), EmptyCatalog);
}

TEST(Grounding, LayoutShotsMostSimilarLastAndQueryInUserMessage) {
  GroundingConfig cfg;
  cfg.n_shots = 3;
  cfg.use_fd = true;
  const std::string query = "send me a push notification when a new file shows up in OneDrive";
  const auto p = assemble_for(cfg, query);
  ASSERT_EQ(p.shots.size(), 3u);
  const auto ranked = retrieve_few_shots(fx().index, query, 3, fx().provider);
  EXPECT_EQ(p.shots.back().first, ranked.front().pair.nl);
  EXPECT_EQ(p.shots.front().first, ranked.back().pair.nl);
  EXPECT_NE(p.user_text.find(query), std::string::npos);
  EXPECT_EQ(p.system_text.find(query), std::string::npos);
  // Order inside the prompt: definitions, then shots, then the query.
  const auto text = p.text();
  const auto fd_pos = text.find("Function: ");
  const auto shot_pos = text.find(render_shot(p.shots.front().first, p.shots.front().second));
  ASSERT_NE(fd_pos, std::string::npos);
  ASSERT_NE(shot_pos, std::string::npos);
  EXPECT_LT(fd_pos, shot_pos);
  EXPECT_LT(shot_pos, text.rfind(query));
  const auto req = p.to_chat_request("q1");
  ASSERT_EQ(req.messages.size(), 2u);
  EXPECT_EQ(req.messages[0].role, "system");
  EXPECT_EQ(req.id, "q1");
}

TEST(Grounding, WithoutFdProducesNoDefinitions) {
  GroundingConfig cfg;
  cfg.n_shots = 5;
  const auto p = assemble_for(cfg, "post a message in teams when a form is submitted");
  EXPECT_TRUE(p.fd_blocks.empty());
  EXPECT_EQ(p.text().find("Function: "), std::string::npos);
  EXPECT_EQ(p.text().find("## Function definitions"), std::string::npos);
}

TEST(Grounding, SemanticDuplicatesOfRegularAreDropped) {
  GroundingConfig cfg;
  cfg.n_shots = 5;
  cfg.use_fd = true;
  cfg.use_sfd = true;
  cfg.sfd_k = 10;
  const auto p = assemble_for(cfg, "post a message in the teams channel when a form is submitted");
  std::set<std::string> names(p.fd_names.begin(), p.fd_names.end());
  EXPECT_EQ(names.size(), p.fd_names.size());
  bool saw_duplicate = false;
  for (const auto& m : p.manifest) saw_duplicate |= m.reason == "duplicate";
  EXPECT_TRUE(saw_duplicate);
}

TEST(Grounding, DropOrderUnderPressure) {
  GroundingConfig cfg;
  cfg.n_shots = 5;
  cfg.use_fd = true;
  cfg.use_sfd = true;
  cfg.sfd_k = 5;
  const std::string query = "create a planner task when a new email arrives";
  cfg.token_budget = 1000000;
  const auto full = assemble_for(cfg, query);
  ASSERT_FALSE(full.fd_blocks.empty());
  std::size_t n_sfd = 0;
  for (const auto& m : full.manifest) n_sfd += m.kind == "sfd" && m.status == "included";
  ASSERT_GT(n_sfd, 0u);

  // Shrink the budget one token at a time: semantic blocks go first, then
  // regular ones, and shots last.
  std::size_t prev_shots = full.shots.size(), prev_fds = full.fd_blocks.size();
  bool shots_dropped = false;
  for (std::size_t budget = full.token_estimate; budget > 0; budget -= std::max<std::size_t>(budget / 50, 1)) {
    cfg.token_budget = budget;
    AssembledPrompt p;
    try {
      p = assemble_for(cfg, query);
    } catch (const BudgetImpossible&) {
      break;
    }
    EXPECT_LE(p.token_estimate, budget);
    EXPECT_LE(p.shots.size(), prev_shots);
    EXPECT_LE(p.fd_blocks.size(), prev_fds);
    if (p.shots.size() < full.shots.size()) {
      shots_dropped = true;
      EXPECT_TRUE(p.fd_blocks.empty());
    }
    bool any_sfd = false;
    for (const auto& m : p.manifest) any_sfd |= m.kind == "sfd" && m.status == "included";
    if (p.fd_blocks.size() < full.fd_blocks.size()) {
      // Regular definitions stay until every semantic one is gone.
      bool regular_dropped = false;
      for (const auto& m : p.manifest) regular_dropped |= m.kind == "fd" && m.reason == "budget";
      if (regular_dropped) EXPECT_FALSE(any_sfd);
    }
    // The shots that remain are always the most similar ones.
    for (std::size_t i = 0; i < p.shots.size(); ++i) {
      EXPECT_EQ(p.shots[p.shots.size() - 1 - i], full.shots[full.shots.size() - 1 - i]);
    }
    prev_shots = p.shots.size();
    prev_fds = p.fd_blocks.size();
  }
  EXPECT_TRUE(shots_dropped);
}

TEST(Grounding, BudgetImpossible) {
  GroundingConfig cfg;
  cfg.token_budget = 10;
  EXPECT_THROW(assemble_for(cfg, "anything"), BudgetImpossible);
}

TEST(Grounding, RandomConfigurationsRespectBudget) {
  SeededRng rng(77);
  const auto queries = fx().pool;
  for (int i = 0; i < 100; ++i) {
    GroundingConfig cfg;
    cfg.n_shots = rng.below(21);
    cfg.use_fd = rng.below(2) == 1;
    cfg.use_sfd = rng.below(2) == 1;
    cfg.sfd_k = 1 + rng.below(10);
    cfg.token_budget = 250 + rng.below(3000);
    const auto& q = queries[rng.below(queries.size())].nl;
    AssembledPrompt p;
    try {
      p = assemble_for(cfg, q);
    } catch (const BudgetImpossible&) {
      continue;
    }
    SCOPED_TRACE(cfg.to_json().dump());
    EXPECT_LE(p.token_estimate, cfg.token_budget);
    EXPECT_EQ(p.token_estimate, CharHeuristicTokenizer{}.count(p.text()));
    std::set<std::string> names(p.fd_names.begin(), p.fd_names.end());
    EXPECT_EQ(names.size(), p.fd_names.size());
    for (const auto& n : p.fd_names) EXPECT_EQ(count_of(p.text(), "Function: " + n + "\n"), 1u);
    if (!cfg.use_fd && !cfg.use_sfd) EXPECT_TRUE(p.fd_blocks.empty());
    EXPECT_LE(p.shots.size(), cfg.n_shots);
  }
}

TEST(Grounding, ConfigJson) {
  GroundingConfig cfg;
  cfg.use_sfd = true;
  cfg.sfd_k = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.sfd_k = 3;
  const auto again = GroundingConfig::from_json(cfg.to_json());
  EXPECT_EQ(again.to_json(), cfg.to_json());
}
