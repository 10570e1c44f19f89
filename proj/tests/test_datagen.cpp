#include <gtest/gtest.h>

#include <deque>
#include <mutex>
#include <set>

#include "dslgen/datagen.hpp"
#include "dslgen/errors.hpp"
#include "dslgen/util.hpp"
#include "test_support.hpp"

using namespace dslgen;

namespace {

const std::string kA1Query = "Post a message in the channel of teams, when a new form is created in the forms";

// Hands out scripted replies in order and keeps every request it saw.
class ScriptedEndpoint : public GenerationEndpoint {
 public:
  explicit ScriptedEndpoint(std::deque<std::string> replies) : replies_(std::move(replies)) {}
  std::string complete(const ChatRequest& request) override {
    std::lock_guard lock(mu_);
    seen.push_back(request);
    if (replies_.empty()) throw ContentEmpty("script exhausted");
    auto r = replies_.front();
    replies_.pop_front();
    if (r.empty()) throw ContentEmpty("empty");
    return r;
  }
  std::vector<ChatRequest> seen;

 private:
  std::mutex mu_;
  std::deque<std::string> replies_;
};

Catalog catalog() { return load_catalog(testsupport::data("catalog.json")); }

std::vector<ExamplePair> single_api_pool(const std::vector<std::size_t>& sizes) {
  std::vector<ExamplePair> out;
  std::size_t id = 0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    for (std::size_t i = 0; i < sizes[k]; ++i, ++id) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "f%05zu", id);
      out.push_back(ExamplePair::make(buf, "q" + std::to_string(id),
                                      "a = shared_k" + std::to_string(k) + ".Do({\"n\": " + std::to_string(i) + "});"));
    }
  }
  return out;
}

std::set<std::string> ids(const std::vector<ExamplePair>& v) {
  std::set<std::string> s;
  for (const auto& p : v) s.insert(p.id);
  return s;
}

}  // namespace

TEST(Datagen, WorkedExampleReplayGivesKnownQuery) {
  const auto truth = read_file(testsupport::data("a1_truth.dsl"));
  ReplayEndpoint replay(std::map<std::string, std::string>{{"ex000", "  " + kA1Query + "\n"}});
  const auto c = catalog();
  EXPECT_EQ(generate_nl_for_flow("ex000", truth, c, replay), kA1Query);

  // The request carries both definitions and the flow.
  ScriptedEndpoint scripted({kA1Query});
  generate_nl_for_flow("ex000", truth, c, scripted);
  ASSERT_EQ(scripted.seen.size(), 1u);
  ASSERT_EQ(scripted.seen[0].messages.size(), 1u);
  const auto& prompt = scripted.seen[0].messages[0].content;
  EXPECT_NE(prompt.find("Function: shared_microsoftforms.CreateFormWebhook"), std::string::npos);
  EXPECT_NE(prompt.find("Function: shared_teams.PostMessageToConversation"), std::string::npos);
  EXPECT_NE(prompt.find(serialize(parse(truth))), std::string::npos);
  EXPECT_EQ(scripted.seen[0].id, "ex000");
}

TEST(Datagen, UnknownApiIsUnresolved) {
  ScriptedEndpoint ep({"x"});
  EXPECT_THROW(generate_nl_for_flow("f", "a = shared_nope.Missing({});", catalog(), ep), UnresolvedApi);
  EXPECT_TRUE(ep.seen.empty());
  EXPECT_THROW(generate_nl_for_flow("f", "a = (", catalog(), ep), ParseException);
}

TEST(Datagen, RejectsAfterRetryCap) {
  const std::string flow = "a = shared_slack.PostMessage({});";
  ScriptedEndpoint empty({"", "", ""});
  EXPECT_THROW(generate_nl_for_flow("f", flow, catalog(), empty), GenerationRejected);
  EXPECT_EQ(empty.seen.size(), 3u);

  // DSL-looking outputs are retried; the third is clean.
  ScriptedEndpoint leaky({"call shared_slack.PostMessage now", "x = y({})", "post to slack"});
  EXPECT_EQ(generate_nl_for_flow("f", flow, catalog(), leaky), "post to slack");
  EXPECT_EQ(leaky.seen.size(), 3u);
}

TEST(Datagen, RejectReason) {
  const auto c = catalog();
  EXPECT_TRUE(reject_reason(" \n", c).has_value());
  EXPECT_TRUE(reject_reason("a({b", c).has_value());
  EXPECT_TRUE(reject_reason("use shared_teams.PostMessageToConversation", c).has_value());
  EXPECT_FALSE(reject_reason("post in teams", c).has_value());
}

TEST(Datagen, BatchIsolatesFailuresAndOrdersById) {
  std::vector<FlowRecord> flows = {
      {"c", "a = shared_slack.PostMessage({});"},
      {"a", "a = shared_nope.Missing({});"},
      {"b", "a = ("},
      {"d", "a = shared_todo.CreateToDoV2({});"},
  };
  ReplayEndpoint replay(std::map<std::string, std::string>{{"c", "tell slack"}, {"d", "make a todo"}});
  const auto results = generate_nl_batch(flows, catalog(), replay, 3);
  ASSERT_EQ(results.size(), 4u);
  EXPECT_EQ(results[0].id, "a");
  EXPECT_FALSE(results[0].ok());
  EXPECT_FALSE(results[1].ok());
  EXPECT_EQ(results[2].nl, "tell slack");
  EXPECT_EQ(results[3].nl, "make a todo");
  const auto examples = to_examples(results);
  ASSERT_EQ(examples.size(), 2u);
  EXPECT_EQ(examples[0].id, "c");
  const auto csv = review_csv(results);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "id,status,nl,dsl,error");
  EXPECT_NE(csv.find("c,generated,tell slack,"), std::string::npos);
}

TEST(Splits, EightyTwentyDisjointAndDeterministic) {
  const auto pool = single_api_pool({30, 25, 20, 15, 10});
  DatasetSpec spec;
  spec.target_count = 100;
  spec.train_fraction = 0.8;
  spec.test_fraction = 0.2;
  spec.seed = 7;
  const auto a = build_splits(spec, pool);
  EXPECT_EQ(a.train.size(), 80u);
  EXPECT_EQ(a.test.size(), 20u);
  const auto tr = ids(a.train), te = ids(a.test);
  for (const auto& id : te) EXPECT_EQ(tr.count(id), 0u);
  EXPECT_EQ(tr.size() + te.size(), 100u);
  EXPECT_TRUE(std::is_sorted(a.test.begin(), a.test.end(), [](auto& x, auto& y) { return x.id < y.id; }));

  const auto b = build_splits(spec, pool);
  EXPECT_EQ(examples_to_jsonl(a.train), examples_to_jsonl(b.train));
  EXPECT_EQ(examples_to_jsonl(a.test), examples_to_jsonl(b.test));
  EXPECT_EQ(a.manifest.dump(), b.manifest.dump());
  EXPECT_EQ(a.manifest["seed"], 7);
  EXPECT_EQ(a.manifest["train_count"], 80);
  EXPECT_EQ(a.manifest["test_count"], 20);

  // Usage-weighted: the test split keeps the pool's 30:25:20:15:10 mix.
  const auto& hist = a.manifest["test_api_histogram"];
  EXPECT_EQ(hist["shared_k0.Do"], 6);
  EXPECT_EQ(hist["shared_k1.Do"], 5);
  EXPECT_EQ(hist["shared_k2.Do"], 4);
  EXPECT_EQ(hist["shared_k3.Do"], 3);
  EXPECT_EQ(hist["shared_k4.Do"], 2);

  spec.seed = 8;
  const auto c = build_splits(spec, pool);
  EXPECT_NE(examples_to_jsonl(a.test), examples_to_jsonl(c.test));
}

TEST(Splits, SubsampleIsDisjointAndCoversSample) {
  const auto pool = single_api_pool({40, 30, 20, 10, 3});
  DatasetSpec spec;
  spec.target_count = 57;
  spec.train_fraction = 0.7;
  spec.test_fraction = 0.3;
  spec.seed = 1;
  const auto s = build_splits(spec, pool);
  EXPECT_EQ(s.train.size() + s.test.size(), 57u);
  EXPECT_EQ(s.test.size(), 17u);
  std::size_t sampled = 0;
  for (const auto& [name, st] : s.manifest["strata"].items()) sampled += st["sampled"].get<std::size_t>();
  EXPECT_EQ(sampled, 57u);
  const auto tr = ids(s.train), te = ids(s.test);
  for (const auto& id : te) EXPECT_EQ(tr.count(id), 0u);
}

TEST(Splits, UniformTestHistogramWithinOne) {
  std::vector<std::size_t> sizes;
  for (std::size_t k = 0; k < 10; ++k) sizes.push_back(60 + 10 * k);
  const auto pool = single_api_pool(sizes);
  for (auto [target, test_fraction] : {std::pair{500ul, 0.2}, std::pair{137ul, 0.3}, std::pair{100ul, 1.0}}) {
    DatasetSpec spec;
    spec.target_count = target;
    spec.test_fraction = test_fraction;
    spec.train_fraction = 1.0 - test_fraction;
    spec.seed = 3;
    spec.distribution_mode = DistributionMode::uniform;
    const auto s = build_splits(spec, pool);
    const double expect = static_cast<double>(s.test.size()) / 10.0;
    const auto& hist = s.manifest["test_api_histogram"];
    for (std::size_t k = 0; k < 10; ++k) {
      const auto key = "shared_k" + std::to_string(k) + ".Do";
      const double got = hist.contains(key) ? hist[key].get<double>() : 0.0;
      EXPECT_LE(std::abs(got - expect), 1.0) << key << " target " << target;
    }
  }
}

TEST(Splits, UniformCapsSmallStrata) {
  const auto pool = single_api_pool({50, 50, 2});
  DatasetSpec spec;
  spec.target_count = 30;
  spec.distribution_mode = DistributionMode::uniform;
  const auto s = build_splits(spec, pool);
  EXPECT_EQ(s.manifest["strata"]["shared_k2.Do"]["sampled"], 2);
  EXPECT_EQ(s.manifest["strata"]["shared_k0.Do"]["sampled"], 14);
  EXPECT_EQ(s.manifest["warnings"].size(), 1u);
}

TEST(Splits, AllTrainWarns) {
  const auto pool = single_api_pool({10, 10});
  DatasetSpec spec;
  spec.target_count = 0;
  spec.train_fraction = 1.0;
  spec.test_fraction = 0.0;
  const auto s = build_splits(spec, pool);
  EXPECT_TRUE(s.test.empty());
  EXPECT_EQ(s.train.size(), 20u);
  ASSERT_EQ(s.manifest["warnings"].size(), 1u);
  EXPECT_EQ(s.manifest["warnings"][0], "test split is empty");
}

TEST(Splits, Errors) {
  const auto pool = single_api_pool({5});
  DatasetSpec spec;
  spec.target_count = 6;
  EXPECT_THROW(build_splits(spec, pool), InsufficientData);
  spec.target_count = 5;
  EXPECT_THROW(build_splits(spec, std::vector<ExamplePair>{}), EmptyInput);
  spec.train_fraction = 0.5;
  EXPECT_THROW(build_splits(spec, pool), ConfigError);
  spec.train_fraction = 0.9;
  auto dup = pool;
  dup.push_back(pool[0]);
  EXPECT_THROW(build_splits(spec, dup), InvalidExample);
}

TEST(Splits, NoActionFlowsShareAStratum) {
  auto pool = single_api_pool({4});
  pool.push_back(ExamplePair::make("z1", "nothing", "if (x) { }"));
  pool.push_back(ExamplePair::make("z2", "nothing", "if (y) { }"));
  DatasetSpec spec;
  spec.target_count = 0;
  const auto s = build_splits(spec, pool);
  EXPECT_EQ(s.manifest["strata"][kNoActionStratum]["pool"], 2);
}

TEST(DatasetSpec, Json) {
  DatasetSpec spec;
  spec.source_flows = "flows.jsonl";
  spec.seed = 11;
  spec.distribution_mode = DistributionMode::uniform;
  const auto j = spec.to_json();
  EXPECT_EQ(j["split"]["train_fraction"], 0.9);
  EXPECT_EQ(j["distribution_mode"], "uniform");
  EXPECT_EQ(DatasetSpec::from_json(j).to_json(), j);
  EXPECT_THROW(DatasetSpec::from_json(Json{{"split", {{"train_fraction", 0.5}, {"test_fraction", 0.6}}}}),
               ConfigError);
  EXPECT_THROW(distribution_mode_from_string("zipf"), ConfigError);
}
