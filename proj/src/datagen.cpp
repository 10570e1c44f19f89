#include "dslgen/datagen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <thread>

#include "dslgen/errors.hpp"
#include "dslgen/grounding.hpp"
#include "dslgen/util.hpp"

namespace dslgen {

std::string to_string(DistributionMode mode) {
  return mode == DistributionMode::uniform ? "uniform" : "usage-weighted";
}

DistributionMode distribution_mode_from_string(std::string_view text) {
  if (text == "usage-weighted") return DistributionMode::usage_weighted;
  if (text == "uniform") return DistributionMode::uniform;
  throw ConfigError("unknown distribution mode " + std::string(text));
}

void DatasetSpec::validate() const {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(train_fraction) || !in_unit(test_fraction)) {
    throw ConfigError("split fractions must lie in [0, 1]");
  }
  if (std::abs(train_fraction + test_fraction - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
}

Json DatasetSpec::to_json() const {
  Json j;
  j["source_flows"] = source_flows.string();
  j["catalog"] = catalog.string();
  j["target_count"] = target_count;
  j["split"] = {{"train_fraction", train_fraction}, {"test_fraction", test_fraction}};
  j["seed"] = seed;
  j["distribution_mode"] = to_string(distribution_mode);
  return j;
}

DatasetSpec DatasetSpec::from_json(const Json& j) {
  DatasetSpec s;
  try {
    s.source_flows = j.value("source_flows", std::string{});
    s.catalog = j.value("catalog", std::string{});
    s.target_count = j.value("target_count", s.target_count);
    if (j.contains("split")) {
      s.train_fraction = j["split"].value("train_fraction", s.train_fraction);
      s.test_fraction = j["split"].value("test_fraction", s.test_fraction);
    }
    s.seed = j.value("seed", s.seed);
    s.distribution_mode = distribution_mode_from_string(j.value("distribution_mode", std::string("usage-weighted")));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("dataset spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::vector<FlowRecord> load_flows(const std::filesystem::path& path) {
  std::vector<FlowRecord> out;
  for (const auto& row : read_jsonl(path)) {
    if (!row.is_object() || !row.contains("id") || !row.contains("dsl") || !row["id"].is_string() ||
        !row["dsl"].is_string()) {
      throw LoadError(path.string() + ": flow rows need string id and dsl");
    }
    out.push_back({row["id"].get<std::string>(), row["dsl"].get<std::string>()});
  }
  return out;
}

// ---- NL generation

std::optional<std::string> reject_reason(std::string_view text, const Catalog& catalog) {
  if (trim(text).empty()) return "empty output";
  if (text.find("({") != std::string_view::npos) return "output contains DSL call syntax";
  for (const auto* def : catalog.definitions()) {
    const auto name = def->function_name.str();
    if (text.find(name) != std::string_view::npos) return "output names API " + name;
  }
  return std::nullopt;
}

std::string generate_nl_for_flow(const std::string& flow_id, std::string_view dsl, const Catalog& catalog,
                                 GenerationEndpoint& endpoint, const NlGenerationOptions& options) {
  const Program program = parse(dsl);
  std::vector<std::string> blocks;
  std::vector<std::string> missing;
  for (const auto& name : distinct_actions(program)) {
    if (const auto* def = catalog.lookup(name)) {
      blocks.push_back(render_fd(*def));
    } else {
      missing.push_back(name.str());
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw UnresolvedApi("flow " + flow_id + " calls APIs missing from the catalog: " + list);
  }

  const auto tmpl = PromptTemplate::resolve(options.template_id);
  tmpl.require({"fds", "flow"});
  std::string fds;
  for (const auto& b : blocks) fds += (fds.empty() ? "" : "\n\n") + b;
  ChatRequest request;
  request.id = flow_id;
  request.messages.push_back({"user", tmpl.render({{"fds", fds}, {"flow", serialize(program)}})});

  std::string last_reason = "no attempts";
  for (std::size_t attempt = 0; attempt < std::max<std::size_t>(options.max_attempts, 1); ++attempt) {
    std::string text;
    try {
      text = endpoint.complete(request);
    } catch (const ContentEmpty&) {
      last_reason = "empty output";
      continue;
    }
    auto cleaned = squash_whitespace(text);
    if (auto why = reject_reason(cleaned, catalog)) {
      last_reason = *why;
      continue;
    }
    return cleaned;
  }
  throw GenerationRejected("flow " + flow_id + ": " + last_reason + " after " +
                           std::to_string(std::max<std::size_t>(options.max_attempts, 1)) + " attempts");
}

std::string generate_nl_for_flow(const std::string& flow_id, std::string_view dsl, const Catalog& catalog,
                                 const EndpointConfig& client, const NlGenerationOptions& options) {
  auto endpoint = make_endpoint(client);
  return generate_nl_for_flow(flow_id, dsl, catalog, *endpoint, options);
}

std::vector<NlGenerationResult> generate_nl_batch(std::span<const FlowRecord> flows, const Catalog& catalog,
                                                  GenerationEndpoint& endpoint, std::size_t concurrency,
                                                  const NlGenerationOptions& options) {
  std::vector<NlGenerationResult> results(flows.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < flows.size(); i = next++) {
      auto& r = results[i];
      r.id = flows[i].id;
      r.dsl = flows[i].dsl;
      try {
        r.nl = generate_nl_for_flow(flows[i].id, flows[i].dsl, catalog, endpoint, options);
      } catch (const ParseException& e) {
        r.error = std::string("unparseable flow: ") + e.what();
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(concurrency, 1, std::max<std::size_t>(flows.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::stable_sort(results.begin(), results.end(),
                   [](const NlGenerationResult& a, const NlGenerationResult& b) { return a.id < b.id; });
  return results;
}

std::vector<ExamplePair> to_examples(std::span<const NlGenerationResult> results) {
  std::vector<ExamplePair> out;
  for (const auto& r : results) {
    if (r.ok()) out.push_back(ExamplePair::make(r.id, r.nl, r.dsl));
  }
  return out;
}

std::string review_csv(std::span<const NlGenerationResult> results) {
  std::string out = "id,status,nl,dsl,error\n";
  for (const auto& r : results) {
    out += csv_escape(r.id) + "," + (r.ok() ? "generated" : "failed") + "," + csv_escape(r.nl) + "," +
           csv_escape(r.dsl) + "," + csv_escape(r.error) + "\n";
  }
  return out;
}

// ---- splits

namespace {

std::map<std::string, std::size_t> allocate(const std::map<std::string, std::vector<std::size_t>>& strata,
                                            std::size_t target, std::size_t pool, DistributionMode mode) {
  std::map<std::string, std::size_t> alloc;
  if (mode == DistributionMode::usage_weighted) {
    // Largest remainder; ties go to the earlier stratum name.
    std::vector<std::pair<double, std::string>> remainders;
    std::size_t given = 0;
    for (const auto& [name, members] : strata) {
      const double quota = static_cast<double>(target) * members.size() / pool;
      const auto base = static_cast<std::size_t>(std::floor(quota));
      alloc[name] = base;
      given += base;
      remainders.emplace_back(quota - base, name);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; given < target; ++i, ++given) ++alloc[remainders[i].second];
    return alloc;
  }
  // Uniform: round-robin, skipping exhausted strata.
  for (const auto& [name, members] : strata) alloc[name] = 0;
  std::size_t given = 0;
  while (given < target) {
    for (const auto& [name, members] : strata) {
      if (given == target) break;
      if (alloc[name] < members.size()) {
        ++alloc[name];
        ++given;
      }
    }
  }
  return alloc;
}

Json api_histogram(std::span<const ExamplePair> split) {
  std::map<std::string, std::size_t> counts;
  for (const auto& p : split) {
    for (const auto& name : p.api_set) ++counts[name.str()];
  }
  Json j = Json::object();
  for (const auto& [k, v] : counts) j[k] = v;
  return j;
}

}  // namespace

SplitResult build_splits(const DatasetSpec& spec, std::span<const ExamplePair> pairs) {
  spec.validate();
  if (pairs.empty()) throw EmptyInput("no example pairs to split");

  std::vector<const ExamplePair*> pool;
  for (const auto& p : pairs) pool.push_back(&p);
  std::sort(pool.begin(), pool.end(), [](const ExamplePair* a, const ExamplePair* b) { return a->id < b->id; });
  for (std::size_t i = 1; i < pool.size(); ++i) {
    if (pool[i]->id == pool[i - 1]->id) throw InvalidExample("duplicate example id " + pool[i]->id);
  }

  const std::size_t target = spec.target_count == 0 ? pool.size() : spec.target_count;
  if (target > pool.size()) {
    throw InsufficientData("target_count " + std::to_string(target) + " exceeds the pool of " +
                           std::to_string(pool.size()));
  }

  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto actions = extract_actions(parse(pool[i]->dsl));
    strata[actions.empty() ? std::string(kNoActionStratum) : actions.front().str()].push_back(i);
  }

  SeededRng rng(spec.seed);
  for (auto& [name, members] : strata) rng.shuffle(members);
  const auto alloc = allocate(strata, target, pool.size(), spec.distribution_mode);

  // Spread each stratum evenly along the sample order so any prefix keeps
  // the sample's mix.
  struct Slot {
    double key;
    std::string stratum;
    std::size_t index;
  };
  std::vector<Slot> order;
  order.reserve(target);
  for (const auto& [name, members] : strata) {
    const auto n = alloc.at(name);
    for (std::size_t r = 0; r < n; ++r) {
      order.push_back({(static_cast<double>(r) + 0.5) / static_cast<double>(n), name, members[r]});
    }
  }
  std::sort(order.begin(), order.end(), [](const Slot& a, const Slot& b) {
    if (a.key != b.key) return a.key < b.key;
    return a.stratum < b.stratum;
  });

  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(target) * spec.test_fraction));
  SplitResult out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_test ? out.test : out.train).push_back(*pool[order[i].index]);
  }
  auto by_id = [](const ExamplePair& a, const ExamplePair& b) { return a.id < b.id; };
  std::sort(out.train.begin(), out.train.end(), by_id);
  std::sort(out.test.begin(), out.test.end(), by_id);

  Json warnings = Json::array();
  if (out.test.empty()) warnings.push_back("test split is empty");
  if (out.train.empty()) warnings.push_back("train split is empty");
  if (spec.distribution_mode == DistributionMode::uniform) {
    for (const auto& [name, members] : strata) {
      if (alloc.at(name) == members.size() && alloc.at(name) * strata.size() < target) {
        warnings.push_back("stratum " + name + " has only " + std::to_string(members.size()) +
                           " flows; uniform allocation is capped");
      }
    }
  }

  Json strata_json = Json::object();
  for (const auto& [name, members] : strata) {
    strata_json[name] = {{"pool", members.size()}, {"sampled", alloc.at(name)}};
  }
  out.manifest = {
      {"seed", spec.seed},
      {"distribution_mode", to_string(spec.distribution_mode)},
      {"train_fraction", spec.train_fraction},
      {"test_fraction", spec.test_fraction},
      {"pool_size", pool.size()},
      {"target_count", target},
      {"train_count", out.train.size()},
      {"test_count", out.test.size()},
      {"strata", strata_json},
      {"train_api_histogram", api_histogram(out.train)},
      {"test_api_histogram", api_histogram(out.test)},
      {"warnings", warnings},
  };
  return out;
}

}  // namespace dslgen
