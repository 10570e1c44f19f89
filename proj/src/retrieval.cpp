#include "dslgen/retrieval.hpp"

#include <algorithm>
#include <set>

#include "dslgen/errors.hpp"
#include "dslgen/util.hpp"

namespace dslgen {

ExamplePair ExamplePair::make(std::string id, std::string nl, std::string dsl) {
  auto parsed = try_parse(dsl);
  if (!parsed.ok()) {
    throw InvalidExample("example " + id + " has an unparseable flow: " + parsed.error->message());
  }
  ExamplePair p{std::move(id), std::move(nl), std::move(dsl), distinct_actions(*parsed.program)};
  return p;
}

Json ExamplePair::to_json() const {
  Json j;
  j["id"] = id;
  j["nl"] = nl;
  j["dsl"] = dsl;
  return j;
}

ExamplePair ExamplePair::from_json(const Json& j) {
  if (!j.is_object() || !j.contains("id") || !j.contains("nl") || !j.contains("dsl")) {
    throw InvalidExample("example rows need id, nl and dsl");
  }
  try {
    return make(j["id"].get<std::string>(), j["nl"].get<std::string>(), j["dsl"].get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidExample(std::string("example fields must be strings: ") + e.what());
  }
}

std::vector<ExamplePair> load_examples(const std::filesystem::path& path) {
  std::vector<ExamplePair> out;
  for (const auto& row : read_jsonl(path)) out.push_back(ExamplePair::from_json(row));
  return out;
}

std::string examples_to_jsonl(std::span<const ExamplePair> pairs) {
  std::vector<Json> rows;
  rows.reserve(pairs.size());
  for (const auto& p : pairs) rows.push_back(p.to_json());
  return to_jsonl(rows);
}

ShotIndex build_index(std::vector<ExamplePair> pairs, const EmbeddingProvider& provider) {
  if (pairs.empty()) throw std::invalid_argument("cannot build an index over zero examples");
  for (auto& p : pairs) p = ExamplePair::make(std::move(p.id), std::move(p.nl), std::move(p.dsl));
  std::sort(pairs.begin(), pairs.end(),
            [](const ExamplePair& a, const ExamplePair& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    if (pairs[i].id == pairs[i - 1].id) throw InvalidExample("duplicate example id " + pairs[i].id);
  }
  std::vector<std::string> texts, keys;
  for (const auto& p : pairs) {
    texts.push_back(p.nl);
    keys.push_back(p.id);
  }
  auto vectors = provider.embed(texts);
  if (vectors.size() != texts.size()) throw EmbedError("provider returned the wrong number of vectors");
  for (const auto& v : vectors) {
    if (v.size() != provider.dimension()) throw EmbedError("provider returned a vector of the wrong dimension");
  }
  ShotIndex index;
  index.provider_name_ = provider.name();
  index.vectors_ = VectorIndex::build(std::move(keys), std::move(vectors));
  index.pairs_ = std::move(pairs);
  return index;
}

void ShotIndex::save(const std::filesystem::path& path) const {
  Json j;
  j["format"] = "dslgen-shot-index/1";
  j["provider"] = provider_name_;
  j["dimension"] = dimension();
  j["entries"] = Json::array();
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    Json e = pairs_[i].to_json();
    auto row = vectors_.row(i);
    e["vector"] = std::vector<double>(row.begin(), row.end());
    j["entries"].push_back(std::move(e));
  }
  write_file(path, j.dump() + "\n");
}

ShotIndex ShotIndex::load(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
  if (j.value("format", std::string{}) != "dslgen-shot-index/1") {
    throw LoadError(path.string() + ": not a shot index");
  }
  ShotIndex index;
  index.provider_name_ = j.at("provider").get<std::string>();
  std::vector<std::string> keys;
  std::vector<Vector> vectors;
  for (const auto& e : j.at("entries")) {
    index.pairs_.push_back(ExamplePair::from_json(e));
    keys.push_back(index.pairs_.back().id);
    vectors.push_back(e.at("vector").get<Vector>());
  }
  index.vectors_ = VectorIndex::from_unit_rows(std::move(keys), std::move(vectors));
  return index;
}

std::vector<ScoredExample> retrieve_few_shots(const ShotIndex& index, std::string_view query,
                                              std::size_t k, const EmbeddingProvider& provider) {
  if (provider.name() != index.provider_name()) {
    throw ProviderMismatch("index was built with " + index.provider_name() + ", query uses " +
                           provider.name());
  }
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  const auto q = provider.embed_one(query);
  std::vector<ScoredExample> out;
  for (const auto& hit : index.vectors().search(q, k)) {
    out.push_back({index.pairs()[hit.row], hit.score});
  }
  return out;
}

double jaccard(std::span<const ApiName> a, std::span<const ApiName> b) {
  if (a.empty() && b.empty()) return 1.0;
  std::vector<ApiName> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  const auto uni = a.size() + b.size() - common.size();
  return static_cast<double>(common.size()) / static_cast<double>(uni);
}

double program_similarity(std::string_view a, std::string_view b) {
  const auto sa = distinct_actions(parse(a));
  const auto sb = distinct_actions(parse(b));
  return jaccard(sa, sb);
}

}  // namespace dslgen
