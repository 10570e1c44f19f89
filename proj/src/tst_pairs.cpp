#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "dslgen/errors.hpp"
#include "dslgen/kernels.hpp"
#include "dslgen/retrieval.hpp"
#include "dslgen/util.hpp"

namespace dslgen {

Json TstPairRecord::to_json() const {
  Json j;
  j["id_i"] = id_i;
  j["id_j"] = id_j;
  j["u_i"] = u_i;
  j["u_j"] = u_j;
  j["cosine_nl"] = cosine_nl;
  j["label"] = positive ? "positive" : "negative";
  j["target_s"] = target_s;
  return j;
}

TstPairRecord TstPairRecord::from_json(const Json& j) {
  TstPairRecord r;
  r.id_i = j.at("id_i").get<std::string>();
  r.id_j = j.at("id_j").get<std::string>();
  r.u_i = j.at("u_i").get<std::string>();
  r.u_j = j.at("u_j").get<std::string>();
  r.cosine_nl = j.at("cosine_nl").get<double>();
  r.positive = j.at("label").get<std::string>() == "positive";
  r.target_s = j.at("target_s").get<double>();
  return r;
}

std::string tst_pairs_to_jsonl(std::span<const TstPairRecord> records) {
  std::vector<Json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(r.to_json());
  return to_jsonl(rows);
}

std::pair<std::size_t, std::size_t> pair_from_ordinal(std::uint64_t ordinal, std::size_t n) {
  // Row i holds the n-1-i pairs (i, i+1..n-1) and starts at i*n - i*(i+1)/2.
  auto row_start = [n](std::uint64_t i) { return i * n - i * (i + 1) / 2; };
  std::uint64_t lo = 0, hi = n - 1;  // answer in [lo, hi)
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (row_start(mid) <= ordinal) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const auto j = lo + 1 + (ordinal - row_start(lo));
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(j)};
}

std::vector<TstPairRecord> generate_tst_pairs(std::span<const ExamplePair> dataset,
                                              const EmbeddingProvider& provider,
                                              double threshold, std::size_t budget,
                                              std::uint64_t seed) {
  if (dataset.size() < 2) throw std::invalid_argument("need at least two examples to form pairs");
  if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("threshold must lie in (0, 1)");

  const std::size_t n = dataset.size();
  const std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  SeededRng rng(seed);

  std::vector<std::uint64_t> ordinals;
  if (budget >= total) {
    ordinals.resize(total);
    for (std::uint64_t i = 0; i < total; ++i) ordinals[i] = i;
  } else {
    // Floyd's algorithm: `budget` distinct ordinals without materializing all pairs.
    std::unordered_set<std::uint64_t> chosen;
    chosen.reserve(budget * 2);
    for (std::uint64_t j = total - budget; j < total; ++j) {
      const std::uint64_t t = rng.below(j + 1);
      ordinals.push_back(chosen.insert(t).second ? t : j);
      if (ordinals.back() == j) chosen.insert(j);
    }
    std::sort(ordinals.begin(), ordinals.end());
  }
  rng.shuffle(ordinals);

  std::vector<std::string> texts;
  texts.reserve(n);
  for (const auto& ex : dataset) texts.push_back(ex.nl);
  const auto raw = provider.embed(texts);
  if (raw.size() != n) throw EmbedError("provider returned the wrong number of vectors");

  const std::size_t dim = provider.dimension();
  std::vector<double> matrix(n * dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (raw[i].size() != dim) throw EmbedError("provider returned a vector of the wrong dimension");
    const double norm = kernels::l2_norm(raw[i]);
    if (norm > 0.0 && std::isfinite(norm)) {
      for (std::size_t d = 0; d < dim; ++d) matrix[i * dim + d] = raw[i][d] / norm;
    }
  }

  std::vector<kernels::RowPair> pairs;
  pairs.reserve(ordinals.size());
  for (auto ord : ordinals) pairs.push_back(pair_from_ordinal(ord, n));
  std::vector<double> cosines(pairs.size());
  kernels::pair_dots(kernels::MatrixView{matrix, n, dim}, pairs, cosines);

  std::vector<TstPairRecord> out;
  out.reserve(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& a = dataset[pairs[p].first];
    const auto& b = dataset[pairs[p].second];
    TstPairRecord r;
    r.id_i = a.id;
    r.id_j = b.id;
    r.u_i = a.nl;
    r.u_j = b.nl;
    r.cosine_nl = std::clamp(cosines[p], -1.0, 1.0);
    r.positive = r.cosine_nl > threshold;
    r.target_s = jaccard(a.api_set, b.api_set);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace dslgen
