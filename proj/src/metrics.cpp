#include "dslgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include "dslgen/errors.hpp"
#include "dslgen/kernels.hpp"
#include "dslgen/llm_client.hpp"

namespace dslgen {

std::size_t lcss(std::span<const ApiName> a, std::span<const ApiName> b) {
  return kernels::lcss_length<ApiName>(a, b);
}

namespace {

double similarity_from_lcss(std::size_t common, std::size_t truth_len, std::size_t pred_len) {
  if (truth_len == 0 && pred_len == 0) return 1.0;
  if (truth_len == 0) {
    throw std::invalid_argument("ground truth has no actions but the prediction has " +
                                std::to_string(pred_len));
  }
  return static_cast<double>(common) / static_cast<double>(std::max(truth_len, pred_len));
}

bool zeroes_similarity(const ValidationReport& report) {
  return !report.parsed || !report.hallucinated_apis.empty();
}

}  // namespace

double flow_similarity(std::span<const ApiName> truth_actions, const ValidationReport& report) {
  if (zeroes_similarity(report)) return 0.0;
  return similarity_from_lcss(lcss(truth_actions, report.actions), truth_actions.size(),
                              report.actions.size());
}

double flow_similarity(const Program& truth, const ValidationReport& report) {
  const auto actions = extract_actions(truth);
  return flow_similarity(actions, report);
}

FlowScore score_flow(std::string example_id, const Program& truth, ValidationReport report) {
  FlowScore s;
  s.example_id = std::move(example_id);
  s.similarity = flow_similarity(truth, report);
  s.counted_as_failure = zeroes_similarity(report);
  s.report = std::move(report);
  return s;
}

FlowScore generation_failure(std::string example_id, std::string error) {
  FlowScore s;
  s.example_id = std::move(example_id);
  s.generation_failed = true;
  s.generation_error = std::move(error);
  s.counted_as_failure = true;
  return s;
}

Json FlowScore::to_json() const {
  Json j;
  j["example_id"] = example_id;
  j["similarity"] = similarity;
  j["counted_as_failure"] = counted_as_failure;
  j["generation_failed"] = generation_failed;
  if (generation_failed) j["generation_error"] = generation_error;
  j["prediction"] = prediction;
  j["report"] = report.to_json();
  return j;
}

FlowScore FlowScore::from_json(const Json& j) {
  FlowScore s;
  s.example_id = j.at("example_id").get<std::string>();
  s.similarity = j.at("similarity").get<double>();
  s.counted_as_failure = j.at("counted_as_failure").get<bool>();
  s.generation_failed = j.value("generation_failed", false);
  s.generation_error = j.value("generation_error", std::string{});
  s.prediction = j.value("prediction", std::string{});
  s.report = ValidationReport::from_json(j.at("report"));
  return s;
}

MetricsSummary aggregate(std::span<const FlowScore> scores) {
  MetricsSummary m;
  std::vector<double> sims;
  for (const auto& s : scores) {
    if (s.generation_failed) {
      ++m.n_generation_failed;
      sims.push_back(0.0);
      continue;
    }
    ++m.n_total;
    sims.push_back(s.similarity);
    if (!s.report.parsed) {
      ++m.n_unparsed;
      continue;
    }
    if (!s.report.hallucinated_apis.empty()) ++m.n_halluc_api;
    if (!s.report.hallucinated_params.empty()) ++m.n_halluc_param;
  }
  if (m.n_total == 0) throw EmptyInput("no scored flows to aggregate");
  m.n_parsed = m.n_total - m.n_unparsed;
  std::sort(sims.begin(), sims.end());
  double sum = 0.0;
  for (double v : sims) sum += v;
  const auto total = static_cast<double>(m.n_total);
  m.avg_similarity = sum / static_cast<double>(sims.size());
  m.unparsed_fraction = static_cast<double>(m.n_unparsed) / total;
  m.pct_unparsed = static_cast<double>(m.n_unparsed) * 100.0 / total;
  if (m.n_parsed > 0) {
    const auto parsed = static_cast<double>(m.n_parsed);
    m.pct_made_up_apis = static_cast<double>(m.n_halluc_api) * 100.0 / parsed;
    m.pct_made_up_params = static_cast<double>(m.n_halluc_param) * 100.0 / parsed;
  }
  return m;
}

Json MetricsSummary::to_json() const {
  Json j;
  j["n_total"] = n_total;
  j["n_unparsed"] = n_unparsed;
  j["n_parsed"] = n_parsed;
  j["n_halluc_api"] = n_halluc_api;
  j["n_halluc_param"] = n_halluc_param;
  j["n_generation_failed"] = n_generation_failed;
  j["avg_similarity"] = avg_similarity;
  j["unparsed_fraction"] = unparsed_fraction;
  j["pct_unparsed"] = pct_unparsed;
  j["pct_made_up_apis"] = pct_made_up_apis ? Json(*pct_made_up_apis) : Json(nullptr);
  j["pct_made_up_params"] = pct_made_up_params ? Json(*pct_made_up_params) : Json(nullptr);
  return j;
}

MetricsSummary MetricsSummary::from_json(const Json& j) {
  MetricsSummary m;
  m.n_total = j.at("n_total").get<std::size_t>();
  m.n_unparsed = j.at("n_unparsed").get<std::size_t>();
  m.n_parsed = j.at("n_parsed").get<std::size_t>();
  m.n_halluc_api = j.at("n_halluc_api").get<std::size_t>();
  m.n_halluc_param = j.at("n_halluc_param").get<std::size_t>();
  m.n_generation_failed = j.value("n_generation_failed", std::size_t{0});
  m.avg_similarity = j.at("avg_similarity").get<double>();
  m.unparsed_fraction = j.at("unparsed_fraction").get<double>();
  m.pct_unparsed = j.at("pct_unparsed").get<double>();
  if (j.contains("pct_made_up_apis") && !j["pct_made_up_apis"].is_null()) {
    m.pct_made_up_apis = j["pct_made_up_apis"].get<double>();
  }
  if (j.contains("pct_made_up_params") && !j["pct_made_up_params"].is_null()) {
    m.pct_made_up_params = j["pct_made_up_params"].get<double>();
  }
  return m;
}

std::string format_delta(double value) {
  const double rounded = std::round(value * 100.0) / 100.0;
  if (std::fabs(rounded) < 0.005) return "0";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.2f", rounded);
  std::string out = buf;
  while (out.back() == '0') out.pop_back();
  if (out.back() == '.') out.pop_back();
  return out;
}

namespace {

std::string format_value(const std::optional<double>& v, int decimals) {
  if (!v) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, *v);
  return buf;
}

DeltaRow make_row(std::string metric, std::string label, bool higher_is_better,
                  std::optional<double> run, std::optional<double> baseline) {
  DeltaRow r{std::move(metric), std::move(label), higher_is_better, run, baseline, std::nullopt};
  if (run && baseline) r.delta = *run - *baseline;
  return r;
}

}  // namespace

DeltaTable delta_table(const MetricsSummary& run, const MetricsSummary& baseline) {
  const auto run_size = run.n_total + run.n_generation_failed;
  const auto base_size = baseline.n_total + baseline.n_generation_failed;
  if (run_size != base_size) {
    throw SizeMismatch("run covers " + std::to_string(run_size) + " flows, baseline " +
                       std::to_string(base_size));
  }
  DeltaTable t;
  t.rows.push_back(make_row("avg_similarity", "Avg. Similarity", true, run.avg_similarity,
                            baseline.avg_similarity));
  t.rows.push_back(make_row("pct_unparsed", "%Unparsed flows", false, run.pct_unparsed,
                            baseline.pct_unparsed));
  t.rows.push_back(make_row("pct_made_up_apis", "%made-up API names", false,
                            run.pct_made_up_apis, baseline.pct_made_up_apis));
  t.rows.push_back(make_row("pct_made_up_params", "%made-up API parameters", false,
                            run.pct_made_up_params, baseline.pct_made_up_params));
  return t;
}

const DeltaRow& DeltaTable::row(std::string_view metric) const {
  for (const auto& r : rows) {
    if (r.metric == metric) return r;
  }
  throw std::out_of_range("no delta row " + std::string(metric));
}

std::string DeltaTable::to_markdown() const {
  std::string out = "| Metric | Run | Baseline | Δ |\n|---|---:|---:|---:|\n";
  for (const auto& r : rows) {
    const int decimals = r.higher_is_better ? 4 : 2;
    out += "| " + r.label + " | " + format_value(r.run, decimals) + " | " +
           format_value(r.baseline, decimals) + " | " +
           (r.delta ? format_delta(*r.delta) : std::string("n/a")) + " |\n";
  }
  out += "\n";
  out += kOrientationNote;
  out += "\n";
  return out;
}

Json DeltaTable::to_json() const {
  Json j;
  j["note"] = kOrientationNote;
  j["rows"] = Json::array();
  for (const auto& r : rows) {
    Json row;
    row["metric"] = r.metric;
    row["label"] = r.label;
    row["higher_is_better"] = r.higher_is_better;
    row["run"] = r.run ? Json(*r.run) : Json(nullptr);
    row["baseline"] = r.baseline ? Json(*r.baseline) : Json(nullptr);
    row["delta"] = r.delta ? Json(*r.delta) : Json(nullptr);
    j["rows"].push_back(row);
  }
  return j;
}

std::vector<FlowScore> evaluate_predictions(const Catalog& catalog,
                                            std::span<const TruthRecord> truths,
                                            std::span<const PredictionRecord> predictions) {
  std::map<std::string, const TruthRecord*> by_id;
  for (const auto& t : truths) {
    if (!by_id.emplace(t.id, &t).second) throw InvalidExample("duplicate truth id " + t.id);
  }
  std::unordered_map<std::string, const PredictionRecord*> preds;
  for (const auto& p : predictions) {
    if (!by_id.contains(p.id)) throw InvalidExample("prediction " + p.id + " has no ground truth");
    if (!preds.emplace(p.id, &p).second) throw InvalidExample("duplicate prediction id " + p.id);
  }

  std::vector<const TruthRecord*> ordered;
  for (const auto& [_, t] : by_id) ordered.push_back(t);
  const auto n = static_cast<std::int64_t>(ordered.size());
  std::vector<FlowScore> scores(ordered.size());

#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) {
    const TruthRecord& truth = *ordered[static_cast<std::size_t>(i)];
    auto& out = scores[static_cast<std::size_t>(i)];
    auto it = preds.find(truth.id);
    if (it == preds.end()) {
      out = generation_failure(truth.id, "no prediction");
      continue;
    }
    out.example_id = truth.id;
    out.prediction = strip_markers(it->second->text);
    out.report = classify(catalog, out.prediction);
    out.counted_as_failure = zeroes_similarity(out.report);
  }

  // Similarities for the scoreable flows go through the batched LCSS kernel
  // on interned name ids.
  std::unordered_map<ApiName, std::uint32_t> ids;
  auto intern = [&](const std::vector<ApiName>& names) {
    kernels::Sequence seq;
    seq.reserve(names.size());
    for (const auto& name : names) {
      seq.push_back(ids.emplace(name, static_cast<std::uint32_t>(ids.size())).first->second);
    }
    return seq;
  };
  std::vector<std::size_t> slots;
  std::vector<kernels::Sequence> left, right;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].generation_failed || scores[i].counted_as_failure) continue;
    slots.push_back(i);
    left.push_back(intern(extract_actions(ordered[i]->program)));
    right.push_back(intern(scores[i].report.actions));
  }
  std::vector<std::size_t> common(slots.size());
  kernels::lcss_batch(left, right, common);
  for (std::size_t k = 0; k < slots.size(); ++k) {
    scores[slots[k]].similarity = similarity_from_lcss(common[k], left[k].size(), right[k].size());
  }
  return scores;
}

}  // namespace dslgen
