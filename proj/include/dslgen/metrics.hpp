#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dslgen/dsl.hpp"
#include "dslgen/validator.hpp"

namespace dslgen {

std::size_t lcss(std::span<const ApiName> a, std::span<const ApiName> b);

// LCSS over the longer action list. Zero for unparsed flows and flows with a
// made-up API name; 1 when both action lists are empty. Throws
// std::invalid_argument if the ground truth has no actions but the
// prediction does.
double flow_similarity(std::span<const ApiName> truth_actions, const ValidationReport& report);
double flow_similarity(const Program& truth, const ValidationReport& report);

struct FlowScore {
  std::string example_id;
  double similarity = 0.0;
  ValidationReport report;
  bool counted_as_failure = false;
  // The endpoint never produced text. Such flows score 0 but stay out of the
  // unparsed and hallucination denominators.
  bool generation_failed = false;
  std::string generation_error;
  std::string prediction;

  Json to_json() const;
  static FlowScore from_json(const Json& j);

  bool operator==(const FlowScore&) const = default;
};

FlowScore score_flow(std::string example_id, const Program& truth, ValidationReport report);
FlowScore generation_failure(std::string example_id, std::string error);

struct MetricsSummary {
  std::size_t n_total = 0;  // scored flows; excludes generation failures
  std::size_t n_unparsed = 0;
  std::size_t n_parsed = 0;
  std::size_t n_halluc_api = 0;
  std::size_t n_halluc_param = 0;
  std::size_t n_generation_failed = 0;
  double avg_similarity = 0.0;  // generation failures count as 0 here
  double unparsed_fraction = 0.0;  // raw |unparsed| / |total|
  double pct_unparsed = 0.0;       // same, in percent
  std::optional<double> pct_made_up_apis;    // absent when nothing parsed
  std::optional<double> pct_made_up_params;  // absent when nothing parsed

  Json to_json() const;
  static MetricsSummary from_json(const Json& j);

  bool operator==(const MetricsSummary&) const = default;
};

// Throws EmptyInput when there is no scored flow. Permutation-invariant:
// similarities are summed in sorted order.
MetricsSummary aggregate(std::span<const FlowScore> scores);

struct DeltaRow {
  std::string metric;  // summary field name
  std::string label;   // column heading
  bool higher_is_better = false;
  std::optional<double> run;
  std::optional<double> baseline;
  std::optional<double> delta;  // run - baseline; absent if either side is

  bool operator==(const DeltaRow&) const = default;
};

struct DeltaTable {
  std::vector<DeltaRow> rows;

  const DeltaRow& row(std::string_view metric) const;
  std::string to_markdown() const;
  Json to_json() const;
};

inline constexpr const char* kOrientationNote =
    "Avg. Similarity: higher is better. Failure rates (%): lower is better.";

// Throws SizeMismatch when the summaries cover different test-set sizes.
DeltaTable delta_table(const MetricsSummary& run, const MetricsSummary& baseline);

// Delta cell text: two decimals, trailing zeros trimmed, explicit sign, "0"
// for values that round to zero.
std::string format_delta(double value);

struct PredictionRecord {
  std::string id;
  std::string text;  // raw generation; markers are stripped before parsing
};

struct TruthRecord {
  std::string id;
  Program program;
};

// Scores predictions against ground truths by id. Classification runs in
// parallel; results come back ordered by example id. Ids without a
// prediction are generation failures.
std::vector<FlowScore> evaluate_predictions(const Catalog& catalog,
                                            std::span<const TruthRecord> truths,
                                            std::span<const PredictionRecord> predictions);

}  // namespace dslgen
