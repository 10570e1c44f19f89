#include "dslgen/validator.hpp"

#include <algorithm>

namespace dslgen {

ValidationReport classify(const Catalog& catalog, const Program& program) {
  ValidationReport report;
  report.parsed = true;
  report.actions = extract_actions(program);
  report.warnings = lint(program);
  for (const auto& usage : extract_parameter_usages(program)) {
    const FunctionDefinition* def = catalog.lookup(usage.api);
    if (def == nullptr) {
      if (std::find(report.hallucinated_apis.begin(), report.hallucinated_apis.end(), usage.api) ==
          report.hallucinated_apis.end()) {
        report.hallucinated_apis.push_back(usage.api);
      }
      continue;
    }
    for (const auto& key : usage.keys) {
      if (def->has_parameter(key)) continue;
      HallucinatedParam finding{usage.api, key};
      if (std::find(report.hallucinated_params.begin(), report.hallucinated_params.end(), finding) ==
          report.hallucinated_params.end()) {
        report.hallucinated_params.push_back(std::move(finding));
      }
    }
  }
  return report;
}

ValidationReport classify(const Catalog& catalog, std::string_view source) {
  auto result = try_parse(source);
  if (!result.ok()) {
    ValidationReport report;
    report.parse_error = std::move(result.error);
    return report;
  }
  return classify(catalog, *result.program);
}

Json ValidationReport::to_json() const {
  Json j;
  j["parsed"] = parsed;
  j["parse_error"] = parse_error ? parse_error->to_json() : Json(nullptr);
  j["hallucinated_apis"] = Json::array();
  for (const auto& a : hallucinated_apis) j["hallucinated_apis"].push_back(a.str());
  j["hallucinated_params"] = Json::array();
  for (const auto& p : hallucinated_params) {
    j["hallucinated_params"].push_back(Json{{"api", p.api.str()}, {"key", p.key}});
  }
  j["actions"] = Json::array();
  for (const auto& a : actions) j["actions"].push_back(a.str());
  j["warnings"] = warnings;
  return j;
}

ValidationReport ValidationReport::from_json(const Json& j) {
  ValidationReport r;
  r.parsed = j.at("parsed").get<bool>();
  if (j.contains("parse_error") && !j["parse_error"].is_null()) {
    const auto& e = j["parse_error"];
    ParseError pe;
    pe.offset = e.at("offset").get<std::size_t>();
    pe.line = e.at("line").get<std::size_t>();
    pe.col = e.at("col").get<std::size_t>();
    pe.expected = e.at("expected").get<std::string>();
    pe.found = e.at("found").get<std::string>();
    r.parse_error = pe;
  }
  for (const auto& a : j.at("hallucinated_apis")) r.hallucinated_apis.push_back(ApiName::from_string(a.get<std::string>()));
  for (const auto& p : j.at("hallucinated_params")) {
    r.hallucinated_params.push_back({ApiName::from_string(p.at("api").get<std::string>()), p.at("key").get<std::string>()});
  }
  for (const auto& a : j.at("actions")) r.actions.push_back(ApiName::from_string(a.get<std::string>()));
  if (j.contains("warnings")) r.warnings = j["warnings"].get<std::vector<std::string>>();
  return r;
}

}  // namespace dslgen
