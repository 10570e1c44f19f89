#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dslgen/catalog.hpp"
#include "dslgen/dsl.hpp"

namespace dslgen {

struct HallucinatedParam {
  ApiName api;
  std::string key;

  bool operator==(const HallucinatedParam&) const = default;
};

// Failure taxonomy for one generated flow. Unparsed flows are not inspected
// further, so both hallucination lists and `actions` stay empty for them.
struct ValidationReport {
  bool parsed = false;
  std::optional<ParseError> parse_error;
  std::vector<ApiName> hallucinated_apis;          // distinct, first-seen order
  std::vector<HallucinatedParam> hallucinated_params;  // distinct, first-seen order
  std::vector<ApiName> actions;
  std::vector<std::string> warnings;

  bool clean() const {
    return parsed && hallucinated_apis.empty() && hallucinated_params.empty();
  }

  Json to_json() const;
  static ValidationReport from_json(const Json& j);

  bool operator==(const ValidationReport&) const = default;
};

ValidationReport classify(const Catalog& catalog, const Program& program);
ValidationReport classify(const Catalog& catalog, std::string_view source);

}  // namespace dslgen
