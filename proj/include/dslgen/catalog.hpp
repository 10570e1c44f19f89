#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dslgen/dsl.hpp"

namespace dslgen {

struct ParameterInfo {
  std::string key;  // opaque; may contain '/'
  std::string type_name;
  std::string summary;
  std::optional<std::string> format;
  std::string description;
  Json extra = Json::object();  // unrecognized fields, preserved verbatim

  bool operator==(const ParameterInfo&) const = default;
};

struct FunctionDefinition {
  ApiName function_name;
  std::string description;
  std::string display_name;
  bool is_trigger = false;
  bool is_in_training_set = false;
  std::vector<ParameterInfo> parameters;
  Json response_schema = Json::array();  // stored, never interpreted
  Json extra = Json::object();

  bool has_parameter(std::string_view key) const;

  // Record in the catalog file shape ("FunctionName", "ParametersInfo", ...).
  Json to_json() const;
  static FunctionDefinition from_json(const Json& record);

  bool operator==(const FunctionDefinition&) const = default;
};

// Immutable once built; lookups are exact and case-sensitive.
class Catalog {
 public:
  Catalog() = default;

  // Throws LoadError on duplicate function names or duplicate parameter keys.
  static Catalog from_definitions(std::vector<FunctionDefinition> defs);
  static Catalog from_json(const Json& document);
  static Catalog from_json_text(std::string_view text);

  const FunctionDefinition* lookup(const ApiName& name) const;
  const FunctionDefinition* lookup(std::string_view name) const;
  bool contains(const ApiName& name) const { return lookup(name) != nullptr; }

  std::size_t size() const { return definitions_.size(); }
  bool empty() const { return definitions_.empty(); }

  // Sorted by function name.
  std::vector<const FunctionDefinition*> definitions() const;

  Catalog without(const ApiName& name) const;

  Json to_json() const;

 private:
  std::map<std::string, FunctionDefinition> definitions_;
};

// Catalog file: a JSON object keyed by function name whose values are
// function records. Throws LoadError.
Catalog load_catalog(const std::filesystem::path& path);

// Plain-text grounding block: name, description, one line per parameter.
// ResponseSchema is never rendered.
std::string render_fd(const FunctionDefinition& def);

}  // namespace dslgen
