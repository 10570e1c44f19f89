#include "dslgen/catalog.hpp"

#include <set>
#include <vector>

#include "dslgen/errors.hpp"
#include "dslgen/util.hpp"

namespace dslgen {

namespace {

const std::set<std::string, std::less<>> kKnownRecordFields = {
    "FunctionName", "Description",    "DisplayName",   "IsTrigger",
    "IsInTrainingSet", "ParametersInfo", "ResponseSchema"};

const std::set<std::string, std::less<>> kKnownParamFields = {"Key", "Type", "Summary",
                                                              "Format", "Description"};

std::string context_of(const Json& record) {
  if (record.is_object() && record.contains("FunctionName") && record["FunctionName"].is_string()) {
    return record["FunctionName"].get<std::string>();
  }
  return "<record>";
}

std::string string_field(const Json& obj, const char* field, const std::string& ctx) {
  auto it = obj.find(field);
  if (it == obj.end()) return {};
  if (!it->is_string()) throw LoadError(ctx + ": field " + field + " must be a string");
  return it->get<std::string>();
}

bool bool_field(const Json& obj, const char* field, const std::string& ctx) {
  auto it = obj.find(field);
  if (it == obj.end()) return false;
  if (!it->is_boolean()) throw LoadError(ctx + ": field " + field + " must be a boolean");
  return it->get<bool>();
}

ParameterInfo parameter_from_json(const Json& item, const std::string& ctx) {
  if (!item.is_object()) throw LoadError(ctx + ": ParametersInfo entries must be objects");
  ParameterInfo p;
  p.key = string_field(item, "Key", ctx);
  if (p.key.empty()) throw LoadError(ctx + ": parameter without a Key");
  p.type_name = string_field(item, "Type", ctx);
  p.summary = string_field(item, "Summary", ctx);
  p.description = string_field(item, "Description", ctx);
  if (auto it = item.find("Format"); it != item.end()) {
    if (it->is_string()) {
      p.format = it->get<std::string>();
    } else if (it->is_null()) {
      p.extra["Format"] = nullptr;
    } else {
      throw LoadError(ctx + ": field Format must be a string");
    }
  }
  for (const auto& [key, value] : item.items()) {
    if (!kKnownParamFields.contains(key)) p.extra[key] = value;
  }
  return p;
}

Json parameter_to_json(const ParameterInfo& p) {
  Json j;
  j["Key"] = p.key;
  j["Type"] = p.type_name;
  j["Summary"] = p.summary;
  if (p.format) j["Format"] = *p.format;
  j["Description"] = p.description;
  for (const auto& [key, value] : p.extra.items()) j[key] = value;
  return j;
}

}  // namespace

bool FunctionDefinition::has_parameter(std::string_view key) const {
  for (const auto& p : parameters) {
    if (p.key == key) return true;
  }
  return false;
}

FunctionDefinition FunctionDefinition::from_json(const Json& record) {
  const std::string ctx = context_of(record);
  if (!record.is_object()) throw LoadError("catalog records must be JSON objects");
  auto fn = record.find("FunctionName");
  if (fn == record.end()) throw LoadError("record without FunctionName");
  if (!fn->is_string()) throw LoadError("FunctionName must be a string");
  FunctionDefinition def;
  try {
    def.function_name = ApiName::from_string(fn->get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw LoadError(e.what());
  }
  def.description = string_field(record, "Description", ctx);
  def.display_name = string_field(record, "DisplayName", ctx);
  def.is_trigger = bool_field(record, "IsTrigger", ctx);
  def.is_in_training_set = bool_field(record, "IsInTrainingSet", ctx);
  if (auto it = record.find("ParametersInfo"); it != record.end()) {
    if (!it->is_array()) throw LoadError(ctx + ": ParametersInfo must be an array");
    for (const auto& item : *it) def.parameters.push_back(parameter_from_json(item, ctx));
  }
  if (auto it = record.find("ResponseSchema"); it != record.end()) def.response_schema = *it;
  for (const auto& [key, value] : record.items()) {
    if (!kKnownRecordFields.contains(key)) def.extra[key] = value;
  }
  return def;
}

Json FunctionDefinition::to_json() const {
  Json j;
  j["FunctionName"] = function_name.str();
  j["Description"] = description;
  j["IsInTrainingSet"] = is_in_training_set;
  j["DisplayName"] = display_name;
  j["ParametersInfo"] = Json::array();
  for (const auto& p : parameters) j["ParametersInfo"].push_back(parameter_to_json(p));
  j["ResponseSchema"] = response_schema;
  j["IsTrigger"] = is_trigger;
  for (const auto& [key, value] : extra.items()) j[key] = value;
  return j;
}

Catalog Catalog::from_definitions(std::vector<FunctionDefinition> defs) {
  Catalog c;
  for (auto& def : defs) {
    std::set<std::string> keys;
    for (const auto& p : def.parameters) {
      if (!keys.insert(p.key).second) {
        throw LoadError(def.function_name.str() + ": duplicate parameter key " + p.key);
      }
    }
    std::string name = def.function_name.str();
    if (!c.definitions_.emplace(name, std::move(def)).second) {
      throw LoadError("duplicate function name " + name);
    }
  }
  return c;
}

Catalog Catalog::from_json(const Json& document) {
  if (!document.is_object()) throw LoadError("catalog must be a JSON object keyed by function name");
  std::vector<FunctionDefinition> defs;
  defs.reserve(document.size());
  for (const auto& [key, record] : document.items()) defs.push_back(FunctionDefinition::from_json(record));
  return from_definitions(std::move(defs));
}

Catalog Catalog::from_json_text(std::string_view text) {
  // The parser keeps the last of two equal keys; track keys per object so
  // duplicated records are reported instead of silently dropped.
  std::vector<std::set<std::string>> open_objects;
  std::string duplicate;
  Json::parser_callback_t track = [&](int, nlohmann::json::parse_event_t event, Json& parsed) {
    using E = nlohmann::json::parse_event_t;
    if (event == E::object_start) {
      open_objects.emplace_back();
    } else if (event == E::object_end) {
      if (!open_objects.empty()) open_objects.pop_back();
    } else if (event == E::key && !open_objects.empty()) {
      const auto& key = parsed.get_ref<const std::string&>();
      if (!open_objects.back().insert(key).second && duplicate.empty()) duplicate = key;
    }
    return true;
  };
  Json document;
  try {
    document = Json::parse(text, track);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("malformed catalog JSON: ") + e.what());
  }
  if (!duplicate.empty()) throw LoadError("duplicate key " + duplicate);
  return from_json(document);
}

const FunctionDefinition* Catalog::lookup(const ApiName& name) const {
  return lookup(name.str());
}

const FunctionDefinition* Catalog::lookup(std::string_view name) const {
  auto it = definitions_.find(std::string(name));
  return it == definitions_.end() ? nullptr : &it->second;
}

std::vector<const FunctionDefinition*> Catalog::definitions() const {
  std::vector<const FunctionDefinition*> out;
  out.reserve(definitions_.size());
  for (const auto& [_, def] : definitions_) out.push_back(&def);
  return out;
}

Catalog Catalog::without(const ApiName& name) const {
  Catalog c = *this;
  c.definitions_.erase(name.str());
  return c;
}

Json Catalog::to_json() const {
  Json j = Json::object();
  for (const auto& [name, def] : definitions_) j[name] = def.to_json();
  return j;
}

Catalog load_catalog(const std::filesystem::path& path) {
  return Catalog::from_json_text(read_file(path));
}

std::string render_fd(const FunctionDefinition& def) {
  std::string out = "Function: " + def.function_name.str() + "\n";
  out += "Description: " + squash_whitespace(def.description);
  if (def.parameters.empty()) return out;
  out += "\nParameters:";
  for (const auto& p : def.parameters) {
    out += "\n- " + p.key + " (" + (p.type_name.empty() ? "any" : p.type_name) + "): " +
           squash_whitespace(p.description.empty() ? p.summary : p.description);
  }
  return out;
}

}  // namespace dslgen
