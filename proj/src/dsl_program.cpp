#include <algorithm>
#include <set>
#include <string>

#include "dslgen/dsl.hpp"

namespace dslgen {

bool is_identifier(std::string_view text) {
  if (text.empty()) return false;
  auto start = [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
  };
  if (!start(text.front())) return false;
  return std::all_of(text.begin() + 1, text.end(), [&](char c) {
    return start(c) || (c >= '0' && c <= '9');
  });
}

ApiName ApiName::from_string(std::string_view text) {
  auto dot = text.find('.');
  if (dot == std::string_view::npos || text.find('.', dot + 1) != std::string_view::npos) {
    throw std::invalid_argument("API name must contain exactly one '.': " + std::string(text));
  }
  ApiName name{std::string(text.substr(0, dot)), std::string(text.substr(dot + 1))};
  if (!is_identifier(name.ns) || !is_identifier(name.function)) {
    throw std::invalid_argument("malformed API name: " + std::string(text));
  }
  return name;
}

bool Conditional::operator==(const Conditional& other) const {
  return condition == other.condition && then_branch == other.then_branch &&
         else_branch == other.else_branch;
}

std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::Eq: return "==";
    case CompareOp::Ne: return "!=";
    case CompareOp::Lt: return "<";
    case CompareOp::Le: return "<=";
    case CompareOp::Gt: return ">";
    case CompareOp::Ge: return ">=";
  }
  return "==";
}

std::string serialize_json(const Json& value) {
  if (value.is_object()) {
    if (value.empty()) return "{}";
    std::string out = "{";
    bool first = true;
    for (const auto& [key, item] : value.items()) {
      if (!first) out += ", ";
      first = false;
      out += Json(key).dump(-1, ' ', false, Json::error_handler_t::replace);
      out += ": ";
      out += serialize_json(item);
    }
    return out + "}";
  }
  if (value.is_array()) {
    std::string out = "[";
    for (std::size_t i = 0; i < value.size(); ++i) {
      if (i) out += ", ";
      out += serialize_json(value[i]);
    }
    return out + "]";
  }
  return value.dump(-1, ' ', false, Json::error_handler_t::replace);
}

namespace {

std::string join_path(const std::vector<std::string>& path) {
  std::string out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i) out += '.';
    out += path[i];
  }
  return out;
}

void write_block(std::string& out, const std::vector<Statement>& body, int indent);

void write_statement(std::string& out, const Statement& st, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  if (const auto* a = std::get_if<Assignment>(&st.node)) {
    out += pad + a->target + " = ";
    if (a->awaited) out += "await ";
    out += a->call.api.str() + "(" + serialize_json(a->call.argument) + ");\n";
    return;
  }
  const auto& c = std::get<Conditional>(st.node);
  out += pad + "if (" + serialize_condition(c.condition) + ") {\n";
  write_block(out, c.then_branch, indent + 1);
  out += pad + "}";
  if (c.else_branch) {
    out += " else {\n";
    write_block(out, *c.else_branch, indent + 1);
    out += pad + "}";
  }
  out += "\n";
}

void write_block(std::string& out, const std::vector<Statement>& body, int indent) {
  for (const auto& st : body) write_statement(out, st, indent);
}

void visit_calls(const std::vector<Statement>& body,
                 const std::function<void(const CallExpr&)>& visit) {
  for (const auto& st : body) {
    if (const auto* a = std::get_if<Assignment>(&st.node)) {
      visit(a->call);
    } else {
      const auto& c = std::get<Conditional>(st.node);
      visit_calls(c.then_branch, visit);
      if (c.else_branch) visit_calls(*c.else_branch, visit);
    }
  }
}

}  // namespace

std::string serialize_condition(const CondExpr& cond) {
  if (const auto* cmp = std::get_if<Comparison>(&cond)) {
    return join_path(cmp->path) + " " + std::string(to_string(cmp->op)) + " " +
           serialize_json(cmp->literal);
  }
  return join_path(std::get<Truthy>(cond).path);
}

std::string serialize(const Program& program) {
  std::string out;
  write_block(out, program.statements, 0);
  if (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

void for_each_call(const Program& program,
                   const std::function<void(const CallExpr&)>& visit) {
  visit_calls(program.statements, visit);
}

std::vector<ApiName> extract_actions(const Program& program) {
  std::vector<ApiName> out;
  for_each_call(program, [&](const CallExpr& c) { out.push_back(c.api); });
  return out;
}

std::vector<ParameterUsage> extract_parameter_usages(const Program& program) {
  std::vector<ParameterUsage> out;
  for_each_call(program, [&](const CallExpr& c) {
    ParameterUsage usage{c.api, {}};
    for (const auto& [key, _] : c.argument.items()) usage.keys.push_back(key);
    out.push_back(std::move(usage));
  });
  return out;
}

std::vector<ApiName> distinct_actions(const Program& program) {
  std::set<ApiName> names;
  for_each_call(program, [&](const CallExpr& c) { names.insert(c.api); });
  return {names.begin(), names.end()};
}

std::size_t count_calls(const Program& program) {
  std::size_t n = 0;
  for_each_call(program, [&](const CallExpr&) { ++n; });
  return n;
}

std::vector<std::string> lint(const Program& program) {
  std::vector<std::string> warnings;
  const auto n = count_calls(program);
  if (n > kMaxRecommendedActions) {
    warnings.push_back("flow chains " + std::to_string(n) + " API calls; at most " +
                       std::to_string(kMaxRecommendedActions) + " are expected");
  }
  if (n == 0) warnings.push_back("flow contains no API calls");
  return warnings;
}

}  // namespace dslgen
