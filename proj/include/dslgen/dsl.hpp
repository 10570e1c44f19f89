#pragma once

// Workflow-automation DSL: AST, parser, canonical serializer and traversals.
//
// Grammar (whitespace and newlines between tokens are insignificant):
//
//   program     := statement+
//   statement   := assignment | conditional
//   assignment  := IDENT '=' ['await'] api_name '(' object ')' ';'
//   api_name    := IDENT '.' IDENT
//   conditional := 'if' '(' cond ')' block [ 'else' ( block | conditional ) ] [';']
//   block       := '{' statement* '}'
//   cond        := path [ op literal ]
//   path        := IDENT ( '.' IDENT )*
//   op          := '==' | '!=' | '<' | '<=' | '>' | '>='
//   literal     := string | number | 'true' | 'false' | 'null'
//
// `object` is a JSON object literal. Duplicate keys are a syntax error.

#include <compare>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

namespace dslgen {

using Json = nlohmann::ordered_json;

// Canonical "namespace.function". Comparison is exact and case-sensitive.
struct ApiName {
  std::string ns;
  std::string function;

  std::string str() const { return ns + "." + function; }

  // Throws std::invalid_argument unless `text` has exactly one dot with
  // non-empty identifier parts on both sides.
  static ApiName from_string(std::string_view text);

  auto operator<=>(const ApiName&) const = default;
  bool operator==(const ApiName&) const = default;
};

struct CallExpr {
  ApiName api;
  Json argument = Json::object();  // always a JSON object

  bool operator==(const CallExpr&) const = default;
};

enum class CompareOp { Eq, Ne, Lt, Le, Gt, Ge };

std::string_view to_string(CompareOp op);

struct Comparison {
  std::vector<std::string> path;
  CompareOp op = CompareOp::Eq;
  Json literal;  // scalar: string, number, bool or null

  bool operator==(const Comparison&) const = default;
};

struct Truthy {
  std::vector<std::string> path;

  bool operator==(const Truthy&) const = default;
};

using CondExpr = std::variant<Comparison, Truthy>;

struct Statement;

struct Assignment {
  std::string target;
  bool awaited = false;
  CallExpr call;

  bool operator==(const Assignment&) const = default;
};

struct Conditional {
  CondExpr condition;
  std::vector<Statement> then_branch;
  std::optional<std::vector<Statement>> else_branch;

  bool operator==(const Conditional& other) const;
};

struct Statement {
  std::variant<Assignment, Conditional> node;

  bool operator==(const Statement&) const = default;
};

struct Program {
  std::vector<Statement> statements;

  bool operator==(const Program&) const = default;
};

struct ParseError {
  std::size_t offset = 0;  // byte offset into the source
  std::size_t line = 1;    // 1-based
  std::size_t col = 1;     // 1-based, in bytes
  std::string expected;
  std::string found;

  std::string message() const;
  Json to_json() const;

  bool operator==(const ParseError&) const = default;
};

class ParseException : public std::runtime_error {
 public:
  explicit ParseException(ParseError error);
  const ParseError& error() const noexcept { return error_; }

 private:
  ParseError error_;
};

struct ParseResult {
  std::optional<Program> program;
  std::optional<ParseError> error;

  bool ok() const { return program.has_value(); }
};

// Total: returns either a program or an error for any byte string.
ParseResult try_parse(std::string_view source);

// Throws ParseException on syntax errors.
Program parse(std::string_view source);

// Canonical text form: one statement per line, nested blocks indented by two
// spaces, JSON rendered with ": " and ", " separators in stored key order.
std::string serialize(const Program& program);
std::string serialize_json(const Json& value);
std::string serialize_condition(const CondExpr& cond);

bool is_identifier(std::string_view text);

// Depth-first, source-order visit of every call, including both branches of
// every conditional.
void for_each_call(const Program& program,
                   const std::function<void(const CallExpr&)>& visit);

std::vector<ApiName> extract_actions(const Program& program);

struct ParameterUsage {
  ApiName api;
  std::vector<std::string> keys;  // top-level argument keys, stored order

  bool operator==(const ParameterUsage&) const = default;
};

std::vector<ParameterUsage> extract_parameter_usages(const Program& program);

// Distinct API names, sorted.
std::vector<ApiName> distinct_actions(const Program& program);

std::size_t count_calls(const Program& program);

// Flows are expected to chain at most this many calls. Longer flows still
// parse and score; lint() reports them.
inline constexpr std::size_t kMaxRecommendedActions = 5;

std::vector<std::string> lint(const Program& program);

}  // namespace dslgen

template <>
struct std::hash<dslgen::ApiName> {
  std::size_t operator()(const dslgen::ApiName& name) const noexcept {
    return std::hash<std::string>{}(name.ns) * 31u ^
           std::hash<std::string>{}(name.function);
  }
};
