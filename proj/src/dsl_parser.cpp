#include <algorithm>
#include <cstdio>
#include <string>
#include <utility>

#include "dslgen/dsl.hpp"

namespace dslgen {

namespace {

// Blocks and JSON values nest recursively; anything deeper is rejected so
// adversarial input cannot exhaust the stack.
constexpr std::size_t kMaxNesting = 200;

enum class TokKind { Ident, String, Number, Punct, End };

struct Token {
  TokKind kind = TokKind::End;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string_view text;
};

bool is_ident_start(unsigned char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
}

bool is_ident_char(unsigned char c) {
  return is_ident_start(c) || (c >= '0' && c <= '9');
}

bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

bool is_keyword(std::string_view text) {
  return text == "if" || text == "else" || text == "await" || text == "true" ||
         text == "false" || text == "null";
}

struct SyntaxError {
  ParseError error;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) { advance(); }

  Program program() {
    Program out;
    if (tok_.kind == TokKind::End) fail(tok_, "statement");
    while (tok_.kind != TokKind::End) out.statements.push_back(statement());
    return out;
  }

 private:
  [[noreturn]] void fail_at(std::size_t offset, std::string expected,
                            std::string found) {
    ParseError e;
    e.offset = offset;
    e.expected = std::move(expected);
    e.found = std::move(found);
    for (std::size_t i = 0; i < offset && i < src_.size(); ++i) {
      if (src_[i] == '\n') {
        ++e.line;
        e.col = 1;
      } else {
        ++e.col;
      }
    }
    throw SyntaxError{std::move(e)};
  }

  [[noreturn]] void fail(const Token& t, std::string expected) {
    fail_at(t.begin, std::move(expected), describe(t));
  }

  static std::string describe(const Token& t) {
    switch (t.kind) {
      case TokKind::End:
        return "end of input";
      case TokKind::String:
        return "string literal";
      case TokKind::Number:
        return "number " + std::string(t.text);
      default:
        return "'" + std::string(t.text) + "'";
    }
  }

  static std::string describe_byte(unsigned char c) {
    if (c >= 0x20 && c < 0x7f) return std::string("'") + char(c) + "'";
    char buf[8];
    std::snprintf(buf, sizeof buf, "0x%02X", c);
    return std::string("byte ") + buf;
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
          c == '\v') {
        ++pos_;
      } else {
        break;
      }
    }
  }

  void advance() {
    skip_space();
    Token t;
    t.begin = pos_;
    if (pos_ >= src_.size()) {
      t.kind = TokKind::End;
      t.end = pos_;
      tok_ = t;
      return;
    }
    auto c = static_cast<unsigned char>(src_[pos_]);
    if (is_ident_start(c)) {
      std::size_t p = pos_ + 1;
      while (p < src_.size() && is_ident_char(src_[p])) ++p;
      t.kind = TokKind::Ident;
      t.end = p;
    } else if (c == '"') {
      std::size_t p = pos_ + 1;
      bool closed = false;
      while (p < src_.size()) {
        if (src_[p] == '\\') {
          p += 2;
        } else if (src_[p] == '"') {
          ++p;
          closed = true;
          break;
        } else {
          ++p;
        }
      }
      if (!closed) fail_at(pos_, "closing '\"'", "end of input");
      t.kind = TokKind::String;
      t.end = p;
    } else if (c == '-' || is_digit(c)) {
      t.kind = TokKind::Number;
      t.end = scan_number(pos_);
    } else {
      static constexpr std::string_view two[] = {"==", "!=", "<=", ">="};
      std::string_view rest = src_.substr(pos_);
      t.kind = TokKind::Punct;
      t.end = pos_ + 1;
      for (auto op : two) {
        if (rest.starts_with(op)) t.end = pos_ + 2;
      }
      if (t.end == pos_ + 1 && std::string_view("=;(){}.,:[]<>").find(char(c)) ==
                                   std::string_view::npos) {
        fail_at(pos_, "token", describe_byte(c));
      }
    }
    t.text = src_.substr(t.begin, t.end - t.begin);
    pos_ = t.end;
    tok_ = t;
  }

  // JSON number grammar: -?(0|[1-9][0-9]*)(\.[0-9]+)?([eE][+-]?[0-9]+)?
  std::size_t scan_number(std::size_t p) {
    const std::size_t start = p;
    auto at = [&](std::size_t i) -> unsigned char {
      return i < src_.size() ? static_cast<unsigned char>(src_[i]) : 0;
    };
    if (at(p) == '-') ++p;
    if (at(p) == '0') {
      ++p;
    } else if (is_digit(at(p))) {
      while (is_digit(at(p))) ++p;
    } else {
      fail_at(p, "digit", p < src_.size() ? describe_byte(at(p)) : "end of input");
    }
    if (at(p) == '.') {
      ++p;
      if (!is_digit(at(p))) fail_at(p, "digit after '.'", p < src_.size() ? describe_byte(at(p)) : "end of input");
      while (is_digit(at(p))) ++p;
    }
    if (at(p) == 'e' || at(p) == 'E') {
      ++p;
      if (at(p) == '+' || at(p) == '-') ++p;
      if (!is_digit(at(p))) fail_at(p, "exponent digits", p < src_.size() ? describe_byte(at(p)) : "end of input");
      while (is_digit(at(p))) ++p;
    }
    if (is_ident_char(at(p))) fail_at(start, "number", "malformed number");
    return p;
  }

  bool is_punct(std::string_view p) const {
    return tok_.kind == TokKind::Punct && tok_.text == p;
  }

  bool is_word(std::string_view w) const {
    return tok_.kind == TokKind::Ident && tok_.text == w;
  }

  void expect_punct(std::string_view p) {
    if (!is_punct(p)) fail(tok_, "'" + std::string(p) + "'");
    advance();
  }

  std::string identifier(std::string_view what) {
    if (tok_.kind != TokKind::Ident || is_keyword(tok_.text)) fail(tok_, std::string(what));
    std::string out(tok_.text);
    advance();
    return out;
  }

  void enter(const Token& at) {
    if (++depth_ > kMaxNesting) fail_at(at.begin, "shallower nesting", "nesting deeper than 200");
  }
  void leave() { --depth_; }

  Statement statement() {
    if (is_word("if")) return Statement{conditional()};
    if (tok_.kind != TokKind::Ident) fail(tok_, "statement");
    if (is_keyword(tok_.text)) fail(tok_, "statement");
    Assignment a;
    a.target = identifier("assignment target");
    expect_punct("=");
    if (is_word("await")) {
      a.awaited = true;
      advance();
    }
    a.call = call();
    expect_punct(";");
    return Statement{std::move(a)};
  }

  CallExpr call() {
    CallExpr c;
    c.api.ns = identifier("API namespace");
    expect_punct(".");
    c.api.function = identifier("API function name");
    expect_punct("(");
    if (!is_punct("{")) fail(tok_, "JSON object argument");
    c.argument = object();
    if (is_punct(",")) fail(tok_, "')' (calls take exactly one argument)");
    expect_punct(")");
    return c;
  }

  Conditional conditional() {
    const Token start = tok_;
    enter(start);
    advance();  // 'if'
    Conditional c;
    expect_punct("(");
    c.condition = condition();
    expect_punct(")");
    c.then_branch = block();
    if (is_word("else")) {
      advance();
      if (is_word("if")) {
        std::vector<Statement> nested;
        nested.push_back(Statement{conditional()});
        c.else_branch = std::move(nested);
        leave();
        return c;
      }
      c.else_branch = block();
    }
    if (is_punct(";")) advance();
    leave();
    return c;
  }

  std::vector<Statement> block() {
    expect_punct("{");
    std::vector<Statement> out;
    while (!is_punct("}")) {
      if (tok_.kind == TokKind::End) fail(tok_, "'}'");
      out.push_back(statement());
    }
    advance();
    return out;
  }

  std::vector<std::string> path() {
    std::vector<std::string> out;
    out.push_back(identifier("member path"));
    while (is_punct(".")) {
      advance();
      out.push_back(identifier("member name"));
    }
    return out;
  }

  CondExpr condition() {
    auto p = path();
    static constexpr std::pair<std::string_view, CompareOp> ops[] = {
        {"==", CompareOp::Eq}, {"!=", CompareOp::Ne}, {"<", CompareOp::Lt},
        {"<=", CompareOp::Le}, {">", CompareOp::Gt},  {">=", CompareOp::Ge}};
    for (auto [text, op] : ops) {
      if (is_punct(text)) {
        advance();
        Comparison cmp;
        cmp.path = std::move(p);
        cmp.op = op;
        cmp.literal = scalar("literal");
        return cmp;
      }
    }
    return Truthy{std::move(p)};
  }

  Json scalar(std::string_view what) {
    if (tok_.kind == TokKind::String) return string_value();
    if (tok_.kind == TokKind::Number) return number_value();
    if (is_word("true") || is_word("false") || is_word("null")) {
      Json v = is_word("null") ? Json(nullptr) : Json(is_word("true"));
      advance();
      return v;
    }
    fail(tok_, std::string(what));
  }

  Json string_value() {
    Json v;
    try {
      v = Json::parse(tok_.text);
    } catch (const nlohmann::json::exception&) {
      fail_at(tok_.begin, "valid JSON string", "malformed string literal");
    }
    advance();
    return v;
  }

  Json number_value() {
    Json v;
    try {
      v = Json::parse(tok_.text);
    } catch (const nlohmann::json::exception&) {
      fail_at(tok_.begin, "valid JSON number", "malformed number");
    }
    advance();
    return v;
  }

  Json value() {
    if (is_punct("{")) return object();
    if (is_punct("[")) return array();
    return scalar("JSON value");
  }

  Json object() {
    const Token start = tok_;
    enter(start);
    advance();  // '{'
    Json out = Json::object();
    if (is_punct("}")) {
      advance();
      leave();
      return out;
    }
    while (true) {
      if (tok_.kind != TokKind::String) fail(tok_, "object key string");
      const Token key_tok = tok_;
      std::string key = string_value().get<std::string>();
      if (out.contains(key)) fail_at(key_tok.begin, "unique object key", "duplicate key \"" + key + "\"");
      expect_punct(":");
      out[key] = value();
      if (is_punct(",")) {
        advance();
        continue;
      }
      if (is_punct("}")) {
        advance();
        break;
      }
      fail(tok_, "',' or '}'");
    }
    leave();
    return out;
  }

  Json array() {
    const Token start = tok_;
    enter(start);
    advance();  // '['
    Json out = Json::array();
    if (is_punct("]")) {
      advance();
      leave();
      return out;
    }
    while (true) {
      out.push_back(value());
      if (is_punct(",")) {
        advance();
        continue;
      }
      if (is_punct("]")) {
        advance();
        break;
      }
      fail(tok_, "',' or ']'");
    }
    leave();
    return out;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t depth_ = 0;
  Token tok_;
};

}  // namespace

std::string ParseError::message() const {
  return "line " + std::to_string(line) + ", column " + std::to_string(col) +
         ": expected " + expected + ", found " + found;
}

Json ParseError::to_json() const {
  Json j;
  j["offset"] = offset;
  j["line"] = line;
  j["col"] = col;
  j["expected"] = expected;
  j["found"] = found;
  return j;
}

ParseException::ParseException(ParseError error)
    : std::runtime_error(error.message()), error_(std::move(error)) {}

ParseResult try_parse(std::string_view source) {
  ParseResult result;
  try {
    Parser parser(source);
    result.program = parser.program();
  } catch (SyntaxError& e) {
    result.error = std::move(e.error);
  }
  return result;
}

Program parse(std::string_view source) {
  auto result = try_parse(source);
  if (!result.ok()) throw ParseException(std::move(*result.error));
  return std::move(*result.program);
}

}  // namespace dslgen
