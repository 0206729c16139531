#include "ctsmc/toml.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace ctsmc::toml {

namespace {

struct Cursor {
  const std::string& text;
  size_t pos = 0;
  int line = 1;

  bool done() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }
  char get() {
    char c = text[pos++];
    if (c == '\n') ++line;
    return c;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ValidationError("toml parse error at line " + std::to_string(line) + ": " + msg);
  }

  void skip_ws_inline() {
    while (!done() && (peek() == ' ' || peek() == '\t')) get();
  }

  void skip_ws_and_comments() {
    while (!done()) {
      char c = peek();
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        get();
      } else if (c == '#') {
        while (!done() && peek() != '\n') get();
      } else {
        break;
      }
    }
  }
};

std::string parse_quoted(Cursor& cur) {
  cur.get();  // opening quote
  std::string out;
  while (true) {
    if (cur.done()) cur.fail("unterminated string");
    char c = cur.get();
    if (c == '"') break;
    if (c == '\\') {
      if (cur.done()) cur.fail("unterminated escape");
      char e = cur.get();
      switch (e) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        default: cur.fail(std::string("unsupported escape \\") + e);
      }
    } else {
      out.push_back(c);
    }
  }
  return out;
}

std::string parse_key(Cursor& cur) {
  cur.skip_ws_inline();
  if (cur.done()) cur.fail("expected key");
  if (cur.peek() == '"') return parse_quoted(cur);
  std::string out;
  while (!cur.done()) {
    char c = cur.peek();
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.') {
      out.push_back(cur.get());
    } else {
      break;
    }
  }
  if (out.empty()) cur.fail("expected key");
  return out;
}

Value parse_value(Cursor& cur);

Value parse_array(Cursor& cur) {
  cur.get();  // '['
  Array items;
  while (true) {
    cur.skip_ws_and_comments();
    if (cur.done()) cur.fail("unterminated array");
    if (cur.peek() == ']') {
      cur.get();
      break;
    }
    items.push_back(parse_value(cur));
    cur.skip_ws_and_comments();
    if (!cur.done() && cur.peek() == ',') {
      cur.get();
    } else if (!cur.done() && cur.peek() == ']') {
      cur.get();
      break;
    } else if (cur.done()) {
      cur.fail("unterminated array");
    } else {
      cur.fail("expected ',' or ']' in array");
    }
  }
  return Value{std::move(items)};
}

Value parse_value(Cursor& cur) {
  cur.skip_ws_inline();
  if (cur.done()) cur.fail("expected value");
  char c = cur.peek();
  if (c == '"') return Value{parse_quoted(cur)};
  if (c == '[') return parse_array(cur);
  std::string raw;
  while (!cur.done()) {
    char p = cur.peek();
    if (p == '\n' || p == '\r' || p == ',' || p == ']' || p == '#') break;
    raw.push_back(cur.get());
  }
  while (!raw.empty() && (raw.back() == ' ' || raw.back() == '\t')) raw.pop_back();
  if (raw == "true") return Value{true};
  if (raw == "false") return Value{false};
  if (raw.empty()) cur.fail("empty value");
  double num = 0;
  auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), num);
  if (ec != std::errc() || ptr != raw.data() + raw.size())
    cur.fail("cannot parse value '" + raw + "' (strings must be quoted)");
  return Value{num};
}

}  // namespace

Document parse(const std::string& text) {
  Document doc;
  Cursor cur{text};
  std::string current;
  doc.sections[current];
  while (true) {
    cur.skip_ws_and_comments();
    if (cur.done()) break;
    if (cur.peek() == '[') {
      cur.get();
      std::string name;
      while (!cur.done() && cur.peek() != ']') {
        char c = cur.get();
        if (c == '\n') cur.fail("unterminated section header");
        if (c != ' ' && c != '\t') name.push_back(c);
      }
      if (cur.done()) cur.fail("unterminated section header");
      cur.get();  // ']'
      if (name.empty()) cur.fail("empty section name");
      current = name;
      doc.sections[current];
    } else {
      std::string key = parse_key(cur);
      cur.skip_ws_inline();
      if (cur.done() || cur.peek() != '=') cur.fail("expected '=' after key '" + key + "'");
      cur.get();
      Value v = parse_value(cur);
      auto& table = doc.sections[current];
      if (table.values.count(key)) cur.fail("duplicate key '" + key + "'");
      table.values.emplace(key, std::move(v));
    }
  }
  return doc;
}

Document parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace ctsmc::toml
