#ifndef CTSMC_TOML_HPP
#define CTSMC_TOML_HPP

#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "ctsmc/common.hpp"

namespace ctsmc::toml {

// Minimal TOML subset: [section] / [section.sub] headers, `key = value` pairs
// with string, bool, number and (nested) array values, quoted keys, and `#`
// comments. Enough for model and run-config files; not a general TOML parser.

struct Value;
using Array = std::vector<Value>;

struct Value {
  std::variant<std::string, double, bool, Array> data;

  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_number() const { return std::holds_alternative<double>(data); }
  bool is_bool() const { return std::holds_alternative<bool>(data); }
  bool is_array() const { return std::holds_alternative<Array>(data); }

  const std::string& as_string() const {
    if (!is_string()) throw ValidationError("expected string value");
    return std::get<std::string>(data);
  }
  double as_number() const {
    if (!is_number()) throw ValidationError("expected numeric value");
    return std::get<double>(data);
  }
  bool as_bool() const {
    if (!is_bool()) throw ValidationError("expected boolean value");
    return std::get<bool>(data);
  }
  const Array& as_array() const {
    if (!is_array()) throw ValidationError("expected array value");
    return std::get<Array>(data);
  }
};

struct Table {
  // key -> value within one section; section order preserved separately.
  std::map<std::string, Value> values;

  bool has(const std::string& key) const { return values.count(key) > 0; }
  const Value& at(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) throw ValidationError("missing key '" + key + "'");
    return it->second;
  }
};

struct Document {
  std::map<std::string, Table> sections;  // "" is the root section

  bool has_section(const std::string& name) const { return sections.count(name) > 0; }
  const Table& section(const std::string& name) const {
    auto it = sections.find(name);
    if (it == sections.end()) throw ValidationError("missing section [" + name + "]");
    return it->second;
  }
};

Document parse(const std::string& text);
Document parse_file(const std::string& path);

}  // namespace ctsmc::toml

#endif
