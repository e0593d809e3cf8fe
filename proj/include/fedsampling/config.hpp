// Copyright 2026 The FedSampling Simulator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Reader and writer for the subset of TOML used by experiment files:
//
//   # comment
//   [table]            (dotted names allowed: [a.b])
//   key = "string" | 123 | 1.5e-3 | true | [1, 2, 3] | ["a", "b"]
//
// Arrays are single-line and hold scalars only. Keys are flattened to
// "table.key". Doubles are written with 17 significant digits and always
// carry a '.' or exponent so they re-read as doubles.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "fedsampling/error.hpp"

namespace fedsampling::toml {

struct Value;
using Array = std::vector<Value>;

struct Value {
  std::variant<bool, std::int64_t, double, std::string, Array> v;

  Value() : v(std::int64_t{0}) {}
  Value(bool b) : v(b) {}
  Value(int i) : v(std::int64_t{i}) {}
  Value(std::int64_t i) : v(i) {}
  Value(std::uint64_t i) : v(static_cast<std::int64_t>(i)) {}
  Value(double d) : v(d) {}
  Value(const char* s) : v(std::string(s)) {}
  Value(std::string s) : v(std::move(s)) {}
  Value(Array a) : v(std::move(a)) {}

  bool operator==(const Value& o) const { return v == o.v; }
};

using Table = std::map<std::string, Value>;

class ParseError : public InvalidArgument {
 public:
  ParseError(std::size_t line, const std::string& what)
      : InvalidArgument("config line " + std::to_string(line) + ": " + what) {}
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool valid_bare_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  return true;
}

// Strips a trailing comment that is not inside a basic or literal string.
inline std::string strip_comment(const std::string& s) {
  char quote = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quote == '"' && c == '\\') {
      ++i;
    } else if (quote && c == quote) {
      quote = 0;
    } else if (!quote && (c == '"' || c == '\'')) {
      quote = c;
    } else if (!quote && c == '#') {
      return s.substr(0, i);
    }
  }
  return s;
}

class ValueParser {
 public:
  ValueParser(const std::string& text, std::size_t line) : s_(text), line_(line) {}

  Value parse_all() {
    Value v = parse_value(true);
    skip_ws();
    if (pos_ != s_.size()) fail("trailing characters after value");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(line_, what); }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  Value parse_value(bool allow_array) {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"') return parse_string();
    if (c == '\'') return parse_literal();
    if (c == '[') {
      if (!allow_array) fail("nested arrays are not supported");
      return parse_array();
    }
    return parse_scalar();
  }

  Value parse_string() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) fail("unterminated escape");
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out.push_back(c);
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return Value(std::move(out));
  }

  // 'literal': no escapes.
  Value parse_literal() {
    const auto end = s_.find('\'', pos_ + 1);
    if (end == std::string::npos) fail("unterminated string");
    std::string out = s_.substr(pos_ + 1, end - pos_ - 1);
    pos_ = end + 1;
    return Value(std::move(out));
  }

  Value parse_array() {
    ++pos_;
    Array items;
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return Value(std::move(items));
    }
    for (;;) {
      items.push_back(parse_value(false));
      skip_ws();
      if (pos_ >= s_.size()) fail("unterminated array");
      if (s_[pos_] == ',') {
        ++pos_;
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ']') {
          ++pos_;
          break;
        }
        continue;
      }
      if (s_[pos_] == ']') {
        ++pos_;
        break;
      }
      fail("expected ',' or ']' in array");
    }
    return Value(std::move(items));
  }

  Value parse_scalar() {
    const auto start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != ' ' && s_[pos_] != '\t') ++pos_;
    std::string tok = s_.substr(start, pos_ - start);
    if (tok == "true") return Value(true);
    if (tok == "false") return Value(false);
    if (tok == "inf" || tok == "+inf") return Value(std::numeric_limits<double>::infinity());
    std::string clean;
    for (char c : tok)
      if (c != '_') clean.push_back(c);
    const bool is_float = clean.find_first_of(".eE") != std::string::npos;
    const char* b = clean.data();
    const char* e = b + clean.size();
    if (!clean.empty() && *b == '+') ++b;
    if (is_float) {
      double d = 0.0;
      auto [p, ec] = std::from_chars(b, e, d);
      if (ec != std::errc() || p != e) fail("invalid number '" + tok + "'");
      return Value(d);
    }
    std::int64_t i = 0;
    auto [p, ec] = std::from_chars(b, e, i);
    if (ec != std::errc() || p != e) fail("invalid value '" + tok + "'");
    return Value(i);
  }

  const std::string& s_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

inline std::string format_double(double d) {
  if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), d);
  std::string s(buf, p);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

inline std::string escape(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out.push_back(c);
    }
  }
  return out + "\"";
}

}  // namespace detail

inline Value parse_value(const std::string& text, std::size_t line = 0) {
  return detail::ValueParser(text, line).parse_all();
}

inline std::string format_value(const Value& v) {
  struct Visitor {
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(double d) const { return detail::format_double(d); }
    std::string operator()(const std::string& s) const { return detail::escape(s); }
    std::string operator()(const Array& a) const {
      std::string out = "[";
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (i) out += ", ";
        out += format_value(a[i]);
      }
      return out + "]";
    }
  };
  return std::visit(Visitor{}, v.v);
}

inline Table parse(const std::string& text) {
  Table out;
  std::istringstream in(text);
  std::string raw, prefix;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = detail::trim(detail::strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(lineno, "malformed table header");
      const std::string name = detail::trim(line.substr(1, line.size() - 2));
      if (!detail::valid_bare_key(name)) throw ParseError(lineno, "invalid table name '" + name + "'");
      prefix = name + ".";
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected key = value");
    std::string key = detail::trim(line.substr(0, eq));
    if (key.size() >= 2 && key.front() == '"' && key.back() == '"') key = key.substr(1, key.size() - 2);
    if (!detail::valid_bare_key(key)) throw ParseError(lineno, "invalid key '" + key + "'");
    const std::string full = prefix + key;
    if (out.count(full)) throw ParseError(lineno, "duplicate key '" + full + "'");
    out[full] = parse_value(detail::trim(line.substr(eq + 1)), lineno);
  }
  return out;
}

inline Table parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config not found: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

// Groups keys by their table (text before the last '.'); top-level keys
// first, tables in sorted order.
inline std::string serialize(const Table& t) {
  std::map<std::string, std::vector<std::pair<std::string, const Value*>>> groups;
  for (const auto& [k, v] : t) {
    const auto dot = k.rfind('.');
    if (dot == std::string::npos) {
      groups[""].push_back({k, &v});
    } else {
      groups[k.substr(0, dot)].push_back({k.substr(dot + 1), &v});
    }
  }
  std::string out;
  for (const auto& [table, entries] : groups) {
    if (!table.empty()) out += (out.empty() ? "" : "\n") + std::string("[") + table + "]\n";
    for (const auto& [k, v] : entries) out += k + " = " + format_value(*v) + "\n";
  }
  return out;
}

}  // namespace fedsampling::toml
