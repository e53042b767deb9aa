#include "sigbench/harness/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sigbench::harness {
namespace {

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
  throw std::runtime_error(origin + ":" + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& s) {
  bool in_quotes = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_quotes = !in_quotes;
    if (s[i] == '#' && !in_quotes) return s.substr(0, i);
  }
  return s;
}

struct Scanner {
  const std::string& text;
  std::size_t pos = 0;
  const std::string& origin;
  int line;

  void skip_space() {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  }
  bool done() {
    skip_space();
    return pos >= text.size();
  }
};

ConfigValue parse_value(Scanner& sc);

ConfigValue parse_scalar(Scanner& sc) {
  sc.skip_space();
  ConfigValue v;
  v.line = sc.line;
  if (sc.pos >= sc.text.size()) fail(sc.origin, sc.line, "missing value");
  const char c = sc.text[sc.pos];
  if (c == '"') {
    ++sc.pos;
    std::string out;
    while (sc.pos < sc.text.size() && sc.text[sc.pos] != '"') {
      if (sc.text[sc.pos] == '\\' && sc.pos + 1 < sc.text.size()) {
        ++sc.pos;
        switch (sc.text[sc.pos]) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case '\\': out.push_back('\\'); break;
          case '"': out.push_back('"'); break;
          default: fail(sc.origin, sc.line, "unsupported escape in string");
        }
      } else {
        out.push_back(sc.text[sc.pos]);
      }
      ++sc.pos;
    }
    if (sc.pos >= sc.text.size()) fail(sc.origin, sc.line, "unterminated string");
    ++sc.pos;  // closing quote
    v.type = ConfigValue::Type::String;
    v.str = out;
    return v;
  }
  // bare token: bool or number
  std::size_t end = sc.pos;
  while (end < sc.text.size() && sc.text[end] != ',' && sc.text[end] != ']' &&
         sc.text[end] != ' ' && sc.text[end] != '\t')
    ++end;
  const std::string tok = sc.text.substr(sc.pos, end - sc.pos);
  sc.pos = end;
  if (tok == "true" || tok == "false") {
    v.type = ConfigValue::Type::Bool;
    v.boolean = tok == "true";
    return v;
  }
  try {
    std::size_t used = 0;
    v.num = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    fail(sc.origin, sc.line, "cannot parse value '" + tok + "'");
  }
  v.type = ConfigValue::Type::Number;
  return v;
}

ConfigValue parse_value(Scanner& sc) {
  sc.skip_space();
  if (sc.pos < sc.text.size() && sc.text[sc.pos] == '[') {
    ConfigValue v;
    v.type = ConfigValue::Type::Array;
    v.line = sc.line;
    ++sc.pos;
    sc.skip_space();
    if (sc.pos < sc.text.size() && sc.text[sc.pos] == ']') {
      ++sc.pos;
      return v;
    }
    while (true) {
      v.items.push_back(parse_scalar(sc));
      sc.skip_space();
      if (sc.pos >= sc.text.size()) fail(sc.origin, sc.line, "unterminated array");
      if (sc.text[sc.pos] == ',') {
        ++sc.pos;
        continue;
      }
      if (sc.text[sc.pos] == ']') {
        ++sc.pos;
        return v;
      }
      fail(sc.origin, sc.line, "expected ',' or ']' in array");
    }
  }
  return parse_scalar(sc);
}

bool valid_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
}

std::string render(const ConfigValue& v) {
  switch (v.type) {
    case ConfigValue::Type::String: return "\"" + v.str + "\"";
    case ConfigValue::Type::Bool: return v.boolean ? "true" : "false";
    case ConfigValue::Type::Number: {
      char buf[48];
      std::snprintf(buf, sizeof buf, "%.17g", v.num);
      return buf;
    }
    case ConfigValue::Type::Array: {
      std::string out = "[";
      for (std::size_t i = 0; i < v.items.size(); ++i) {
        if (i) out += ", ";
        out += render(v.items[i]);
      }
      return out + "]";
    }
  }
  return "";
}

}  // namespace

Config Config::parse_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config file: " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str(), file.string());
}

Config Config::parse_string(const std::string& text, const std::string& origin) {
  Config cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(origin, line_no, "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) fail(origin, line_no, "empty section name");
      for (char c : section)
        if (!valid_key_char(c)) fail(origin, line_no, "bad character in section name");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail(origin, line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) fail(origin, line_no, "empty key");
    for (char c : key)
      if (!valid_key_char(c)) fail(origin, line_no, "bad character in key '" + key + "'");

    const std::string value_text = trim(line.substr(eq + 1));
    Scanner sc{value_text, 0, origin, line_no};
    ConfigValue value = parse_value(sc);
    if (!sc.done()) fail(origin, line_no, "trailing characters after value");

    const std::string full = section.empty() ? key : section + "." + key;
    if (cfg.values_.count(full)) fail(origin, line_no, "duplicate key '" + full + "'");
    cfg.values_[full] = std::move(value);
  }
  return cfg;
}

const ConfigValue* Config::find(const std::string& key) const {
  auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const ConfigValue* v = find(key);
  if (!v) return fallback;
  if (v->type != ConfigValue::Type::String)
    throw std::runtime_error("config key '" + key + "' is not a string");
  return v->str;
}

double Config::get_double(const std::string& key, double fallback) const {
  const ConfigValue* v = find(key);
  if (!v) return fallback;
  if (v->type != ConfigValue::Type::Number)
    throw std::runtime_error("config key '" + key + "' is not a number");
  return v->num;
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
  const ConfigValue* v = find(key);
  if (!v) return fallback;
  if (v->type != ConfigValue::Type::Number || v->num != std::floor(v->num))
    throw std::runtime_error("config key '" + key + "' is not an integer");
  return static_cast<std::int64_t>(v->num);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const ConfigValue* v = find(key);
  if (!v) return fallback;
  if (v->type != ConfigValue::Type::Bool)
    throw std::runtime_error("config key '" + key + "' is not a boolean");
  return v->boolean;
}

std::vector<std::string> Config::get_string_array(const std::string& key) const {
  const ConfigValue* v = find(key);
  if (!v) return {};
  if (v->type != ConfigValue::Type::Array)
    throw std::runtime_error("config key '" + key + "' is not an array");
  std::vector<std::string> out;
  for (const auto& item : v->items) {
    if (item.type != ConfigValue::Type::String)
      throw std::runtime_error("config key '" + key + "' has a non-string element");
    out.push_back(item.str);
  }
  return out;
}

std::vector<double> Config::get_double_array(const std::string& key) const {
  const ConfigValue* v = find(key);
  if (!v) return {};
  if (v->type != ConfigValue::Type::Array)
    throw std::runtime_error("config key '" + key + "' is not an array");
  std::vector<double> out;
  for (const auto& item : v->items) {
    if (item.type != ConfigValue::Type::Number)
      throw std::runtime_error("config key '" + key + "' has a non-numeric element");
    out.push_back(item.num);
  }
  return out;
}

std::vector<std::int64_t> Config::get_int_array(const std::string& key) const {
  std::vector<std::int64_t> out;
  for (double d : get_double_array(key)) {
    if (d != std::floor(d))
      throw std::runtime_error("config key '" + key + "' has a non-integer element");
    out.push_back(static_cast<std::int64_t>(d));
  }
  return out;
}

std::vector<std::string> Config::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) out.push_back(k);
  return out;
}

std::vector<std::string> Config::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (k.rfind(prefix, 0) == 0) out.push_back(k);
  return out;
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    out += k;
    out += " = ";
    out += render(v);
    out += "\n";
  }
  return out;
}

void Config::set_string(const std::string& key, const std::string& value) {
  ConfigValue v;
  v.type = ConfigValue::Type::String;
  v.str = value;
  values_[key] = v;
}

void Config::set_number(const std::string& key, double value) {
  ConfigValue v;
  v.type = ConfigValue::Type::Number;
  v.num = value;
  values_[key] = v;
}

void Config::set_bool(const std::string& key, bool value) {
  ConfigValue v;
  v.type = ConfigValue::Type::Bool;
  v.boolean = value;
  values_[key] = v;
}

std::string config_hash(const std::string& canonical_text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical_text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace sigbench::harness
