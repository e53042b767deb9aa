#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace sigbench::harness {

// Minimal TOML-style configuration: [section.sub] headers, key = value
// lines, # comments. Values are strings, numbers, booleans, or flat arrays.
struct ConfigValue {
  enum class Type { String, Number, Bool, Array };
  Type type = Type::String;
  std::string str;
  double num = 0.0;
  bool boolean = false;
  std::vector<ConfigValue> items;
  int line = 0;
};

class Config {
 public:
  static Config parse_file(const std::filesystem::path& file);
  static Config parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_string_array(const std::string& key) const;
  std::vector<double> get_double_array(const std::string& key) const;
  std::vector<std::int64_t> get_int_array(const std::string& key) const;

  // Full dotted key list, sorted; used for unknown-key validation and for
  // the canonical content hash.
  std::vector<std::string> keys() const;
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  // Canonical "key = value" rendering, sorted by key.
  std::string canonical() const;

  void set_string(const std::string& key, const std::string& value);
  void set_number(const std::string& key, double value);
  void set_bool(const std::string& key, bool value);

 private:
  const ConfigValue* find(const std::string& key) const;
  std::map<std::string, ConfigValue> values_;
  std::string origin_;
};

// FNV-1a over the canonical rendering; stable across runs and platforms.
std::string config_hash(const std::string& canonical_text);

}  // namespace sigbench::harness
