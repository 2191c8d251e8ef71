#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace tamatch {

// Flat "section.key" -> raw value store behind the TOML-subset config files:
// [section] headers, key = value lines, '#' comments, scalars (number, bool,
// quoted or bare string) and flat arrays of scalars. Values are kept as raw
// text and parsed by the typed getters, so flag overrides can be layered in
// as strings and the resolved config can be echoed verbatim.
class ConfigMap {
 public:
  static ConfigMap parse_file(const std::string& path);
  static ConfigMap parse_string(const std::string& text);

  // Later layers win; used for defaults -> file -> flag resolution.
  void merge_over(const ConfigMap& overrides);
  void set(const std::string& key, const std::string& raw_value);
  bool has(const std::string& key) const;

  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<std::int64_t> get_int_list(const std::string& key) const;
  std::vector<std::string> get_string_list(const std::string& key) const;

  double get_double(const std::string& key, double dflt) const;
  std::int64_t get_int(const std::string& key, std::int64_t dflt) const;
  bool get_bool(const std::string& key, bool dflt) const;
  std::string get_string(const std::string& key, const std::string& dflt) const;

  // Sorted view of every entry, for the manifest echo.
  const std::map<std::string, std::string>& entries() const { return values_; }

  // Serialize back to the file format, sections sorted, keys sorted.
  std::string dump() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace tamatch
