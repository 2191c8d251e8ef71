#include "tamatch/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "tamatch/error.hpp"

namespace tamatch {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Strip a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string unquote(const std::string& raw) {
  if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
    return raw.substr(1, raw.size() - 2);
  }
  return raw;
}

std::vector<std::string> split_array(const std::string& key,
                                     const std::string& raw) {
  require(raw.size() >= 2 && raw.front() == '[' && raw.back() == ']',
          ErrorCode::kConfigError, key + ": expected an array [..]");
  std::vector<std::string> items;
  std::string body = raw.substr(1, raw.size() - 2);
  std::istringstream in(body);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

double parse_double(const std::string& key, const std::string& raw) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(raw, &pos);
    require(pos == raw.size(), ErrorCode::kConfigError,
            key + ": trailing characters in number '" + raw + "'");
    return v;
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::kConfigError,
                key + ": expected a number, got '" + raw + "'");
  }
}

std::int64_t parse_int(const std::string& key, const std::string& raw) {
  std::int64_t v = 0;
  const auto res = std::from_chars(raw.data(), raw.data() + raw.size(), v);
  require(res.ec == std::errc{} && res.ptr == raw.data() + raw.size(),
          ErrorCode::kConfigError,
          key + ": expected an integer, got '" + raw + "'");
  return v;
}

}  // namespace

ConfigMap ConfigMap::parse_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIoError, "cannot open config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

ConfigMap ConfigMap::parse_string(const std::string& text) {
  ConfigMap cfg;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']', ErrorCode::kConfigError,
              "line " + std::to_string(lineno) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      require(!section.empty(), ErrorCode::kConfigError,
              "line " + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::kConfigError,
            "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    require(!key.empty(), ErrorCode::kConfigError,
            "line " + std::to_string(lineno) + ": empty key");
    require(!section.empty(), ErrorCode::kConfigError,
            "line " + std::to_string(lineno) + ": key outside any [section]");
    cfg.values_[section + "." + key] = value;
  }
  return cfg;
}

void ConfigMap::merge_over(const ConfigMap& overrides) {
  for (const auto& [k, v] : overrides.values_) values_[k] = v;
}

void ConfigMap::set(const std::string& key, const std::string& raw_value) {
  require(key.find('.') != std::string::npos, ErrorCode::kConfigError,
          "config keys are section.key, got '" + key + "'");
  values_[key] = raw_value;
}

bool ConfigMap::has(const std::string& key) const {
  return values_.count(key) != 0;
}

double ConfigMap::get_double(const std::string& key) const {
  const auto it = values_.find(key);
  require(it != values_.end(), ErrorCode::kConfigError, "missing key " + key);
  return parse_double(key, it->second);
}

std::int64_t ConfigMap::get_int(const std::string& key) const {
  const auto it = values_.find(key);
  require(it != values_.end(), ErrorCode::kConfigError, "missing key " + key);
  return parse_int(key, it->second);
}

bool ConfigMap::get_bool(const std::string& key) const {
  const auto it = values_.find(key);
  require(it != values_.end(), ErrorCode::kConfigError, "missing key " + key);
  if (it->second == "true") return true;
  if (it->second == "false") return false;
  throw Error(ErrorCode::kConfigError,
              key + ": expected true/false, got '" + it->second + "'");
}

std::string ConfigMap::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  require(it != values_.end(), ErrorCode::kConfigError, "missing key " + key);
  return unquote(it->second);
}

std::vector<double> ConfigMap::get_double_list(const std::string& key) const {
  const auto it = values_.find(key);
  require(it != values_.end(), ErrorCode::kConfigError, "missing key " + key);
  std::vector<double> out;
  for (const auto& item : split_array(key, it->second)) {
    out.push_back(parse_double(key, item));
  }
  return out;
}

std::vector<std::int64_t> ConfigMap::get_int_list(
    const std::string& key) const {
  const auto it = values_.find(key);
  require(it != values_.end(), ErrorCode::kConfigError, "missing key " + key);
  std::vector<std::int64_t> out;
  for (const auto& item : split_array(key, it->second)) {
    out.push_back(parse_int(key, item));
  }
  return out;
}

std::vector<std::string> ConfigMap::get_string_list(
    const std::string& key) const {
  const auto it = values_.find(key);
  require(it != values_.end(), ErrorCode::kConfigError, "missing key " + key);
  std::vector<std::string> out;
  for (const auto& item : split_array(key, it->second)) {
    out.push_back(unquote(item));
  }
  return out;
}

double ConfigMap::get_double(const std::string& key, double dflt) const {
  return has(key) ? get_double(key) : dflt;
}

std::int64_t ConfigMap::get_int(const std::string& key,
                                std::int64_t dflt) const {
  return has(key) ? get_int(key) : dflt;
}

bool ConfigMap::get_bool(const std::string& key, bool dflt) const {
  return has(key) ? get_bool(key) : dflt;
}

std::string ConfigMap::get_string(const std::string& key,
                                  const std::string& dflt) const {
  return has(key) ? get_string(key) : dflt;
}

std::string ConfigMap::dump() const {
  std::string out;
  std::string section;
  for (const auto& [k, v] : values_) {  // std::map: already sorted
    const auto dot = k.find('.');
    const std::string sec = k.substr(0, dot);
    if (sec != section) {
      if (!out.empty()) out += "\n";
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += k.substr(dot + 1) + " = " + v + "\n";
  }
  return out;
}

}  // namespace tamatch
