#pragma once

// Flat key=value configuration with one include mechanism:
//   # comment
//   key = value
//   include relative/other.cfg
// Commands declare their known keys with defaults; any key the schema does
// not list is rejected by name before any compute starts.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace kgdiff::io {

struct ConfigEntry {
  std::string key;
  std::string default_value;
  std::string description;
};

class Config {
 public:
  static Config from_file(const std::string& path) {
    Config c;
    c.load(path, 0);
    return c;
  }

  static Config empty() { return Config(); }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }
  long long get_int(const std::string& key, long long fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : std::stoll(it->second);
  }
  unsigned long long get_u64(const std::string& key, unsigned long long fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : std::stoull(it->second);
  }
  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : std::stod(it->second);
  }
  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    throw std::invalid_argument("config key '" + key + "': expected a boolean, got '" + it->second + "'");
  }

  std::vector<unsigned long long> get_u64_list(const std::string& key,
                                               std::vector<unsigned long long> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<unsigned long long> out;
    std::string token;
    for (char ch : it->second + ",") {
      if (ch == ',') {
        if (!token.empty()) out.push_back(std::stoull(token));
        token.clear();
      } else if (!std::isspace(static_cast<unsigned char>(ch))) {
        token += ch;
      }
    }
    return out;
  }

  // every present key must be declared by the schema
  void validate_against(const std::vector<ConfigEntry>& schema) const {
    for (const auto& [key, value] : values_) {
      bool known = false;
      for (const ConfigEntry& e : schema)
        if (e.key == key) {
          known = true;
          break;
        }
      if (!known) throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }

  static std::string render_defaults(const std::vector<ConfigEntry>& schema) {
    std::string out;
    for (const ConfigEntry& e : schema) {
      out += "# " + e.description + "\n";
      out += e.key + " = " + e.default_value + "\n";
    }
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  void load(const std::string& path, int depth) {
    if (depth > 8) throw std::runtime_error("config include depth exceeded at " + path);
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string s = trim(line);
      if (s.empty() || s[0] == '#') continue;
      if (s.rfind("include ", 0) == 0) {
        std::filesystem::path inc = trim(s.substr(8));
        if (inc.is_relative()) inc = std::filesystem::path(path).parent_path() / inc;
        load(inc.string(), depth + 1);
        continue;
      }
      const size_t eq = s.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected key = value");
      const std::string key = trim(s.substr(0, eq));
      const std::string value = trim(s.substr(eq + 1));
      if (key.empty())
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty key");
      values_[key] = value;  // later assignment wins, includes apply first-come
    }
  }

  static std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace kgdiff::io
