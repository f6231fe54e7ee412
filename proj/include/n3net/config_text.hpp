#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace n3net {

/// Flat `key = value` text grouped under `[section]` headers. Keys before the
/// first header belong to section "". `#` starts a comment line.
class ConfigText {
 public:
  static ConfigText parse(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  /// Throws std::invalid_argument when missing.
  const std::string& get(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, std::string value);

  const std::map<std::string, std::string>* section(const std::string& name) const;
  std::vector<std::string> section_names() const;

  /// Sections in name order, keys in name order; parse(str()) == *this.
  std::string str() const;

  bool operator==(const ConfigText&) const = default;

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

std::size_t parse_size(const std::string& text, const std::string& what);
double parse_double(const std::string& text, const std::string& what);
bool parse_bool(const std::string& text, const std::string& what);
std::vector<std::size_t> parse_size_list(const std::string& text,
                                         const std::string& what);
/// Shortest decimal form that reads back to the same double.
std::string format_double(double value);
std::string format_size_list(const std::vector<std::size_t>& values);

}  // namespace n3net
