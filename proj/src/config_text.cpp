#include "n3net/config_text.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace n3net {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

ConfigText ConfigText::parse(const std::string& text) {
  ConfigText out;
  std::istringstream in(text);
  std::string line;
  std::string current;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::invalid_argument("line " + std::to_string(lineno) +
                                    ": unterminated section header");
      }
      current = trim(line.substr(1, line.size() - 2));
      out.sections_[current];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("line " + std::to_string(lineno) +
                                  ": expected `key = value`");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": empty key");
    }
    out.sections_[current][key] = trim(line.substr(eq + 1));
  }
  return out;
}

bool ConfigText::has(const std::string& section, const std::string& key) const {
  const auto it = sections_.find(section);
  return it != sections_.end() && it->second.count(key) != 0;
}

const std::string& ConfigText::get(const std::string& section,
                                   const std::string& key) const {
  const auto it = sections_.find(section);
  if (it != sections_.end()) {
    const auto kit = it->second.find(key);
    if (kit != it->second.end()) return kit->second;
  }
  throw std::invalid_argument("missing config key [" + section + "] " + key);
}

void ConfigText::set(const std::string& section, const std::string& key,
                     std::string value) {
  sections_[section][key] = std::move(value);
}

const std::map<std::string, std::string>* ConfigText::section(
    const std::string& name) const {
  const auto it = sections_.find(name);
  return it == sections_.end() ? nullptr : &it->second;
}

std::vector<std::string> ConfigText::section_names() const {
  std::vector<std::string> out;
  for (const auto& entry : sections_) out.push_back(entry.first);
  return out;
}

std::string ConfigText::str() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& [name, keys] : sections_) {
    if (!first) os << '\n';
    first = false;
    if (!name.empty() || sections_.size() > 1) os << '[' << name << "]\n";
    for (const auto& [key, value] : keys) os << key << " = " << value << '\n';
  }
  return os.str();
}

std::size_t parse_size(const std::string& text, const std::string& what) {
  std::size_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw std::invalid_argument(what + ": expected a nonnegative integer, got '" +
                                text + "'");
  }
  return value;
}

double parse_double(const std::string& text, const std::string& what) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw std::invalid_argument(what + ": expected a number, got '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& text, const std::string& what) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw std::invalid_argument(what + ": expected true/false, got '" + text + "'");
}

std::vector<std::size_t> parse_size_list(const std::string& text,
                                         const std::string& what) {
  std::vector<std::size_t> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_size(trim(item), what));
  return out;
}

std::string format_double(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string format_size_list(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

}  // namespace n3net
