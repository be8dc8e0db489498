#include "warfarin/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "warfarin/detail/kvfile.hpp"

namespace warfarin {

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  Config c = from_string(ss.str(), path.string());
  c.origin_dir_ = std::filesystem::absolute(path).parent_path();
  return c;
}

Config Config::from_string(const std::string& text, const std::string& origin) {
  Config c;
  c.origin_ = origin;
  c.origin_dir_ = std::filesystem::current_path();
  std::stringstream ss(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    auto semi_pos = line.find(';');
    if (semi_pos != std::string::npos) line = line.substr(0, semi_pos);
    line = detail::trim_ws(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": malformed section header");
      section = detail::trim_ws(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty section name");
      c.sections_[section];
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    std::string key = detail::trim_ws(line.substr(0, eq));
    std::string value = detail::trim_ws(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    if (section.empty())
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": key outside any [section]");
    c.sections_[section][key] = value;
  }
  return c;
}

bool Config::has(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

std::string Config::get_string(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  if (s == sections_.end() || !s->second.count(key))
    throw ConfigError("missing config key [" + section + "] " + key);
  return s->second.at(key);
}

double Config::get_double(const std::string& section, const std::string& key) const {
  const std::string v = get_string(section, key);
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key [" + section + "] " + key + " is not a number: " + v);
  }
}

int Config::get_int(const std::string& section, const std::string& key) const {
  double d = get_double(section, key);
  int i = static_cast<int>(d);
  if (static_cast<double>(i) != d)
    throw ConfigError("config key [" + section + "] " + key + " is not an integer");
  return i;
}

bool Config::get_bool(const std::string& section, const std::string& key) const {
  std::string v = get_string(section, key);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key [" + section + "] " + key + " is not a boolean: " + v);
}

std::uint64_t Config::get_u64(const std::string& section, const std::string& key) const {
  const std::string v = get_string(section, key);
  try {
    std::size_t pos = 0;
    unsigned long long u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<std::uint64_t>(u);
  } catch (const std::exception&) {
    throw ConfigError("config key [" + section + "] " + key + " is not an unsigned integer: " + v);
  }
}

std::string Config::get_string_or(const std::string& section, const std::string& key,
                                  const std::string& fallback) const {
  return has(section, key) ? get_string(section, key) : fallback;
}

double Config::get_double_or(const std::string& section, const std::string& key,
                             double fallback) const {
  return has(section, key) ? get_double(section, key) : fallback;
}

int Config::get_int_or(const std::string& section, const std::string& key, int fallback) const {
  return has(section, key) ? get_int(section, key) : fallback;
}

bool Config::get_bool_or(const std::string& section, const std::string& key, bool fallback) const {
  return has(section, key) ? get_bool(section, key) : fallback;
}

std::uint64_t Config::get_u64_or(const std::string& section, const std::string& key,
                                 std::uint64_t fallback) const {
  return has(section, key) ? get_u64(section, key) : fallback;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  if (section.empty() || key.empty()) throw ConfigError("config set: empty section or key");
  sections_[section][key] = value;
}

void Config::apply_override(const std::string& dotted_assignment) {
  auto eq = dotted_assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like section.key=value: " + dotted_assignment);
  std::string lhs = detail::trim_ws(dotted_assignment.substr(0, eq));
  std::string value = detail::trim_ws(dotted_assignment.substr(eq + 1));
  auto dot = lhs.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == lhs.size())
    throw ConfigError("override must look like section.key=value: " + dotted_assignment);
  set(lhs.substr(0, dot), lhs.substr(dot + 1), value);
}

std::string Config::canonical() const {
  std::ostringstream out;
  for (const auto& [section, entries] : sections_) {
    out << '[' << section << "]\n";
    for (const auto& [key, value] : entries) out << key << " = " << value << '\n';
  }
  return out.str();
}

std::string Config::hash() const { return format_hex64(fnv1a64(canonical())); }

std::filesystem::path Config::resolve_path(const std::string& value) const {
  std::filesystem::path p(value);
  if (p.is_absolute()) return p;
  return origin_dir_ / p;
}

}  // namespace warfarin
