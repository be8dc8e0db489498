#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace warfarin::detail {

// Minimal "key = value" file reader shared by the parameter and coefficient
// loaders. Lines starting with '#' and blank lines are ignored.
class KvFile {
 public:
  static KvFile load(const std::filesystem::path& path);
  static KvFile from_string(const std::string& text, const std::string& origin);

  bool has(const std::string& key) const;
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
  std::string origin_;
};

std::string trim_ws(const std::string& s);

}  // namespace warfarin::detail
