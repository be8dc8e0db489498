#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "warfarin/common.hpp"

namespace warfarin {

// INI-style configuration: [section] headers, key = value pairs, '#' or ';'
// comments. Every artifact the pipeline writes embeds hash() so outputs can
// be traced back to the exact configuration that produced them.
class Config {
 public:
  static Config load(const std::filesystem::path& path);
  static Config from_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key) const;
  int get_int(const std::string& section, const std::string& key) const;
  bool get_bool(const std::string& section, const std::string& key) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key) const;

  std::string get_string_or(const std::string& section, const std::string& key,
                            const std::string& fallback) const;
  double get_double_or(const std::string& section, const std::string& key, double fallback) const;
  int get_int_or(const std::string& section, const std::string& key, int fallback) const;
  bool get_bool_or(const std::string& section, const std::string& key, bool fallback) const;
  std::uint64_t get_u64_or(const std::string& section, const std::string& key,
                           std::uint64_t fallback) const;

  void set(const std::string& section, const std::string& key, const std::string& value);
  // "section.key=value"
  void apply_override(const std::string& dotted_assignment);

  // Canonical text: sections and keys sorted, whitespace normalized. The
  // config hash is FNV-1a 64 over this text, so semantically equal configs
  // hash equally regardless of formatting or key order.
  std::string canonical() const;
  std::string hash() const;

  // Directory of the file this config was loaded from; relative path values
  // resolve against it.
  const std::filesystem::path& origin_dir() const { return origin_dir_; }
  std::filesystem::path resolve_path(const std::string& value) const;

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
  std::string origin_;
  std::filesystem::path origin_dir_;
};

}  // namespace warfarin
