#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace warfarin {

// Invalid runtime input: out-of-range dose, malformed table, bad checkpoint.
// The CLI maps this to exit code 1.
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// Missing or unparseable configuration. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// FNV-1a, used for config hashing and substream derivation tags.
constexpr std::uint64_t fnv1a64(const char* data, std::size_t len,
                                std::uint64_t basis = 0xcbf29ce484222325ull) {
  std::uint64_t h = basis;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s,
                             std::uint64_t basis = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), basis);
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::string format_hex64(std::uint64_t value);

}  // namespace warfarin
