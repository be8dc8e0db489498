#include "warfarin/random.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

namespace warfarin {

std::string format_hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return std::string(buf);
}

RandomStream::RandomStream(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

double RandomStream::uniform() {
  // 53-bit mantissa, value in [0, 1).
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double RandomStream::normal(double mean, double sd) {
  // Box-Muller, always consuming two uniforms so the draw count per call is
  // fixed regardless of the value produced.
  double u1 = 1.0 - uniform();  // (0, 1], keeps log() finite
  double u2 = uniform();
  double mag = std::sqrt(-2.0 * std::log(u1));
  return mean + sd * mag * std::cos(2.0 * std::numbers::pi * u2);
}

double RandomStream::lognormal(double mu_log, double sd_log) {
  return std::exp(normal(mu_log, sd_log));
}

bool RandomStream::bernoulli(double p) { return uniform() < p; }

int RandomStream::categorical(std::span<const double> probs) {
  if (probs.empty()) throw DomainError("categorical: empty probability vector");
  double u = uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size() - 1);
}

int RandomStream::uniform_int(int n) {
  if (n <= 0) throw DomainError("uniform_int: n must be positive");
  return static_cast<int>(uniform() * n) % n;
}

std::uint64_t RandomStream::next_u64() { return engine_(); }

RandomStream RandomStream::child(std::string_view tag) const {
  std::uint64_t h = fnv1a64(tag.data(), tag.size());
  return RandomStream(splitmix64(seed_ ^ h));
}

RandomStream RandomStream::child(std::string_view tag, std::uint64_t index) const {
  std::uint64_t h = fnv1a64(tag.data(), tag.size());
  h = splitmix64(h ^ splitmix64(index + 0x51ed270b1a2full));
  return RandomStream(splitmix64(seed_ ^ h));
}

}  // namespace warfarin
