#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

#include "warfarin/common.hpp"

namespace warfarin {

// Deterministic random stream. All stochastic pieces of the pipeline draw
// from named substreams derived from one master seed, so that adding a draw
// in one component never shifts the sequence seen by another, and reruns of
// the same configuration are byte-identical.
//
// Substream derivation hashes the parent seed with a tag (and optional
// index), so child(tag, i) depends only on (seed, tag, i), never on how many
// draws the parent has made.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  // Uniform in [0, 1). Consumes one engine draw.
  double uniform();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Box-Muller transform; consumes exactly two engine draws per call.
  double normal(double mean, double sd);
  // exp(N(mu_log, sd_log)).
  double lognormal(double mu_log, double sd_log);
  bool bernoulli(double p);
  // Index sampled by inverse CDF over `probs` (need not sum exactly to 1;
  // the last bucket absorbs the remainder).
  int categorical(std::span<const double> probs);
  // Uniform integer in [0, n).
  int uniform_int(int n);
  std::uint64_t next_u64();

  RandomStream child(std::string_view tag) const;
  RandomStream child(std::string_view tag, std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace warfarin
