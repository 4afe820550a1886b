#pragma once

#include <cstdint>

namespace cgsim {

/// Counter-based generator. Stream r of master seed s is keyed by
/// mix(s + GOLDEN * (r + 1)); draw j is mix(key + GOLDEN * j). Replications
/// therefore get disjoint, order-independent streams and identical output
/// on every platform.
class Rng {
 public:
  Rng() : Rng(0, 0) {}
  Rng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53-bit resolution.
  double next_double();

  /// Uniform in {0, ..., n-1}; n must be > 0.
  std::uint64_t next_below(std::uint64_t n);

  /// Uniform integer in [lo, hi], bounds inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  bool bernoulli(double p) { return next_double() < p; }

  std::uint64_t key() const { return key_; }

 private:
  static std::uint64_t mix(std::uint64_t z);

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace cgsim
