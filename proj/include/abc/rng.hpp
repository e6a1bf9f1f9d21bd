#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace abc {

/// Deterministic per-stream generator (xoshiro256** seeded through SplitMix64).
///
/// Identical (master_seed, stream_id) pairs reproduce the same sequence; each
/// replicate, table row or worker task owns its own stream.
class Rng {
 public:
  using result_type = std::uint64_t;

  Rng(std::uint64_t master_seed, std::uint64_t stream_id);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on the open interval (0, 1).
  double uniform_open();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_open(); }
  /// Uniform integer on [0, n).
  std::uint64_t index(std::uint64_t n);
  double exponential(double rate);
  std::uint64_t poisson(double mean);
  std::uint64_t binomial(std::uint64_t trials, double p);

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  /// Child stream identifier keyed by an ordered tuple of integers.
  static std::uint64_t derive(std::uint64_t base, std::initializer_list<std::uint64_t> keys);

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::array<std::uint64_t, 4> state_{};
};

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t mix64(std::uint64_t x);

}  // namespace abc
