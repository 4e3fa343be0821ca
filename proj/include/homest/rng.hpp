#pragma once

#include <cstdint>
#include <limits>

namespace homest {

/// Purpose tags separating the random streams of one experiment.
enum class StreamTag : std::uint64_t {
  microstructure = 1,
  prior = 2,
  observation_noise = 3,
  brownian = 4,
  posterior = 5,
  optimizer = 6,
};

/// Counter-based generator keyed by (master seed, purpose, replicate).
///
/// The n-th output is a bijective mix of key + n * golden-gamma, so any
/// replicate's stream can be produced independently of every other one and
/// replicates may run in any order or on any thread.
class Stream {
 public:
  using result_type = std::uint64_t;

  Stream(std::uint64_t master_seed, StreamTag tag, std::uint64_t replicate = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + gamma() * ++counter_); }

  /// Uniform on the open interval (0, 1).
  double uniform();

  /// Standard normal deviate (Box-Muller, pairs cached).
  double normal();

  std::uint64_t key() const { return key_; }

 private:
  static constexpr std::uint64_t gamma() { return 0x9E3779B97F4A7C15ULL; }
  static std::uint64_t mix(std::uint64_t z);

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace homest
