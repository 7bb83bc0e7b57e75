#pragma once

#include <cstdint>

namespace sqvae {

/// Purpose-specific random streams. Each consumer draws from its own stream,
/// so adding a new consumer never perturbs existing ones.
enum class Stream : std::uint64_t {
  Init = 1,
  Shuffle = 2,
  Gumbel = 3,
  ResetNoise = 4,
  Latent = 5,
  Data = 6,
  Test = 7,
};

/// Counter-based 64-bit generator.
///
/// A stream is keyed by (seed, stream, substream); the n-th draw is
/// mix(key + n * golden) where mix is the SplitMix64 finalizer. Because the
/// output is a pure function of the key and the counter, any position of any
/// stream can be reproduced without replaying earlier draws. Substreams are
/// typically the epoch (shuffling) or the global step (Gumbel noise).
class Rng {
 public:
  Rng(std::uint64_t seed, Stream stream, std::uint64_t substream = 0);

  std::uint64_t next_u64();
  /// Uniform in the open interval (0, 1).
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Standard Gumbel: -log(-log(U)).
  double gumbel();

  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix(std::uint64_t z);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sqvae
