#pragma once

#include <cstdint>

namespace focal {

// SplitMix64 stream. Bit-exact algorithm (documented in README):
//   state <- state + 0x9E3779B97F4A7C15
//   z <- state; z <- (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z <- (z ^ (z >> 27)) * 0x94D049BB133111EB
//   output <- z ^ (z >> 31)
// Unit doubles take the top 53 bits: (u >> 11) * 2^-53.
// Gaussians are Box-Muller pairs (sqrt(-2 ln u1) * {cos,sin}(2 pi u2)),
// with the second value cached, so a stream's output sequence is a pure
// function of its seed.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  double next_unit();                    // [0, 1)
  double next_gaussian();                // N(0, 1)
  double next_uniform(double lo, double hi);
  std::uint64_t next_below(std::uint64_t n);  // floor(unit * n), n > 0
  std::uint64_t next_poisson(double lambda);  // Knuth product method

  static std::uint64_t mix(std::uint64_t z);

 private:
  std::uint64_t state_;
  bool has_cached_gaussian_ = false;
  double cached_gaussian_ = 0.0;
};

// Derives an independent stream from (seed, stream id). Streams with
// distinct ids are decorrelated regardless of how many draws either has
// consumed; all reproducibility in the project flows through this.
SplitMix64 rng_stream(std::uint64_t seed, std::uint64_t stream_id);

// Two-level stream derivation for nested contexts (e.g. seed/epoch/layer).
SplitMix64 rng_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

}  // namespace focal
