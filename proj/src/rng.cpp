#include "focal/rng.hpp"

#include <cmath>

namespace focal {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr double kTwoPi = 6.283185307179586476925286766559;
}  // namespace

std::uint64_t SplitMix64::mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t SplitMix64::next_u64() {
  state_ += kGolden;
  return mix(state_);
}

double SplitMix64::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SplitMix64::next_gaussian() {
  if (has_cached_gaussian_) {
    has_cached_gaussian_ = false;
    return cached_gaussian_;
  }
  // u1 in (0,1] so the log is finite.
  double u1 = 1.0 - next_unit();
  double u2 = next_unit();
  double r = std::sqrt(-2.0 * std::log(u1));
  cached_gaussian_ = r * std::sin(kTwoPi * u2);
  has_cached_gaussian_ = true;
  return r * std::cos(kTwoPi * u2);
}

double SplitMix64::next_uniform(double lo, double hi) {
  return lo + (hi - lo) * next_unit();
}

std::uint64_t SplitMix64::next_below(std::uint64_t n) {
  return static_cast<std::uint64_t>(next_unit() * static_cast<double>(n));
}

std::uint64_t SplitMix64::next_poisson(double lambda) {
  if (lambda <= 0.0) return 0;
  const double limit = std::exp(-lambda);
  std::uint64_t k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= next_unit();
  } while (p > limit);
  return k - 1;
}

SplitMix64 rng_stream(std::uint64_t seed, std::uint64_t stream_id) {
  return SplitMix64(SplitMix64::mix(seed ^ SplitMix64::mix(stream_id * kGolden + 1)));
}

SplitMix64 rng_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return rng_stream(SplitMix64::mix(seed ^ SplitMix64::mix(a * kGolden + 3)), b);
}

}  // namespace focal
