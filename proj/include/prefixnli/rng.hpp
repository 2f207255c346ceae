#pragma once

// Portable random streams.
//
// std::mt19937_64 is bit-exact across standard libraries, but the standard
// distributions are not, so index draws go through bounded_index() below.
// Independent streams (one per bucket, bin or resample) are seeded with
// derive_seed(base, stream_id).

#include <cstdint>
#include <random>

namespace prefixnli::rng {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of sub-stream `stream` of base seed `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return splitmix64(seed ^ splitmix64(stream + 1));
}

/// Maps a uniform 64-bit word onto [0, n) by multiply-shift: floor(x * n / 2^64).
inline std::uint64_t bounded_index(std::uint64_t x, std::uint64_t n) noexcept {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(x) * n) >> 64);
}

class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  std::uint64_t index(std::uint64_t n) { return bounded_index(engine_(), n); }
  /// Uniform double in [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace prefixnli::rng
