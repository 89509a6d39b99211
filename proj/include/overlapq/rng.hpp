#pragma once

#include <cmath>
#include <cstdint>

namespace overlapq {

// Counter-based stream: output i is a mix of (key, i), so streams keyed by
// (seed, substream) can be created independently anywhere in a computation
// without sharing mutable state. The finalizer is Stafford's mix13 variant,
// the same mixer splitmix64 uses.
class Stream {
 public:
  Stream() = default;
  Stream(std::uint64_t seed, std::uint64_t substream)
      : key_(mix(mix(seed + 0x9e3779b97f4a7c15ull) ^
                 (substream * 0xd2b74407b1ce6e93ull + 0x8bb84b93962eacc9ull))) {}

  std::uint64_t next_u64() {
    counter_ += 0x9e3779b97f4a7c15ull;
    return mix(counter_ ^ key_);
  }

  // Uniform on [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; safe as a log() argument.
  double next_double_pos() { return 1.0 - next_double(); }

  // Standard normal via Box-Muller. Draws two uniforms per call; no caching,
  // so the draw count per call is fixed and streams replay exactly.
  double next_normal() {
    const double u1 = next_double_pos();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace overlapq
