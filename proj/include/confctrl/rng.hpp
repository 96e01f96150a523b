#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace confctrl {

// Counter-based pseudo-random stream. Each stream is keyed by (seed, tag)
// so adding a new consumer never perturbs existing streams, and the same
// (seed, tag, counter) triple yields the same value on every platform.
class Rng {
 public:
  Rng(uint64_t seed, std::string_view tag) : key_(mix(seed ^ fnv1a(tag))) {}

  uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  // uniform in [0,1), multiples of 2^-53
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // uniform in [0,1), multiples of 2^-24
  float next_float() {
    return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Box-Muller; one value per call, no cached second sample (keeps the
  // stream position a pure function of the call count).
  double normal() {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  // Derive an independent 64-bit seed, e.g. for per-scene sub-streams.
  static uint64_t derive(uint64_t seed, std::string_view tag, uint64_t index) {
    return mix(mix(seed ^ fnv1a(tag)) + 0x9e3779b97f4a7c15ULL * (index + 1));
  }

 private:
  static uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
      h ^= static_cast<uint8_t>(c);
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  // splitmix64 finalizer
  static uint64_t mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  uint64_t key_;
  uint64_t counter_ = 0;
};

}  // namespace confctrl
