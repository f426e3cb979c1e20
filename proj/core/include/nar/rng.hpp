#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace nar {

/// Deterministic, splittable random stream. The engine is std::mt19937_64
/// (bit-exact across platforms by the standard); uniform doubles are derived
/// from raw engine output directly so no implementation-defined distribution
/// code is involved. split() derives an independent child stream from the
/// original seed, not from the consumed state.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), eng_(splitmix(seed)) {}

  uint64_t seed() const { return seed_; }

  uint64_t raw() { return eng_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  float uniform_f() { return static_cast<float>(uniform()); }

  /// Uniform integer in [0, n). n must be positive.
  uint64_t bounded(uint64_t n) {
    return static_cast<uint64_t>((static_cast<unsigned __int128>(eng_()) * n) >> 64);
  }

  int index(int n) { return static_cast<int>(bounded(static_cast<uint64_t>(n))); }

  Rng split(uint64_t stream) const { return Rng(mix(seed_, stream)); }
  Rng split(std::string_view label) const { return Rng(mix(seed_, fnv1a(label))); }

  static uint64_t mix(uint64_t a, uint64_t b) { return splitmix_step(a ^ (b + 0x9e3779b97f4a7c15ULL)); }

  static uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  static uint64_t splitmix_step(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  static std::mt19937_64 splitmix(uint64_t seed) {
    // Expand the seed so nearby seeds give unrelated engine states.
    std::mt19937_64 eng(splitmix_step(seed));
    return eng;
  }

  uint64_t seed_;
  std::mt19937_64 eng_;
};

}  // namespace nar
