#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace modelmux {

// Deterministic 64-bit PRNG (splitmix64). Used everywhere reproducibility
// across runs and platforms is required; std:: distributions are not
// bit-stable between standard library implementations.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1).
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform double in [lo, hi).
  double next_in(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  bool next_bernoulli(double p) { return next_unit() < p; }

 private:
  std::uint64_t state_;
};

// FNV-1a over bytes; stable label hashing for the stub embedding provider.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Formats a double with 17 significant digits, enough to round-trip any
// IEEE-754 binary64 value exactly. Index files and goldens rely on this
// being byte-stable.
std::string format_double(double v);

}  // namespace modelmux
