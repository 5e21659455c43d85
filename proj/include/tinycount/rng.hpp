#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string_view>

namespace tinycount {

/// SplitMix64 (Steele, Lea & Flood 2014). 64-bit state, full period, and cheap
/// enough to instantiate once per sample, which is how substreams are formed.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    return mix(z);
  }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Seed of the substream addressed by `path` under `root`. Distinct paths give
/// statistically independent streams; the mapping never depends on call order.
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = SplitMix64::mix(root ^ 0x6A09E667F3BCC909ULL);
  for (std::uint64_t p : path) h = SplitMix64::mix(h ^ SplitMix64::mix(p + 0x9E3779B97F4A7C15ULL));
  return h;
}

/// FNV-1a, for turning string keys (stream names, sweep cell keys) into seeds.
constexpr std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace tinycount
