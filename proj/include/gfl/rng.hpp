#pragma once
// Counter-based randomness: every draw is a pure function of
// (stream seed, index), so training can resume from a checkpoint without
// serializing generator state and parallel consumers never contend.

#include <cstdint>
#include <string_view>
#include <vector>

#include "gfl/tensor.hpp"

namespace gfl {

constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline uint64_t splitmix64(uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline uint64_t hash_str(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class RandomStream {
 public:
  explicit RandomStream(uint64_t seed) : seed_(seed) {}

  RandomStream derive(uint64_t tag) const { return RandomStream(splitmix64(seed_ ^ tag)); }
  RandomStream derive(std::string_view tag) const { return derive(hash_str(tag)); }

  uint64_t bits(uint64_t index) const { return splitmix64(seed_ + index * kGolden); }

  // [0, 1), 53-bit resolution
  double uniform(uint64_t index) const {
    return static_cast<double>(bits(index) >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller on consecutive uniform pairs.
  double normal(uint64_t index) const;

  // Uniform integer in [0, bound) without modulo bias.
  uint64_t below(uint64_t index, uint64_t bound) const;

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
};

void fill_normal(Tensor& t, const RandomStream& rs, double stddev = 1.0);
void fill_uniform(Tensor& t, const RandomStream& rs, double lo, double hi);

// Deterministic Fisher-Yates permutation of 0..n-1.
std::vector<int64_t> shuffled_indices(int64_t n, const RandomStream& rs);

}  // namespace gfl
