#include "gfl/rng.hpp"

#include <cmath>
#include <numbers>

namespace gfl {

double RandomStream::normal(uint64_t index) const {
  // u1 strictly positive so the log stays finite.
  const double u1 =
      (static_cast<double>(bits(2 * index) >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform(2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

uint64_t RandomStream::below(uint64_t index, uint64_t bound) const {
  if (bound <= 1) return 0;
  const uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % bound + 1) % bound;
  uint64_t i = index;
  for (;;) {
    const uint64_t v = bits(i);
    if (v <= limit) return v % bound;
    i += 0x51D0A1F3ULL;  // step to a fresh counter on rejection
  }
}

void fill_normal(Tensor& t, const RandomStream& rs, double stddev) {
  for (int64_t i = 0; i < t.numel(); ++i)
    t[i] = rs.normal(static_cast<uint64_t>(i)) * stddev;
}

void fill_uniform(Tensor& t, const RandomStream& rs, double lo, double hi) {
  for (int64_t i = 0; i < t.numel(); ++i)
    t[i] = lo + (hi - lo) * rs.uniform(static_cast<uint64_t>(i));
}

std::vector<int64_t> shuffled_indices(int64_t n, const RandomStream& rs) {
  std::vector<int64_t> idx(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  for (int64_t i = n - 1; i > 0; --i) {
    const uint64_t j = rs.below(static_cast<uint64_t>(i), static_cast<uint64_t>(i) + 1);
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
  }
  return idx;
}

}  // namespace gfl
