#pragma once
// Complexity and throughput benchmarks. Attention timing runs single-worker
// so the fitted slopes reflect arithmetic scaling, not scheduling.

#include <string>
#include <vector>

#include "gfl/tensor.hpp"

namespace gfl {

struct AttentionBenchRow {
  std::string variant;  // self | simplex | duplex
  int64_t n = 0;
  double median_seconds = 0.0;
};

struct AttentionBenchResult {
  std::vector<AttentionBenchRow> rows;
  double slope_self = 0.0;
  double slope_simplex = 0.0;
  double slope_duplex = 0.0;
};

// Times one forward of each attention flavor at every n (m, d fixed), takes
// the median over `repeats` runs, and fits log-log least-squares slopes.
AttentionBenchResult bench_attention(const std::vector<int64_t>& n_values, int64_t m,
                                     int64_t d, int repeats, uint64_t seed = 17);

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct ThroughputRow {
  std::string variant;
  double imgs_per_sec = 0.0;
};

// Short training runs (no logging, no eval) measuring images/sec per variant.
std::vector<ThroughputRow> bench_throughput(const std::vector<std::string>& variants,
                                            int64_t resolution, int64_t k, int64_t batch,
                                            int steps, uint64_t seed = 7);

}  // namespace gfl
