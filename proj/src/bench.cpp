#include "gfl/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "gfl/attention.hpp"
#include "gfl/kernels/kernels.hpp"
#include "gfl/training.hpp"
#include "op_detail.hpp"

namespace gfl {

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  detail::require(x.size() == y.size() && x.size() >= 3,
                  "loglog_slope: need at least 3 points");
  const size_t n = x.size();
  double mx = 0.0, my = 0.0;
  std::vector<double> lx(n), ly(n);
  for (size_t i = 0; i < n; ++i) {
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double cov = 0.0, var = 0.0;
  for (size_t i = 0; i < n; ++i) {
    cov += (lx[i] - mx) * (ly[i] - my);
    var += (lx[i] - mx) * (lx[i] - mx);
  }
  return cov / var;
}

namespace {

class SingleWorker {
 public:
  SingleWorker() : saved_(kernels::max_threads()) { kernels::set_max_threads(1); }
  ~SingleWorker() { kernels::set_max_threads(saved_); }

 private:
  int saved_;
};

struct BenchSetup {
  AttentionMaps xy, yx;
  Var ln_gain, ln_bias;
  Var x, y, grid, emb;
};

AffineMap random_affine(int64_t d, const RandomStream& rs, uint64_t tag) {
  Tensor w({d, d});
  fill_normal(w, rs.derive(tag), std::sqrt(1.0 / static_cast<double>(d)));
  AffineMap m;
  m.w = make_const(std::move(w));
  m.b = make_const(Tensor({d}));
  return m;
}

BenchSetup make_setup(int64_t n, int64_t m_rows, int64_t d, const RandomStream& rs) {
  BenchSetup s;
  s.xy.q = random_affine(d, rs, 1);
  s.xy.k = random_affine(d, rs, 2);
  s.xy.v = random_affine(d, rs, 3);
  s.xy.gamma = random_affine(d, rs, 4);
  s.xy.beta = random_affine(d, rs, 5);
  s.yx.q = random_affine(d, rs, 6);
  s.yx.k = random_affine(d, rs, 7);
  s.yx.v = random_affine(d, rs, 8);
  s.ln_gain = make_const(Tensor::full({d}, 1.0));
  s.ln_bias = make_const(Tensor({d}));
  Tensor x({n, d}), y({m_rows, d}), emb({m_rows, d});
  fill_normal(x, rs.derive("x"));
  fill_normal(y, rs.derive("y"));
  fill_normal(emb, rs.derive("emb"), 0.1);
  s.x = make_const(std::move(x));
  s.y = make_const(std::move(y));
  s.emb = make_const(std::move(emb));
  const int64_t side = static_cast<int64_t>(std::llround(std::sqrt(static_cast<double>(n))));
  s.grid = make_const(side * side == n && d % 4 == 0
                          ? sinusoidal_grid_encoding(side, side, d)
                          : Tensor({n, d}));
  return s;
}

}  // namespace

AttentionBenchResult bench_attention(const std::vector<int64_t>& n_values, int64_t m,
                                     int64_t d, int repeats, uint64_t seed) {
  detail::require(n_values.size() >= 3, "bench_attention: need at least 3 sizes for a fit");
  detail::require(repeats >= 5, "bench_attention: need at least 5 repeats");
  SingleWorker pinned;
  NoGrad ng;
  const RandomStream rs(seed);

  AttentionBenchResult out;
  std::vector<double> med_self, med_simplex, med_duplex, ns;

  using Clock = std::chrono::steady_clock;
  auto time_median = [&](auto&& fn) {
    fn();  // warm-up: touches allocators and code paths once
    std::vector<double> times(static_cast<size_t>(repeats));
    for (int r = 0; r < repeats; ++r) {
      const auto t0 = Clock::now();
      fn();
      times[static_cast<size_t>(r)] = std::chrono::duration<double>(Clock::now() - t0).count();
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
  };

  for (int64_t n : n_values) {
    BenchSetup s = make_setup(n, m, d, rs.derive(static_cast<uint64_t>(n)));
    const double t_self = time_median(
        [&] { bipartite_attention(s.x, s.x, s.xy, nullptr, nullptr); });
    const double t_simplex =
        time_median([&] { simplex_update(s.x, s.y, s.xy, s.grid, s.emb); });
    const double t_duplex = time_median([&] {
      duplex_round(s.x, s.y, s.xy, s.yx, s.grid, s.emb, s.ln_gain, s.ln_bias);
    });
    out.rows.push_back({"self", n, t_self});
    out.rows.push_back({"simplex", n, t_simplex});
    out.rows.push_back({"duplex", n, t_duplex});
    ns.push_back(static_cast<double>(n));
    med_self.push_back(t_self);
    med_simplex.push_back(t_simplex);
    med_duplex.push_back(t_duplex);
  }
  out.slope_self = loglog_slope(ns, med_self);
  out.slope_simplex = loglog_slope(ns, med_simplex);
  out.slope_duplex = loglog_slope(ns, med_duplex);
  return out;
}

std::vector<ThroughputRow> bench_throughput(const std::vector<std::string>& variants,
                                            int64_t resolution, int64_t k, int64_t batch,
                                            int steps, uint64_t seed) {
  std::vector<ThroughputRow> rows;
  for (const std::string& variant : variants) {
    TrainConfig cfg;
    cfg.variant = variant;
    cfg.resolution = resolution;
    cfg.k = k;
    cfg.batch = batch;
    cfg.total_kimg = static_cast<double>(steps * batch) / 1000.0;
    cfg.seed = seed;
    cfg.fid_at_checkpoints = false;
    cfg.checkpoint_every_kimg = 1e9;  // only the mandatory final checkpoint
    cfg.out_dir.clear();
    const TrainResult res = train_variant(cfg);
    rows.push_back({variant, res.mean_imgs_per_sec});
  }
  return rows;
}

}  // namespace gfl
