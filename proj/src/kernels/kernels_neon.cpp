// NEON kernels for aarch64 (float64x2 lanes). Mirrors the AVX2 table with a
// narrower register tile.

#include "gfl/kernels/kernels.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>

#include <algorithm>

namespace gfl::kernels {
namespace {

void gemm_nn_neon(const double* a, const double* b, double* c, int p, int q, int r) {
  for (int i = 0; i < p; ++i) {
    const double* ai = a + static_cast<size_t>(i) * q;
    double* ci = c + static_cast<size_t>(i) * r;
    for (int k = 0; k < q; ++k) {
      const double aik = ai[k];
      const double* bk = b + static_cast<size_t>(k) * r;
      const float64x2_t av = vdupq_n_f64(aik);
      int j = 0;
      for (; j + 4 <= r; j += 4) {
        vst1q_f64(ci + j, vfmaq_f64(vld1q_f64(ci + j), av, vld1q_f64(bk + j)));
        vst1q_f64(ci + j + 2, vfmaq_f64(vld1q_f64(ci + j + 2), av, vld1q_f64(bk + j + 2)));
      }
      for (; j < r; ++j) ci[j] += aik * bk[j];
    }
  }
}

double dot_neon(int n, const double* a, const double* b) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double d = vaddvq_f64(acc0) + vaddvq_f64(acc1);
  for (; i < n; ++i) d += a[i] * b[i];
  return d;
}

void gemm_nt_neon(const double* a, const double* b, double* c, int p, int q, int r) {
  for (int i = 0; i < p; ++i) {
    const double* ai = a + static_cast<size_t>(i) * q;
    double* ci = c + static_cast<size_t>(i) * r;
    for (int j = 0; j < r; ++j) ci[j] += dot_neon(q, ai, b + static_cast<size_t>(j) * q);
  }
}

void gemm_tn_neon(const double* a, const double* b, double* c, int p, int q, int r) {
  for (int k = 0; k < p; ++k) {
    const double* ak = a + static_cast<size_t>(k) * q;
    const double* bk = b + static_cast<size_t>(k) * r;
    for (int i = 0; i < q; ++i) {
      const double aki = ak[i];
      double* ci = c + static_cast<size_t>(i) * r;
      const float64x2_t av = vdupq_n_f64(aki);
      int j = 0;
      for (; j + 2 <= r; j += 2)
        vst1q_f64(ci + j, vfmaq_f64(vld1q_f64(ci + j), av, vld1q_f64(bk + j)));
      for (; j < r; ++j) ci[j] += aki * bk[j];
    }
  }
}

void axpy_neon(int n, double s, const double* x, double* y) {
  const float64x2_t sv = vdupq_n_f64(s);
  int i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), sv, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += s * x[i];
}

void add_neon(int n, const double* a, const double* b, double* y) {
  int i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) y[i] = a[i] + b[i];
}

void sub_neon(int n, const double* a, const double* b, double* y) {
  int i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) y[i] = a[i] - b[i];
}

void mul_neon(int n, const double* a, const double* b, double* y) {
  int i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) y[i] = a[i] * b[i];
}

void scale_neon(int n, double s, const double* x, double* y) {
  const float64x2_t sv = vdupq_n_f64(s);
  int i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vmulq_f64(sv, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] = s * x[i];
}

void lrelu_neon(int n, double slope, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] = x[i] >= 0.0 ? x[i] : slope * x[i];
}

void lrelu_grad_neon(int n, double slope, const double* x, const double* g, double* gx) {
  for (int i = 0; i < n; ++i) gx[i] += g[i] * (x[i] >= 0.0 ? 1.0 : slope);
}

double sum_neon(int n, const double* x) {
  float64x2_t acc = vdupq_n_f64(0.0);
  int i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
  double d = vaddvq_f64(acc);
  for (; i < n; ++i) d += x[i];
  return d;
}

double maxv_neon(int n, const double* x) {
  double m = x[0];
  for (int i = 1; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

}  // namespace

const Ops* neon_ops() {
  static const Ops table{
      Backend::neon, "neon",
      gemm_nn_neon,  gemm_nt_neon,  gemm_tn_neon,
      dot_neon,      axpy_neon,     add_neon,   sub_neon, mul_neon,
      scale_neon,    lrelu_neon,    lrelu_grad_neon,
      sum_neon,      maxv_neon,
  };
  return &table;
}

}  // namespace gfl::kernels

#else

namespace gfl::kernels {
const Ops* neon_ops() { return nullptr; }
}  // namespace gfl::kernels

#endif
