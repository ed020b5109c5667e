// AVX2 + FMA kernels. This translation unit is compiled with -mavx2 -mfma and
// must only be reached through the dispatch table after a runtime CPU check.

#include "gfl/kernels/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>

#include <algorithm>

namespace gfl::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swap = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swap));
}

// 4x8 register tile: accumulates C[i0..i0+3, j0..j0+7] over the full q range.
inline void tile_4x8(const double* a, const double* b, double* c, int q, int r,
                     int i0, int j0) {
  const double* a0 = a + static_cast<size_t>(i0) * q;
  const double* a1 = a0 + q;
  const double* a2 = a1 + q;
  const double* a3 = a2 + q;
  const double* bj = b + j0;
  __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
  __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
  __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
  __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
  for (int k = 0; k < q; ++k) {
    const double* bk = bj + static_cast<size_t>(k) * r;
    const __m256d b0 = _mm256_loadu_pd(bk);
    const __m256d b1 = _mm256_loadu_pd(bk + 4);
    __m256d av = _mm256_set1_pd(a0[k]);
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_set1_pd(a1[k]);
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_set1_pd(a2[k]);
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_set1_pd(a3[k]);
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
  }
  double* c0 = c + static_cast<size_t>(i0) * r + j0;
  double* c1 = c0 + r;
  double* c2 = c1 + r;
  double* c3 = c2 + r;
  _mm256_storeu_pd(c0, _mm256_add_pd(_mm256_loadu_pd(c0), c00));
  _mm256_storeu_pd(c0 + 4, _mm256_add_pd(_mm256_loadu_pd(c0 + 4), c01));
  _mm256_storeu_pd(c1, _mm256_add_pd(_mm256_loadu_pd(c1), c10));
  _mm256_storeu_pd(c1 + 4, _mm256_add_pd(_mm256_loadu_pd(c1 + 4), c11));
  _mm256_storeu_pd(c2, _mm256_add_pd(_mm256_loadu_pd(c2), c20));
  _mm256_storeu_pd(c2 + 4, _mm256_add_pd(_mm256_loadu_pd(c2 + 4), c21));
  _mm256_storeu_pd(c3, _mm256_add_pd(_mm256_loadu_pd(c3), c30));
  _mm256_storeu_pd(c3 + 4, _mm256_add_pd(_mm256_loadu_pd(c3 + 4), c31));
}

// One row of C over columns [j0, r): broadcast-FMA along k.
inline void row_tail(const double* ai, const double* b, double* ci, int q, int r, int j0) {
  for (int k = 0; k < q; ++k) {
    const double aik = ai[k];
    const double* bk = b + static_cast<size_t>(k) * r;
    const __m256d av = _mm256_set1_pd(aik);
    int j = j0;
    for (; j + 4 <= r; j += 4) {
      _mm256_storeu_pd(ci + j, _mm256_fmadd_pd(av, _mm256_loadu_pd(bk + j),
                                               _mm256_loadu_pd(ci + j)));
    }
    for (; j < r; ++j) ci[j] += aik * bk[j];
  }
}

void gemm_nn_avx2(const double* a, const double* b, double* c, int p, int q, int r) {
  const int pb = p & ~3;
  const int rb = r & ~7;
  for (int i = 0; i < pb; i += 4) {
    for (int j = 0; j < rb; j += 8) tile_4x8(a, b, c, q, r, i, j);
    if (rb < r) {
      for (int ii = i; ii < i + 4; ++ii)
        row_tail(a + static_cast<size_t>(ii) * q, b, c + static_cast<size_t>(ii) * r, q, r, rb);
    }
  }
  for (int i = pb; i < p; ++i)
    row_tail(a + static_cast<size_t>(i) * q, b, c + static_cast<size_t>(i) * r, q, r, 0);
}

void gemm_nt_avx2(const double* a, const double* b, double* c, int p, int q, int r) {
  for (int i = 0; i < p; ++i) {
    const double* ai = a + static_cast<size_t>(i) * q;
    double* ci = c + static_cast<size_t>(i) * r;
    int j = 0;
    for (; j + 4 <= r; j += 4) {
      const double* b0 = b + static_cast<size_t>(j) * q;
      const double* b1 = b0 + q;
      const double* b2 = b1 + q;
      const double* b3 = b2 + q;
      __m256d acc0 = _mm256_setzero_pd();
      __m256d acc1 = _mm256_setzero_pd();
      __m256d acc2 = _mm256_setzero_pd();
      __m256d acc3 = _mm256_setzero_pd();
      int k = 0;
      for (; k + 4 <= q; k += 4) {
        const __m256d av = _mm256_loadu_pd(ai + k);
        acc0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b0 + k), acc0);
        acc1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b1 + k), acc1);
        acc2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b2 + k), acc2);
        acc3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b3 + k), acc3);
      }
      double d0 = hsum(acc0), d1 = hsum(acc1), d2 = hsum(acc2), d3 = hsum(acc3);
      for (; k < q; ++k) {
        const double av = ai[k];
        d0 += av * b0[k];
        d1 += av * b1[k];
        d2 += av * b2[k];
        d3 += av * b3[k];
      }
      ci[j] += d0;
      ci[j + 1] += d1;
      ci[j + 2] += d2;
      ci[j + 3] += d3;
    }
    for (; j < r; ++j) {
      const double* bj = b + static_cast<size_t>(j) * q;
      __m256d acc = _mm256_setzero_pd();
      int k = 0;
      for (; k + 4 <= q; k += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(ai + k), _mm256_loadu_pd(bj + k), acc);
      double d = hsum(acc);
      for (; k < q; ++k) d += ai[k] * bj[k];
      ci[j] += d;
    }
  }
}

void gemm_tn_avx2(const double* a, const double* b, double* c, int p, int q, int r) {
  for (int k = 0; k < p; ++k) {
    const double* ak = a + static_cast<size_t>(k) * q;
    const double* bk = b + static_cast<size_t>(k) * r;
    for (int i = 0; i < q; ++i) {
      const double aki = ak[i];
      double* ci = c + static_cast<size_t>(i) * r;
      const __m256d av = _mm256_set1_pd(aki);
      int j = 0;
      for (; j + 4 <= r; j += 4) {
        _mm256_storeu_pd(ci + j, _mm256_fmadd_pd(av, _mm256_loadu_pd(bk + j),
                                                 _mm256_loadu_pd(ci + j)));
      }
      for (; j < r; ++j) ci[j] += aki * bk[j];
    }
  }
}

double dot_avx2(int n, const double* a, const double* b) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double d = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) d += a[i] * b[i];
  return d;
}

void axpy_avx2(int n, double s, const double* x, double* y) {
  const __m256d sv = _mm256_set1_pd(s);
  int i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(sv, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += s * x[i];
}

void add_avx2(int n, const double* a, const double* b, double* y) {
  int i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) y[i] = a[i] + b[i];
}

void sub_avx2(int n, const double* a, const double* b, double* y) {
  int i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) y[i] = a[i] - b[i];
}

void mul_avx2(int n, const double* a, const double* b, double* y) {
  int i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) y[i] = a[i] * b[i];
}

void scale_avx2(int n, double s, const double* x, double* y) {
  const __m256d sv = _mm256_set1_pd(s);
  int i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_mul_pd(sv, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] = s * x[i];
}

void lrelu_avx2(int n, double slope, const double* x, double* y) {
  const __m256d sv = _mm256_set1_pd(slope);
  const __m256d zero = _mm256_setzero_pd();
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    const __m256d neg = _mm256_mul_pd(sv, xv);
    const __m256d mask = _mm256_cmp_pd(xv, zero, _CMP_GE_OQ);
    _mm256_storeu_pd(y + i, _mm256_blendv_pd(neg, xv, mask));
  }
  for (; i < n; ++i) y[i] = x[i] >= 0.0 ? x[i] : slope * x[i];
}

void lrelu_grad_avx2(int n, double slope, const double* x, const double* g, double* gx) {
  const __m256d sv = _mm256_set1_pd(slope);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d zero = _mm256_setzero_pd();
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    const __m256d mask = _mm256_cmp_pd(xv, zero, _CMP_GE_OQ);
    const __m256d factor = _mm256_blendv_pd(sv, one, mask);
    _mm256_storeu_pd(gx + i, _mm256_fmadd_pd(_mm256_loadu_pd(g + i), factor,
                                             _mm256_loadu_pd(gx + i)));
  }
  for (; i < n; ++i) gx[i] += g[i] * (x[i] >= 0.0 ? 1.0 : slope);
}

double sum_avx2(int n, const double* x) {
  __m256d acc = _mm256_setzero_pd();
  int i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double d = hsum(acc);
  for (; i < n; ++i) d += x[i];
  return d;
}

double maxv_avx2(int n, const double* x) {
  if (n < 4) {
    double m = x[0];
    for (int i = 1; i < n; ++i) m = std::max(m, x[i]);
    return m;
  }
  __m256d acc = _mm256_loadu_pd(x);
  int i = 4;
  for (; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, _mm256_loadu_pd(x + i));
  __m128d lo = _mm256_castpd256_pd128(acc);
  __m128d hi = _mm256_extractf128_pd(acc, 1);
  lo = _mm_max_pd(lo, hi);
  double m = std::max(_mm_cvtsd_f64(lo), _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo)));
  for (; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

}  // namespace

const Ops* avx2_ops() {
  static const Ops table{
      Backend::avx2, "avx2",
      gemm_nn_avx2,  gemm_nt_avx2,  gemm_tn_avx2,
      dot_avx2,      axpy_avx2,     add_avx2,   sub_avx2, mul_avx2,
      scale_avx2,    lrelu_avx2,    lrelu_grad_avx2,
      sum_avx2,      maxv_avx2,
  };
  return &table;
}

}  // namespace gfl::kernels

#else

namespace gfl::kernels {
const Ops* avx2_ops() { return nullptr; }
}  // namespace gfl::kernels

#endif
