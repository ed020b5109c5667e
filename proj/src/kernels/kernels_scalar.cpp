// Reference kernels. Plain loops, no intrinsics; these define the semantics
// the SIMD variants are tested against.

#include "gfl/kernels/kernels.hpp"

#include <algorithm>

namespace gfl::kernels {
namespace {

void gemm_nn_scalar(const double* a, const double* b, double* c, int p, int q, int r) {
  for (int i = 0; i < p; ++i) {
    const double* ai = a + static_cast<size_t>(i) * q;
    double* ci = c + static_cast<size_t>(i) * r;
    for (int k = 0; k < q; ++k) {
      const double aik = ai[k];
      const double* bk = b + static_cast<size_t>(k) * r;
      for (int j = 0; j < r; ++j) ci[j] += aik * bk[j];
    }
  }
}

void gemm_nt_scalar(const double* a, const double* b, double* c, int p, int q, int r) {
  for (int i = 0; i < p; ++i) {
    const double* ai = a + static_cast<size_t>(i) * q;
    double* ci = c + static_cast<size_t>(i) * r;
    for (int j = 0; j < r; ++j) {
      const double* bj = b + static_cast<size_t>(j) * q;
      double acc = 0.0;
      for (int k = 0; k < q; ++k) acc += ai[k] * bj[k];
      ci[j] += acc;
    }
  }
}

void gemm_tn_scalar(const double* a, const double* b, double* c, int p, int q, int r) {
  for (int k = 0; k < p; ++k) {
    const double* ak = a + static_cast<size_t>(k) * q;
    const double* bk = b + static_cast<size_t>(k) * r;
    for (int i = 0; i < q; ++i) {
      const double aki = ak[i];
      double* ci = c + static_cast<size_t>(i) * r;
      for (int j = 0; j < r; ++j) ci[j] += aki * bk[j];
    }
  }
}

double dot_scalar(int n, const double* a, const double* b) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(int n, double s, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] += s * x[i];
}

void add_scalar(int n, const double* a, const double* b, double* y) {
  for (int i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

void sub_scalar(int n, const double* a, const double* b, double* y) {
  for (int i = 0; i < n; ++i) y[i] = a[i] - b[i];
}

void mul_scalar(int n, const double* a, const double* b, double* y) {
  for (int i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

void scale_scalar(int n, double s, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] = s * x[i];
}

void lrelu_scalar(int n, double slope, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] = x[i] >= 0.0 ? x[i] : slope * x[i];
}

void lrelu_grad_scalar(int n, double slope, const double* x, const double* g, double* gx) {
  for (int i = 0; i < n; ++i) gx[i] += g[i] * (x[i] >= 0.0 ? 1.0 : slope);
}

double sum_scalar(int n, const double* x) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double maxv_scalar(int n, const double* x) {
  double m = x[0];
  for (int i = 1; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops table{
      Backend::scalar, "scalar",
      gemm_nn_scalar,  gemm_nt_scalar,  gemm_tn_scalar,
      dot_scalar,      axpy_scalar,     add_scalar,   sub_scalar, mul_scalar,
      scale_scalar,    lrelu_scalar,    lrelu_grad_scalar,
      sum_scalar,      maxv_scalar,
  };
  return table;
}

}  // namespace gfl::kernels
