#include "gfl/linalg.hpp"

#include <cmath>

#include "op_detail.hpp"

namespace gfl {

void symmetric_eigen(const Tensor& a, Tensor& eigvals, Tensor& eigvecs) {
  detail::require(a.rank() == 2 && a.dim(0) == a.dim(1), "symmetric_eigen: square input");
  const int64_t n = a.dim(0);
  Tensor m = a;
  eigvecs = Tensor({n, n});
  for (int64_t i = 0; i < n; ++i) eigvecs.at(i, i) = 1.0;

  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int64_t p = 0; p < n; ++p)
      for (int64_t q = p + 1; q < n; ++q) off += m.at(p, q) * m.at(p, q);
    if (off < 1e-24 * static_cast<double>(n * n)) break;
    for (int64_t p = 0; p < n; ++p) {
      for (int64_t q = p + 1; q < n; ++q) {
        const double apq = m.at(p, q);
        if (apq == 0.0) continue;
        const double app = m.at(p, p), aqq = m.at(q, q);
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (int64_t i = 0; i < n; ++i) {
          const double mip = m.at(i, p), miq = m.at(i, q);
          m.at(i, p) = c * mip - s * miq;
          m.at(i, q) = s * mip + c * miq;
        }
        for (int64_t i = 0; i < n; ++i) {
          const double mpi = m.at(p, i), mqi = m.at(q, i);
          m.at(p, i) = c * mpi - s * mqi;
          m.at(q, i) = s * mpi + c * mqi;
        }
        for (int64_t i = 0; i < n; ++i) {
          const double vip = eigvecs.at(i, p), viq = eigvecs.at(i, q);
          eigvecs.at(i, p) = c * vip - s * viq;
          eigvecs.at(i, q) = s * vip + c * viq;
        }
      }
    }
  }
  eigvals = Tensor({n});
  for (int64_t i = 0; i < n; ++i) eigvals[i] = m.at(i, i);
}

Tensor matrix_sqrt_psd(const Tensor& a, double tol) {
  Tensor vals, vecs;
  symmetric_eigen(a, vals, vecs);
  const int64_t n = a.dim(0);
  double scale = 0.0;
  for (int64_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(vals[i]));
  Tensor root({n, n});
  for (int64_t i = 0; i < n; ++i) {
    detail::require(vals[i] > -tol * std::max(1.0, scale),
                    "matrix_sqrt_psd: matrix is not PSD within tolerance");
    const double r = vals[i] > 0.0 ? std::sqrt(vals[i]) : 0.0;
    for (int64_t row = 0; row < n; ++row)
      for (int64_t col = 0; col < n; ++col)
        root.at(row, col) += vecs.at(row, i) * r * vecs.at(col, i);
  }
  return root;
}

Tensor matmul_plain(const Tensor& a, const Tensor& b) {
  detail::require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
                  "matmul_plain: shape mismatch");
  Tensor c({a.dim(0), b.dim(1)});
  kernels::active().gemm_nn(a.data(), b.data(), c.data(), static_cast<int>(a.dim(0)),
                            static_cast<int>(a.dim(1)), static_cast<int>(b.dim(1)));
  return c;
}

double trace(const Tensor& a) {
  double t = 0.0;
  for (int64_t i = 0; i < a.dim(0); ++i) t += a.at(i, i);
  return t;
}

}  // namespace gfl
