// Fused batch ops: block-diagonal attention, grouped normalization and the
// layout shuffles between [N,C,H,W] maps and stacked row matrices. These are
// what the networks run; the single-group forms in attention.cpp define the
// reference semantics they are tested against.

#include <cmath>
#include <cstring>
#include <omp.h>

#include "gfl/ops.hpp"
#include "op_detail.hpp"

namespace gfl {

using detail::fail;
using detail::k;

namespace {

void softmax_rows_raw(double* s, int64_t rows, int64_t cols) {
  for (int64_t i = 0; i < rows; ++i) {
    double* row = s + i * cols;
    const double m = k().maxv(static_cast<int>(cols), row);
    double z = 0.0;
    for (int64_t j = 0; j < cols; ++j) {
      row[j] = std::exp(row[j] - m);
      z += row[j];
    }
    const double inv = 1.0 / z;
    for (int64_t j = 0; j < cols; ++j) row[j] *= inv;
  }
}

// Gathers head column-block `h0..h0+hd` of src [rows x d] into dst [rows x hd].
void gather_cols(const double* src, double* dst, int64_t rows, int64_t d, int64_t h0,
                 int64_t hd) {
  for (int64_t i = 0; i < rows; ++i)
    std::memcpy(dst + i * hd, src + i * d + h0, sizeof(double) * static_cast<size_t>(hd));
}

void scatter_cols_add(const double* src, double* dst, int64_t rows, int64_t d, int64_t h0,
                      int64_t hd) {
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < hd; ++j) dst[i * d + h0 + j] += src[i * hd + j];
}

}  // namespace

Var block_attention(const Var& q, const Var& k_in, const Var& v, int64_t groups, int heads,
                    Var* weights_out) {
  const Tensor& qv = q->value;
  const Tensor& kv = k_in->value;
  const Tensor& vv = v->value;
  if (qv.rank() != 2 || kv.rank() != 2 || vv.rank() != 2)
    fail("block_attention: rank-2 inputs required");
  const int64_t d = qv.dim(1);
  if (d < 1 || kv.dim(1) != d) fail("block_attention: query/key width mismatch");
  if (kv.dim(0) != vv.dim(0)) fail("block_attention: key/value row count mismatch");
  if (groups < 1 || qv.dim(0) % groups != 0 || kv.dim(0) % groups != 0)
    fail("block_attention: rows must split evenly into groups");
  if (heads < 1 || d % heads != 0 || vv.dim(1) % heads != 0)
    fail("block_attention: width must divide by head count");
  const int64_t p = qv.dim(0) / groups;
  const int64_t rows_k = kv.dim(0) / groups;
  const int64_t dv = vv.dim(1);
  const int64_t dk = d / heads;
  const int64_t dvh = dv / heads;
  const double alpha = 1.0 / std::sqrt(static_cast<double>(dk));

  Tensor out({qv.dim(0), dv});
  auto weights = std::make_shared<Tensor>(
      std::vector<int64_t>{qv.dim(0) * heads, rows_k});  // heads stacked per group

  const int threads = std::min<int>(kernels::max_threads(), static_cast<int>(groups));
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
  for (int64_t g = 0; g < groups; ++g) {
    thread_local std::vector<double> qh, kh, vh;
    for (int h = 0; h < heads; ++h) {
      const double* qg;
      const double* kg;
      const double* vg;
      if (heads == 1) {
        qg = qv.data() + g * p * d;
        kg = kv.data() + g * rows_k * d;
        vg = vv.data() + g * rows_k * dv;
      } else {
        qh.resize(static_cast<size_t>(p * dk));
        kh.resize(static_cast<size_t>(rows_k * dk));
        vh.resize(static_cast<size_t>(rows_k * dvh));
        gather_cols(qv.data() + g * p * d, qh.data(), p, d, h * dk, dk);
        gather_cols(kv.data() + g * rows_k * d, kh.data(), rows_k, d, h * dk, dk);
        gather_cols(vv.data() + g * rows_k * dv, vh.data(), rows_k, dv, h * dvh, dvh);
        qg = qh.data();
        kg = kh.data();
        vg = vh.data();
      }
      double* w = weights->data() + (g * heads + h) * p * rows_k;
      std::memset(w, 0, sizeof(double) * static_cast<size_t>(p * rows_k));
      k().gemm_nt(qg, kg, w, static_cast<int>(p), static_cast<int>(dk),
                  static_cast<int>(rows_k));
      k().scale(static_cast<int>(p * rows_k), alpha, w, w);
      softmax_rows_raw(w, p, rows_k);
      if (heads == 1) {
        detail::gemm_nn_serial(w, vg, out.data() + g * p * dv, static_cast<int>(p),
                               static_cast<int>(rows_k), static_cast<int>(dv));
      } else {
        std::vector<double> oh(static_cast<size_t>(p * dvh), 0.0);
        detail::gemm_nn_serial(w, vg, oh.data(), static_cast<int>(p),
                               static_cast<int>(rows_k), static_cast<int>(dvh));
        scatter_cols_add(oh.data(), out.data() + g * p * dv, p, dv, h * dvh, dvh);
      }
    }
  }
  if (weights_out) *weights_out = make_const(*weights);

  return make_op(
      "block_attention", std::move(out), {q, k_in, v},
      [groups, heads, p, rows_k, d, dv, dk, dvh, alpha, weights](Node& n) {
        const bool want_q = n.inputs[0]->requires_grad;
        const bool want_k = n.inputs[1]->requires_grad;
        const bool want_v = n.inputs[2]->requires_grad;
        if (!want_q && !want_k && !want_v) return;
        const Tensor& qv = n.inputs[0]->value;
        const Tensor& kv = n.inputs[1]->value;
        const Tensor& vv = n.inputs[2]->value;
        Tensor* gq = want_q ? &n.inputs[0]->ensure_grad() : nullptr;
        Tensor* gk = want_k ? &n.inputs[1]->ensure_grad() : nullptr;
        Tensor* gv = want_v ? &n.inputs[2]->ensure_grad() : nullptr;
        const int threads = std::min<int>(kernels::max_threads(), static_cast<int>(groups));
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
        for (int64_t g = 0; g < groups; ++g) {
          thread_local std::vector<double> qh, kh, vh, goh, dw, ds, tmp;
          for (int h = 0; h < heads; ++h) {
            const double* w = weights->data() + (g * heads + h) * p * rows_k;
            const double* qg;
            const double* kg;
            const double* vg;
            const double* go;
            if (heads == 1) {
              qg = qv.data() + g * p * d;
              kg = kv.data() + g * rows_k * d;
              vg = vv.data() + g * rows_k * dv;
              go = n.grad.data() + g * p * dv;
            } else {
              qh.resize(static_cast<size_t>(p * dk));
              kh.resize(static_cast<size_t>(rows_k * dk));
              vh.resize(static_cast<size_t>(rows_k * dvh));
              goh.resize(static_cast<size_t>(p * dvh));
              gather_cols(qv.data() + g * p * d, qh.data(), p, d, h * dk, dk);
              gather_cols(kv.data() + g * rows_k * d, kh.data(), rows_k, d, h * dk, dk);
              gather_cols(vv.data() + g * rows_k * dv, vh.data(), rows_k, dv, h * dvh, dvh);
              gather_cols(n.grad.data() + g * p * dv, goh.data(), p, dv, h * dvh, dvh);
              qg = qh.data();
              kg = kh.data();
              vg = vh.data();
              go = goh.data();
            }
            // dV += W^T dO
            if (want_v) {
              if (heads == 1) {
                k().gemm_tn(w, go, gv->data() + g * rows_k * dv, static_cast<int>(p),
                            static_cast<int>(rows_k), static_cast<int>(dv));
              } else {
                tmp.assign(static_cast<size_t>(rows_k * dvh), 0.0);
                k().gemm_tn(w, go, tmp.data(), static_cast<int>(p), static_cast<int>(rows_k),
                            static_cast<int>(dvh));
                scatter_cols_add(tmp.data(), gv->data() + g * rows_k * dv, rows_k, dv,
                                 h * dvh, dvh);
              }
            }
            if (!want_q && !want_k) continue;
            // dS = alpha * W .* (dW - rowdot(dW, W)), dW = dO V^T
            dw.assign(static_cast<size_t>(p * rows_k), 0.0);
            k().gemm_nt(go, vg, dw.data(), static_cast<int>(p),
                        static_cast<int>(heads == 1 ? dv : dvh), static_cast<int>(rows_k));
            ds.resize(static_cast<size_t>(p * rows_k));
            for (int64_t i = 0; i < p; ++i) {
              const double* wi = w + i * rows_k;
              const double* dwi = dw.data() + i * rows_k;
              double* dsi = ds.data() + i * rows_k;
              const double dot = k().dot(static_cast<int>(rows_k), dwi, wi);
              for (int64_t j = 0; j < rows_k; ++j) dsi[j] = alpha * wi[j] * (dwi[j] - dot);
            }
            if (want_q) {
              if (heads == 1) {
                detail::gemm_nn_serial(ds.data(), kg, gq->data() + g * p * d,
                                       static_cast<int>(p), static_cast<int>(rows_k),
                                       static_cast<int>(dk));
              } else {
                tmp.assign(static_cast<size_t>(p * dk), 0.0);
                detail::gemm_nn_serial(ds.data(), kg, tmp.data(), static_cast<int>(p),
                                       static_cast<int>(rows_k), static_cast<int>(dk));
                scatter_cols_add(tmp.data(), gq->data() + g * p * d, p, d, h * dk, dk);
              }
            }
            if (want_k) {
              if (heads == 1) {
                k().gemm_tn(ds.data(), qg, gk->data() + g * rows_k * d, static_cast<int>(p),
                            static_cast<int>(rows_k), static_cast<int>(dk));
              } else {
                tmp.assign(static_cast<size_t>(rows_k * dk), 0.0);
                k().gemm_tn(ds.data(), qg, tmp.data(), static_cast<int>(p),
                            static_cast<int>(rows_k), static_cast<int>(dk));
                scatter_cols_add(tmp.data(), gk->data() + g * rows_k * d, rows_k, d, h * dk,
                                 dk);
              }
            }
          }
        }
      });
}

Var instance_norm_cols_grouped(const Var& x, int64_t groups, double eps) {
  const Tensor& xv = x->value;
  if (xv.rank() != 2 || groups < 1 || xv.dim(0) % groups != 0)
    fail("instance_norm_cols_grouped: rows must split evenly into groups");
  const int64_t rows = xv.dim(0) / groups, cols = xv.dim(1);
  Tensor out(xv.shape());
  auto stats = std::make_shared<Tensor>(std::vector<int64_t>{groups * 2, cols});
  const double invn = 1.0 / static_cast<double>(rows);
  for (int64_t g = 0; g < groups; ++g) {
    double* mu = stats->data() + (2 * g) * cols;
    double* sig = stats->data() + (2 * g + 1) * cols;
    const double* xg = xv.data() + g * rows * cols;
    for (int64_t i = 0; i < rows; ++i)
      k().axpy(static_cast<int>(cols), invn, xg + i * cols, mu);
    for (int64_t i = 0; i < rows; ++i)
      for (int64_t j = 0; j < cols; ++j) {
        const double u = xg[i * cols + j] - mu[j];
        sig[j] += u * u;
      }
    for (int64_t j = 0; j < cols; ++j) sig[j] = std::sqrt(sig[j] * invn);
    double* og = out.data() + g * rows * cols;
    for (int64_t i = 0; i < rows; ++i)
      for (int64_t j = 0; j < cols; ++j)
        og[i * cols + j] = (xg[i * cols + j] - mu[j]) / (sig[j] + eps);
  }
  return make_op("instance_norm_cols_grouped", std::move(out), {x},
                 [groups, rows, cols, eps, stats, invn](Node& n) {
                   if (!n.inputs[0]->requires_grad) return;
                   Tensor& gx = n.inputs[0]->ensure_grad();
                   const Tensor& xv = n.inputs[0]->value;
                   for (int64_t g = 0; g < groups; ++g) {
                     const double* mu = stats->data() + (2 * g) * cols;
                     const double* sig = stats->data() + (2 * g + 1) * cols;
                     const double* xg = xv.data() + g * rows * cols;
                     const double* gg = n.grad.data() + g * rows * cols;
                     double* dst = gx.data() + g * rows * cols;
                     for (int64_t j = 0; j < cols; ++j) {
                       const double m = mu[j], sg = sig[j];
                       const double s = sg + eps;
                       double gu_dot = 0.0, g_sum = 0.0;
                       for (int64_t i = 0; i < rows; ++i) {
                         gu_dot += gg[i * cols + j] * (xg[i * cols + j] - m);
                         g_sum += gg[i * cols + j];
                       }
                       const double sig_term = sg > 0.0 ? gu_dot * invn / (s * s * sg) : 0.0;
                       const double g_mean = g_sum * invn / s;
                       for (int64_t i = 0; i < rows; ++i)
                         dst[i * cols + j] += gg[i * cols + j] / s - g_mean -
                                              sig_term * (xg[i * cols + j] - m);
                     }
                   }
                 });
}

Var nchw_to_rows(const Var& x) {
  const Tensor& xv = x->value;
  if (xv.rank() != 4) fail("nchw_to_rows: [N,C,H,W] required");
  const int64_t n = xv.dim(0), c = xv.dim(1), hw = xv.dim(2) * xv.dim(3);
  Tensor out({n * hw, c});
  for (int64_t b = 0; b < n; ++b)
    detail::transpose_into(xv.data() + b * c * hw, out.data() + b * hw * c,
                           static_cast<int>(c), static_cast<int>(hw));
  return make_op("nchw_to_rows", std::move(out), {x}, [n, c, hw](Node& nd) {
    if (!nd.inputs[0]->requires_grad) return;
    Tensor& gx = nd.inputs[0]->ensure_grad();
    thread_local std::vector<double> buf;
    buf.resize(static_cast<size_t>(c * hw));
    for (int64_t b = 0; b < n; ++b) {
      detail::transpose_into(nd.grad.data() + b * hw * c, buf.data(), static_cast<int>(hw),
                             static_cast<int>(c));
      k().axpy(static_cast<int>(c * hw), 1.0, buf.data(), gx.data() + b * c * hw);
    }
  });
}

Var rows_to_nchw(const Var& x, int64_t n, int64_t h, int64_t w) {
  const Tensor& xv = x->value;
  if (xv.rank() != 2 || xv.dim(0) != n * h * w) fail("rows_to_nchw: row count mismatch");
  const int64_t c = xv.dim(1), hw = h * w;
  Tensor out({n, c, h, w});
  for (int64_t b = 0; b < n; ++b)
    detail::transpose_into(xv.data() + b * hw * c, out.data() + b * c * hw,
                           static_cast<int>(hw), static_cast<int>(c));
  return make_op("rows_to_nchw", std::move(out), {x}, [n, c, hw](Node& nd) {
    if (!nd.inputs[0]->requires_grad) return;
    Tensor& gx = nd.inputs[0]->ensure_grad();
    thread_local std::vector<double> buf;
    buf.resize(static_cast<size_t>(c * hw));
    for (int64_t b = 0; b < n; ++b) {
      detail::transpose_into(nd.grad.data() + b * c * hw, buf.data(), static_cast<int>(c),
                             static_cast<int>(hw));
      k().axpy(static_cast<int>(c * hw), 1.0, buf.data(), gx.data() + b * hw * c);
    }
  });
}

Var tile_rows(const Var& x, int64_t times) {
  const Tensor& xv = x->value;
  if (xv.rank() != 2 || times < 1) fail("tile_rows: rank-2 input and positive count required");
  const int64_t sz = xv.numel();
  Tensor out({xv.dim(0) * times, xv.dim(1)});
  for (int64_t t = 0; t < times; ++t)
    std::memcpy(out.data() + t * sz, xv.data(), sizeof(double) * static_cast<size_t>(sz));
  return make_op("tile_rows", std::move(out), {x}, [times, sz](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    Tensor& gx = n.inputs[0]->ensure_grad();
    for (int64_t t = 0; t < times; ++t)
      k().axpy(static_cast<int>(sz), 1.0, n.grad.data() + t * sz, gx.data());
  });
}

Var group_mean_rows(const Var& x, int64_t groups) {
  const Tensor& xv = x->value;
  if (xv.rank() != 2 || groups < 1 || xv.dim(0) % groups != 0)
    fail("group_mean_rows: rows must split evenly into groups");
  const int64_t rows = xv.dim(0) / groups, cols = xv.dim(1);
  const double inv = 1.0 / static_cast<double>(rows);
  Tensor out({groups, cols});
  for (int64_t g = 0; g < groups; ++g)
    for (int64_t i = 0; i < rows; ++i)
      k().axpy(static_cast<int>(cols), inv, xv.data() + (g * rows + i) * cols,
               out.data() + g * cols);
  return make_op("group_mean_rows", std::move(out), {x}, [groups, rows, cols, inv](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    Tensor& gx = n.inputs[0]->ensure_grad();
    for (int64_t g = 0; g < groups; ++g)
      for (int64_t i = 0; i < rows; ++i)
        k().axpy(static_cast<int>(cols), inv, n.grad.data() + g * cols,
                 gx.data() + (g * rows + i) * cols);
  });
}

}  // namespace gfl
