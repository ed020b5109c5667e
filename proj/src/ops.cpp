// Elementwise, reduction, linear-algebra, shape and normalization ops.

#include "gfl/ops.hpp"

#include <cmath>
#include <cstring>
#include <omp.h>

#include "op_detail.hpp"

namespace gfl {

using detail::fail;
using detail::k;
using detail::require;

namespace detail {

void transpose_into(const double* src, double* dst, int rows, int cols) {
  constexpr int kBlock = 32;
  for (int i0 = 0; i0 < rows; i0 += kBlock)
    for (int j0 = 0; j0 < cols; j0 += kBlock) {
      const int i1 = std::min(rows, i0 + kBlock);
      const int j1 = std::min(cols, j0 + kBlock);
      for (int i = i0; i < i1; ++i)
        for (int j = j0; j < j1; ++j)
          dst[static_cast<size_t>(j) * rows + i] = src[static_cast<size_t>(i) * cols + j];
    }
}

// Row range of a k-blocked nn GEMM. A k-slice is packed into scratch so the
// hot B panel stays L2-resident; accumulation order over k is unchanged, so
// results are bit-identical to the unblocked kernel.
void gemm_nn_serial(const double* a, const double* b, double* c, int rows, int q, int r) {
  constexpr int kKB = 192;
  if (1LL * q * r * 8 < (1 << 20) || q <= kKB) {
    k().gemm_nn(a, b, c, rows, q, r);
    return;
  }
  thread_local std::vector<double> pack;
  pack.resize(static_cast<size_t>(rows) * kKB);
  for (int k0 = 0; k0 < q; k0 += kKB) {
    const int kb = std::min(kKB, q - k0);
    for (int i = 0; i < rows; ++i)
      std::memcpy(pack.data() + static_cast<size_t>(i) * kb,
                  a + static_cast<size_t>(i) * q + k0, sizeof(double) * static_cast<size_t>(kb));
    k().gemm_nn(pack.data(), b + static_cast<size_t>(k0) * r, c, rows, kb, r);
  }
}

void par_gemm_nn(const double* a, const double* b, double* c, int p, int q, int r) {
  const long long work = 1LL * p * q * r;
  const int threads = kernels::max_threads();
  if (work < (1 << 18) || threads <= 1 || p < 2) {
    gemm_nn_serial(a, b, c, p, q, r);
    return;
  }
#pragma omp parallel for schedule(static) num_threads(threads)
  for (int t = 0; t < threads; ++t) {
    const int lo = static_cast<int>(1LL * p * t / threads);
    const int hi = static_cast<int>(1LL * p * (t + 1) / threads);
    if (hi > lo)
      gemm_nn_serial(a + static_cast<size_t>(lo) * q, b, c + static_cast<size_t>(lo) * r,
                     hi - lo, q, r);
  }
}

void par_gemm_nt(const double* a, const double* b, double* c, int p, int q, int r) {
  const long long work = 1LL * p * q * r;
  const int threads = kernels::max_threads();
  if (work < (1 << 18) || threads <= 1 || p < 2) {
    k().gemm_nt(a, b, c, p, q, r);
    return;
  }
#pragma omp parallel for schedule(static) num_threads(threads)
  for (int t = 0; t < threads; ++t) {
    const int lo = static_cast<int>(1LL * p * t / threads);
    const int hi = static_cast<int>(1LL * p * (t + 1) / threads);
    if (hi > lo)
      k().gemm_nt(a + static_cast<size_t>(lo) * q, b, c + static_cast<size_t>(lo) * r,
                  hi - lo, q, r);
  }
}

void par_gemm_tn(const double* a, const double* b, double* c, int p, int q, int r) {
  // Small outputs stay cache-resident under the direct kernel; large ones are
  // worth a transpose so the nn tile kernel can stream them.
  if (1LL * p * q * r < (1 << 16) || 1LL * q * r <= (1 << 15)) {
    k().gemm_tn(a, b, c, p, q, r);
    return;
  }
  thread_local std::vector<double> at;
  at.resize(static_cast<size_t>(p) * q);
  transpose_into(a, at.data(), p, q);
  par_gemm_nn(at.data(), b, c, q, p, r);
}

}  // namespace detail

namespace {

int n_of(const Var& v) { return static_cast<int>(v->value.numel()); }

void acc_same_shape(const Var& in, const Tensor& g) { accumulate_grad(in, g); }

}  // namespace

// ---------------- elementwise ----------------

Var add(const Var& a, const Var& b) {
  require(a->value.same_shape(b->value), "add: shape mismatch " + a->value.shape_str() +
                                             " vs " + b->value.shape_str());
  Tensor out(a->value.shape());
  k().add(n_of(a), a->value.data(), b->value.data(), out.data());
  return make_op("add", std::move(out), {a, b}, [](Node& n) {
    if (n.inputs[0]->requires_grad) acc_same_shape(n.inputs[0], n.grad);
    if (n.inputs[1]->requires_grad) acc_same_shape(n.inputs[1], n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require(a->value.same_shape(b->value), "sub: shape mismatch");
  Tensor out(a->value.shape());
  k().sub(n_of(a), a->value.data(), b->value.data(), out.data());
  return make_op("sub", std::move(out), {a, b}, [](Node& n) {
    if (n.inputs[0]->requires_grad) acc_same_shape(n.inputs[0], n.grad);
    if (n.inputs[1]->requires_grad)
      k().axpy(static_cast<int>(n.grad.numel()), -1.0, n.grad.data(),
               n.inputs[1]->ensure_grad().data());
  });
}

Var mul(const Var& a, const Var& b) {
  require(a->value.same_shape(b->value), "mul: shape mismatch");
  Tensor out(a->value.shape());
  k().mul(n_of(a), a->value.data(), b->value.data(), out.data());
  return make_op("mul", std::move(out), {a, b}, [](Node& n) {
    const int m = static_cast<int>(n.grad.numel());
    if (n.inputs[0]->requires_grad) {
      Tensor t(n.grad.shape());
      k().mul(m, n.grad.data(), n.inputs[1]->value.data(), t.data());
      acc_same_shape(n.inputs[0], t);
    }
    if (n.inputs[1]->requires_grad) {
      Tensor t(n.grad.shape());
      k().mul(m, n.grad.data(), n.inputs[0]->value.data(), t.data());
      acc_same_shape(n.inputs[1], t);
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out(a->value.shape());
  k().scale(n_of(a), s, a->value.data(), out.data());
  return make_op("scale", std::move(out), {a}, [s](Node& n) {
    if (n.inputs[0]->requires_grad)
      k().axpy(static_cast<int>(n.grad.numel()), s, n.grad.data(),
               n.inputs[0]->ensure_grad().data());
  });
}

Var leaky_relu(const Var& x, double slope) {
  Tensor out(x->value.shape());
  k().lrelu(n_of(x), slope, x->value.data(), out.data());
  return make_op("leaky_relu", std::move(out), {x}, [slope](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    k().lrelu_grad(static_cast<int>(n.grad.numel()), slope, n.inputs[0]->value.data(),
                   n.grad.data(), n.inputs[0]->ensure_grad().data());
  });
}

Var softplus(const Var& x) {
  Tensor out(x->value.shape());
  const double* in = x->value.data();
  for (int64_t i = 0; i < out.numel(); ++i) {
    const double v = in[i];
    out[i] = v > 30.0 ? v : (v < -30.0 ? std::exp(v) : std::log1p(std::exp(v)));
  }
  return make_op("softplus", std::move(out), {x}, [](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    Tensor& gx = n.inputs[0]->ensure_grad();
    const double* in = n.inputs[0]->value.data();
    for (int64_t i = 0; i < n.grad.numel(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-in[i]));
      gx[i] += n.grad[i] * s;
    }
  });
}

Var clamp(const Var& x, double lo, double hi) {
  Tensor out(x->value.shape());
  const double* in = x->value.data();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::min(hi, std::max(lo, in[i]));
  return make_op("clamp", std::move(out), {x}, [lo, hi](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    Tensor& gx = n.inputs[0]->ensure_grad();
    const double* in = n.inputs[0]->value.data();
    for (int64_t i = 0; i < n.grad.numel(); ++i)
      if (in[i] >= lo && in[i] <= hi) gx[i] += n.grad[i];
  });
}

Var add_scaled_const(const Var& x, Tensor noise, const Var& strength) {
  require(strength->value.numel() == 1, "add_scaled_const: strength must be scalar");
  require(x->value.same_shape(noise), "add_scaled_const: noise shape mismatch");
  Tensor out = x->value;
  k().axpy(n_of(x), strength->value[0], noise.data(), out.data());
  auto saved = std::make_shared<Tensor>(std::move(noise));
  return make_op("add_scaled_const", std::move(out), {x, strength}, [saved](Node& n) {
    if (n.inputs[0]->requires_grad) acc_same_shape(n.inputs[0], n.grad);
    if (n.inputs[1]->requires_grad)
      n.inputs[1]->ensure_grad()[0] +=
          k().dot(static_cast<int>(n.grad.numel()), n.grad.data(), saved->data());
  });
}

// ---------------- reductions ----------------

Var sum(const Var& x) {
  Tensor out = Tensor::scalar(k().sum(n_of(x), x->value.data()));
  return make_op("sum", std::move(out), {x}, [](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    Tensor& gx = n.inputs[0]->ensure_grad();
    const double g = n.grad[0];
    for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += g;
  });
}

Var mean(const Var& x) {
  const double inv = 1.0 / static_cast<double>(x->value.numel());
  Tensor out = Tensor::scalar(k().sum(n_of(x), x->value.data()) * inv);
  return make_op("mean", std::move(out), {x}, [inv](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    Tensor& gx = n.inputs[0]->ensure_grad();
    const double g = n.grad[0] * inv;
    for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += g;
  });
}

Var mean_rows(const Var& x) {
  require(x->value.rank() == 2, "mean_rows: rank-2 input required");
  const int64_t rows = x->value.dim(0), cols = x->value.dim(1);
  Tensor out({cols});
  const double inv = 1.0 / static_cast<double>(rows);
  for (int64_t i = 0; i < rows; ++i)
    k().axpy(static_cast<int>(cols), inv, x->value.data() + i * cols, out.data());
  return make_op("mean_rows", std::move(out), {x}, [rows, cols, inv](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    Tensor& gx = n.inputs[0]->ensure_grad();
    for (int64_t i = 0; i < rows; ++i)
      k().axpy(static_cast<int>(cols), inv, n.grad.data(), gx.data() + i * cols);
  });
}

// ---------------- linear algebra ----------------

Var matmul(const Var& a, const Var& b) {
  require(a->value.rank() == 2 && b->value.rank() == 2, "matmul: rank-2 inputs required");
  require(a->value.dim(1) == b->value.dim(0),
          "matmul: inner dimensions disagree: " + a->value.shape_str() + " vs " +
              b->value.shape_str());
  const int p = static_cast<int>(a->value.dim(0));
  const int q = static_cast<int>(a->value.dim(1));
  const int r = static_cast<int>(b->value.dim(1));
  Tensor out({p, r});
  detail::par_gemm_nn(a->value.data(), b->value.data(), out.data(), p, q, r);
  return make_op("matmul", std::move(out), {a, b}, [p, q, r](Node& n) {
    if (n.inputs[0]->requires_grad)  // dA += G · B^T
      detail::par_gemm_nt(n.grad.data(), n.inputs[1]->value.data(),
                          n.inputs[0]->ensure_grad().data(), p, r, q);
    if (n.inputs[1]->requires_grad)  // dB += A^T · G
      detail::par_gemm_tn(n.inputs[0]->value.data(), n.grad.data(),
                          n.inputs[1]->ensure_grad().data(), p, q, r);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  require(a->value.rank() == 2 && b->value.rank() == 2, "matmul_nt: rank-2 inputs required");
  require(a->value.dim(1) == b->value.dim(1), "matmul_nt: inner dimensions disagree");
  const int p = static_cast<int>(a->value.dim(0));
  const int q = static_cast<int>(a->value.dim(1));
  const int r = static_cast<int>(b->value.dim(0));
  Tensor out({p, r});
  detail::par_gemm_nt(a->value.data(), b->value.data(), out.data(), p, q, r);
  return make_op("matmul_nt", std::move(out), {a, b}, [p, q, r](Node& n) {
    if (n.inputs[0]->requires_grad)  // dA += G · B
      detail::par_gemm_nn(n.grad.data(), n.inputs[1]->value.data(),
                          n.inputs[0]->ensure_grad().data(), p, r, q);
    if (n.inputs[1]->requires_grad)  // dB += G^T · A
      detail::par_gemm_tn(n.grad.data(), n.inputs[0]->value.data(),
                          n.inputs[1]->ensure_grad().data(), p, r, q);
  });
}

Var add_row_bias(const Var& x, const Var& b) {
  require(x->value.rank() == 2 && b->value.rank() == 1, "add_row_bias: [n x d] + [d]");
  require(x->value.dim(1) == b->value.dim(0), "add_row_bias: width mismatch");
  const int64_t rows = x->value.dim(0), cols = x->value.dim(1);
  Tensor out(x->value.shape());
  for (int64_t i = 0; i < rows; ++i)
    k().add(static_cast<int>(cols), x->value.data() + i * cols, b->value.data(),
            out.data() + i * cols);
  return make_op("add_row_bias", std::move(out), {x, b}, [rows, cols](Node& n) {
    if (n.inputs[0]->requires_grad) acc_same_shape(n.inputs[0], n.grad);
    if (n.inputs[1]->requires_grad) {
      Tensor& gb = n.inputs[1]->ensure_grad();
      for (int64_t i = 0; i < rows; ++i)
        k().axpy(static_cast<int>(cols), 1.0, n.grad.data() + i * cols, gb.data());
    }
  });
}

Var linear(const Var& x, const Var& w, const Var& b) { return add_row_bias(matmul(x, w), b); }

// ---------------- rows/columns/shape ----------------

Var reshape(const Var& x, std::vector<int64_t> shape) {
  Tensor out(std::move(shape));
  require(out.numel() == x->value.numel(), "reshape: element count mismatch");
  std::memcpy(out.data(), x->value.data(), sizeof(double) * static_cast<size_t>(out.numel()));
  return make_op("reshape", std::move(out), {x}, [](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    k().axpy(static_cast<int>(n.grad.numel()), 1.0, n.grad.data(),
             n.inputs[0]->ensure_grad().data());
  });
}

Var concat_cols(const std::vector<Var>& xs) {
  require(!xs.empty(), "concat_cols: empty input list");
  const int64_t rows = xs[0]->value.dim(0);
  int64_t total = 0;
  for (const Var& x : xs) {
    require(x->value.rank() == 2 && x->value.dim(0) == rows, "concat_cols: row mismatch");
    total += x->value.dim(1);
  }
  Tensor out({rows, total});
  int64_t off = 0;
  for (const Var& x : xs) {
    const int64_t d = x->value.dim(1);
    for (int64_t i = 0; i < rows; ++i)
      std::memcpy(out.data() + i * total + off, x->value.data() + i * d,
                  sizeof(double) * static_cast<size_t>(d));
    off += d;
  }
  return make_op("concat_cols", std::move(out), std::vector<Var>(xs), [rows, total](Node& n) {
    int64_t off = 0;
    for (const Var& in : n.inputs) {
      const int64_t d = in->value.dim(1);
      if (in->requires_grad) {
        Tensor& gx = in->ensure_grad();
        for (int64_t i = 0; i < rows; ++i)
          k().axpy(static_cast<int>(d), 1.0, n.grad.data() + i * total + off,
                   gx.data() + i * d);
      }
      off += d;
    }
  });
}

Var slice_cols(const Var& x, int64_t j0, int64_t j1) {
  require(x->value.rank() == 2, "slice_cols: rank-2 input required");
  const int64_t rows = x->value.dim(0), cols = x->value.dim(1);
  require(0 <= j0 && j0 < j1 && j1 <= cols, "slice_cols: bad range");
  const int64_t d = j1 - j0;
  Tensor out({rows, d});
  for (int64_t i = 0; i < rows; ++i)
    std::memcpy(out.data() + i * d, x->value.data() + i * cols + j0,
                sizeof(double) * static_cast<size_t>(d));
  return make_op("slice_cols", std::move(out), {x}, [rows, cols, j0, d](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    Tensor& gx = n.inputs[0]->ensure_grad();
    for (int64_t i = 0; i < rows; ++i)
      k().axpy(static_cast<int>(d), 1.0, n.grad.data() + i * d, gx.data() + i * cols + j0);
  });
}

Var concat_rows(const std::vector<Var>& xs) {
  require(!xs.empty(), "concat_rows: empty input list");
  const int64_t cols = xs[0]->value.dim(1);
  int64_t total = 0;
  for (const Var& x : xs) {
    require(x->value.rank() == 2 && x->value.dim(1) == cols, "concat_rows: column mismatch");
    total += x->value.dim(0);
  }
  Tensor out({total, cols});
  int64_t row = 0;
  for (const Var& x : xs) {
    std::memcpy(out.data() + row * cols, x->value.data(),
                sizeof(double) * static_cast<size_t>(x->value.numel()));
    row += x->value.dim(0);
  }
  return make_op("concat_rows", std::move(out), std::vector<Var>(xs), [cols](Node& n) {
    int64_t row = 0;
    for (const Var& in : n.inputs) {
      const int64_t cnt = in->value.numel();
      if (in->requires_grad)
        k().axpy(static_cast<int>(cnt), 1.0, n.grad.data() + row * cols,
                 in->ensure_grad().data());
      row += in->value.dim(0);
    }
  });
}

Var slice_rows(const Var& x, int64_t i0, int64_t i1) {
  require(x->value.rank() == 2, "slice_rows: rank-2 input required");
  const int64_t rows = x->value.dim(0), cols = x->value.dim(1);
  require(0 <= i0 && i0 < i1 && i1 <= rows, "slice_rows: bad range");
  Tensor out({i1 - i0, cols});
  std::memcpy(out.data(), x->value.data() + i0 * cols,
              sizeof(double) * static_cast<size_t>(out.numel()));
  return make_op("slice_rows", std::move(out), {x}, [i0, cols](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    k().axpy(static_cast<int>(n.grad.numel()), 1.0, n.grad.data(),
             n.inputs[0]->ensure_grad().data() + i0 * cols);
  });
}

// ---------------- normalization ----------------

Var softmax_rows(const Var& x) {
  require(x->value.rank() == 2, "softmax_rows: rank-2 input required");
  const int64_t rows = x->value.dim(0), cols = x->value.dim(1);
  Tensor out(x->value.shape());
  for (int64_t i = 0; i < rows; ++i) {
    const double* xi = x->value.data() + i * cols;
    double* yi = out.data() + i * cols;
    const double m = k().maxv(static_cast<int>(cols), xi);
    double z = 0.0;
    for (int64_t j = 0; j < cols; ++j) {
      yi[j] = std::exp(xi[j] - m);
      z += yi[j];
    }
    const double inv = 1.0 / z;
    for (int64_t j = 0; j < cols; ++j) yi[j] *= inv;
  }
  return make_op("softmax_rows", std::move(out), {x}, [rows, cols](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    Tensor& gx = n.inputs[0]->ensure_grad();
    for (int64_t i = 0; i < rows; ++i) {
      const double* y = n.value.data() + i * cols;
      const double* g = n.grad.data() + i * cols;
      double* out = gx.data() + i * cols;
      const double dot = k().dot(static_cast<int>(cols), g, y);
      for (int64_t j = 0; j < cols; ++j) out[j] += y[j] * (g[j] - dot);
    }
  });
}

Var instance_norm_cols(const Var& x, double eps) {
  require(x->value.rank() == 2, "instance_norm_cols: rank-2 input required");
  return instance_norm_cols_grouped(x, 1, eps);
}

Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias, double eps) {
  require(x->value.rank() == 2, "layer_norm_rows: rank-2 input required");
  const int64_t rows = x->value.dim(0), cols = x->value.dim(1);
  require(gain->value.numel() == cols && bias->value.numel() == cols,
          "layer_norm_rows: gain/bias width mismatch");
  Tensor out(x->value.shape());
  auto xhat = std::make_shared<Tensor>(x->value.shape());
  auto inv_s = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));
  const double invd = 1.0 / static_cast<double>(cols);
  for (int64_t i = 0; i < rows; ++i) {
    const double* xi = x->value.data() + i * cols;
    double mu = k().sum(static_cast<int>(cols), xi) * invd;
    double var = 0.0;
    for (int64_t j = 0; j < cols; ++j) {
      const double u = xi[j] - mu;
      var += u * u;
    }
    var *= invd;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_s)[static_cast<size_t>(i)] = is;
    for (int64_t j = 0; j < cols; ++j) {
      const double h = (xi[j] - mu) * is;
      xhat->at(i, j) = h;
      out.at(i, j) = h * gain->value[j] + bias->value[j];
    }
  }
  return make_op("layer_norm_rows", std::move(out), {x, gain, bias},
                 [rows, cols, xhat, inv_s](Node& n) {
                   const double invd = 1.0 / static_cast<double>(cols);
                   if (n.inputs[1]->requires_grad) {
                     Tensor& gg = n.inputs[1]->ensure_grad();
                     for (int64_t i = 0; i < rows; ++i)
                       for (int64_t j = 0; j < cols; ++j)
                         gg[j] += n.grad.at(i, j) * xhat->at(i, j);
                   }
                   if (n.inputs[2]->requires_grad) {
                     Tensor& gb = n.inputs[2]->ensure_grad();
                     for (int64_t i = 0; i < rows; ++i)
                       k().axpy(static_cast<int>(cols), 1.0, n.grad.data() + i * cols,
                                gb.data());
                   }
                   if (n.inputs[0]->requires_grad) {
                     Tensor& gx = n.inputs[0]->ensure_grad();
                     const Tensor& gain = n.inputs[1]->value;
                     for (int64_t i = 0; i < rows; ++i) {
                       const double is = (*inv_s)[static_cast<size_t>(i)];
                       double dsum = 0.0, dxsum = 0.0;
                       for (int64_t j = 0; j < cols; ++j) {
                         const double d = n.grad.at(i, j) * gain[j];
                         dsum += d;
                         dxsum += d * xhat->at(i, j);
                       }
                       for (int64_t j = 0; j < cols; ++j) {
                         const double d = n.grad.at(i, j) * gain[j];
                         gx.at(i, j) +=
                             is * (d - invd * dsum - xhat->at(i, j) * invd * dxsum);
                       }
                     }
                   }
                 });
}

}  // namespace gfl
