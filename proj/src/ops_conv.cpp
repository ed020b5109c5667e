// Image-domain ops: convolution, style-modulated convolution, resampling,
// pooling, AdaIN and the batch plumbing between [N,C,H,W] maps and row
// matrices. Convolutions lower onto the GEMM kernels via im2col.

#include <cmath>
#include <cstring>
#include <omp.h>

#include "gfl/ops.hpp"
#include "op_detail.hpp"

namespace gfl {

using detail::fail;
using detail::k;
using detail::require;

namespace {

struct ConvShape {
  int64_t n, c, h, w, o, ks;
  int64_t hw() const { return h * w; }
  int64_t ck() const { return c * ks * ks; }
};

ConvShape conv_shape(const Tensor& x, const Tensor& wt, const char* who) {
  require(x.rank() == 4 || x.rank() == 3, std::string(who) + ": rank-3/4 input required");
  require(wt.rank() == 4, std::string(who) + ": rank-4 weights required");
  const bool batched = x.rank() == 4;
  ConvShape s{};
  s.n = batched ? x.dim(0) : 1;
  s.c = x.dim(batched ? 1 : 0);
  s.h = x.dim(batched ? 2 : 1);
  s.w = x.dim(batched ? 3 : 2);
  s.o = wt.dim(0);
  s.ks = wt.dim(2);
  require(wt.dim(1) == s.c, std::string(who) + ": channel mismatch");
  require(wt.dim(2) == wt.dim(3) && (s.ks == 1 || s.ks == 3),
          std::string(who) + ": kernel must be 1x1 or 3x3");
  return s;
}

// col is [C*ks*ks x H*W]; zero-padded cross-correlation layout.
void im2col(const double* img, const ConvShape& s, double* col) {
  const int64_t hw = s.hw();
  if (s.ks == 1) {
    std::memcpy(col, img, sizeof(double) * static_cast<size_t>(s.c * hw));
    return;
  }
  for (int64_t c = 0; c < s.c; ++c) {
    const double* src = img + c * hw;
    for (int64_t ky = 0; ky < 3; ++ky) {
      const int64_t dy = ky - 1;
      for (int64_t kx = 0; kx < 3; ++kx) {
        const int64_t dx = kx - 1;
        double* row = col + ((c * 3 + ky) * 3 + kx) * hw;
        for (int64_t y = 0; y < s.h; ++y) {
          double* dst = row + y * s.w;
          const int64_t sy = y + dy;
          if (sy < 0 || sy >= s.h) {
            std::memset(dst, 0, sizeof(double) * static_cast<size_t>(s.w));
            continue;
          }
          const double* srow = src + sy * s.w;
          if (dx == 0) {
            std::memcpy(dst, srow, sizeof(double) * static_cast<size_t>(s.w));
          } else if (dx < 0) {
            dst[0] = 0.0;
            std::memcpy(dst + 1, srow, sizeof(double) * static_cast<size_t>(s.w - 1));
          } else {
            std::memcpy(dst, srow + 1, sizeof(double) * static_cast<size_t>(s.w - 1));
            dst[s.w - 1] = 0.0;
          }
        }
      }
    }
  }
}

void col2im_accum(const double* col, const ConvShape& s, double* img) {
  const int64_t hw = s.hw();
  if (s.ks == 1) {
    k().axpy(static_cast<int>(s.c * hw), 1.0, col, img);
    return;
  }
  for (int64_t c = 0; c < s.c; ++c) {
    double* dst = img + c * hw;
    for (int64_t ky = 0; ky < 3; ++ky) {
      const int64_t dy = ky - 1;
      for (int64_t kx = 0; kx < 3; ++kx) {
        const int64_t dx = kx - 1;
        const double* row = col + ((c * 3 + ky) * 3 + kx) * hw;
        for (int64_t y = 0; y < s.h; ++y) {
          const int64_t sy = y + dy;
          if (sy < 0 || sy >= s.h) continue;
          const double* srow = row + y * s.w;
          double* drow = dst + sy * s.w;
          if (dx == 0) {
            k().axpy(static_cast<int>(s.w), 1.0, srow, drow);
          } else if (dx < 0) {
            k().axpy(static_cast<int>(s.w - 1), 1.0, srow + 1, drow);
          } else {
            k().axpy(static_cast<int>(s.w - 1), 1.0, srow, drow + 1);
          }
        }
      }
    }
  }
}

// One thread-local scratch buffer per worker for im2col lowering.
std::vector<double>& col_scratch() {
  thread_local std::vector<double> buf;
  return buf;
}

void conv_forward_image(const double* img, const double* wmat, const ConvShape& s,
                        double* out) {
  const int64_t hw = s.hw();
  if (s.ks == 1) {
    k().gemm_nn(wmat, img, out, static_cast<int>(s.o), static_cast<int>(s.c),
                static_cast<int>(hw));
    return;
  }
  auto& col = col_scratch();
  col.resize(static_cast<size_t>(s.ck() * hw));
  im2col(img, s, col.data());
  k().gemm_nn(wmat, col.data(), out, static_cast<int>(s.o), static_cast<int>(s.ck()),
              static_cast<int>(hw));
}

// Per-image backward: accumulates dx (disjoint per image) and writes this
// image's weight-gradient contribution into dw_partial (zeroed by caller).
// wmat_t is the pre-transposed [C*ks*ks x O] weight matrix.
void conv_backward_image(const double* img, const double* wmat_t, const double* gy,
                         const ConvShape& s, double* gx, double* dw_partial,
                         bool want_gx, bool want_gw) {
  const int64_t hw = s.hw();
  const int ck = static_cast<int>(s.ck());
  // Weight gradient runs as dW^T = patches · gY^T: the big patch matrix is
  // streamed exactly once and gY stays cache-resident.
  auto weight_grad = [&](const double* patches, int rows) {
    thread_local std::vector<double> dwt;
    dwt.assign(static_cast<size_t>(rows) * s.o, 0.0);
    k().gemm_nt(patches, gy, dwt.data(), rows, static_cast<int>(hw), static_cast<int>(s.o));
    for (int64_t o = 0; o < s.o; ++o)
      for (int i = 0; i < rows; ++i)
        dw_partial[o * rows + i] += dwt[static_cast<size_t>(i) * s.o + o];
  };
  if (s.ks == 1) {
    if (want_gw) weight_grad(img, static_cast<int>(s.c));
    if (want_gx)
      detail::gemm_nn_serial(wmat_t, gy, gx, static_cast<int>(s.c), static_cast<int>(s.o),
                             static_cast<int>(hw));
    return;
  }
  auto& col = col_scratch();
  col.resize(static_cast<size_t>(s.ck() * hw));
  im2col(img, s, col.data());
  if (want_gw) weight_grad(col.data(), ck);
  if (want_gx) {
    std::vector<double> dcol(static_cast<size_t>(s.ck() * hw), 0.0);
    detail::gemm_nn_serial(wmat_t, gy, dcol.data(), ck, static_cast<int>(s.o),
                           static_cast<int>(hw));
    col2im_accum(dcol.data(), s, gx);
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& w) {
  const ConvShape s = conv_shape(x->value, w->value, "conv2d");
  const bool batched = x->value.rank() == 4;
  Tensor out(batched ? std::vector<int64_t>{s.n, s.o, s.h, s.w}
                     : std::vector<int64_t>{s.o, s.h, s.w});
  const int64_t in_stride = s.c * s.hw();
  const int64_t out_stride = s.o * s.hw();
  const int threads = std::min<int>(kernels::max_threads(), static_cast<int>(s.n));
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
  for (int64_t b = 0; b < s.n; ++b)
    conv_forward_image(x->value.data() + b * in_stride, w->value.data(), s,
                       out.data() + b * out_stride);
  return make_op("conv2d", std::move(out), {x, w}, [s, in_stride, out_stride](Node& n) {
    const bool want_gx = n.inputs[0]->requires_grad;
    const bool want_gw = n.inputs[1]->requires_grad;
    if (!want_gx && !want_gw) return;
    const int64_t wsz = s.o * s.ck();
    std::vector<double> dw_parts(want_gw ? static_cast<size_t>(wsz * s.n) : 0, 0.0);
    std::vector<double> wt(static_cast<size_t>(wsz));
    detail::transpose_into(n.inputs[1]->value.data(), wt.data(), static_cast<int>(s.o),
                           static_cast<int>(s.ck()));
    Tensor* gx = want_gx ? &n.inputs[0]->ensure_grad() : nullptr;
    const int threads = std::min<int>(kernels::max_threads(), static_cast<int>(s.n));
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
    for (int64_t b = 0; b < s.n; ++b)
      conv_backward_image(n.inputs[0]->value.data() + b * in_stride, wt.data(),
                          n.grad.data() + b * out_stride, s,
                          want_gx ? gx->data() + b * in_stride : nullptr,
                          want_gw ? dw_parts.data() + b * wsz : nullptr, want_gx, want_gw);
    if (want_gw) {
      Tensor& gw = n.inputs[1]->ensure_grad();
      for (int64_t b = 0; b < s.n; ++b)  // fixed reduction order over the batch
        k().axpy(static_cast<int>(wsz), 1.0, dw_parts.data() + b * wsz, gw.data());
    }
  });
}

Var add_channel_bias(const Var& x, const Var& b) {
  require(x->value.rank() == 4 && b->value.rank() == 1, "add_channel_bias: [N,C,H,W] + [C]");
  require(x->value.dim(1) == b->value.dim(0), "add_channel_bias: channel mismatch");
  const int64_t n = x->value.dim(0), c = x->value.dim(1), hw = x->value.dim(2) * x->value.dim(3);
  Tensor out = x->value;
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < c; ++j) {
      double* p = out.data() + (i * c + j) * hw;
      const double bv = b->value[j];
      for (int64_t t = 0; t < hw; ++t) p[t] += bv;
    }
  return make_op("add_channel_bias", std::move(out), {x, b}, [n, c, hw](Node& n_) {
    if (n_.inputs[0]->requires_grad) accumulate_grad(n_.inputs[0], n_.grad);
    if (n_.inputs[1]->requires_grad) {
      Tensor& gb = n_.inputs[1]->ensure_grad();
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < c; ++j)
          gb[j] += k().sum(static_cast<int>(hw), n_.grad.data() + (i * c + j) * hw);
    }
  });
}

Var modulated_conv(const Var& x, const Var& w, const Var& style, bool demodulate, double eps) {
  const ConvShape s = conv_shape(x->value, w->value, "modulated_conv");
  require(x->value.rank() == 4, "modulated_conv: batched [N,C,H,W] input required");
  require(style->value.rank() == 2 && style->value.dim(0) == s.n &&
              style->value.dim(1) == s.c,
          "modulated_conv: style must be [N x C]");
  const int64_t hw = s.hw();
  const int64_t kk = s.ks * s.ks;
  const int64_t wsz = s.o * s.ck();
  const int64_t in_stride = s.c * hw, out_stride = s.o * hw;
  Tensor out({s.n, s.o, s.h, s.w});

  // Effective per-image weights; rebuilt identically in the backward pass.
  auto build_weff = [s, kk, demodulate, eps](const double* wbase, const double* st,
                                             double* wm, double* denom_inv) {
    for (int64_t o = 0; o < s.o; ++o)
      for (int64_t c = 0; c < s.c; ++c) {
        const double sv = st[c];
        const double* src = wbase + (o * s.c + c) * kk;
        double* dst = wm + (o * s.c + c) * kk;
        for (int64_t t = 0; t < kk; ++t) dst[t] = src[t] * sv;
      }
    if (!demodulate) {
      for (int64_t o = 0; o < s.o; ++o) denom_inv[o] = 1.0;
      return;
    }
    for (int64_t o = 0; o < s.o; ++o) {
      const double* row = wm + o * s.c * kk;
      double sq = eps;
      for (int64_t t = 0; t < s.c * kk; ++t) sq += row[t] * row[t];
      denom_inv[o] = 1.0 / std::sqrt(sq);
    }
  };

  const int threads = std::min<int>(kernels::max_threads(), static_cast<int>(s.n));
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
  for (int64_t b = 0; b < s.n; ++b) {
    std::vector<double> wm(static_cast<size_t>(wsz));
    std::vector<double> dinv(static_cast<size_t>(s.o));
    build_weff(w->value.data(), style->value.data() + b * s.c, wm.data(), dinv.data());
    for (int64_t o = 0; o < s.o; ++o)
      k().scale(static_cast<int>(s.ck()), dinv[o], wm.data() + o * s.ck(),
                wm.data() + o * s.ck());
    conv_forward_image(x->value.data() + b * in_stride, wm.data(), s,
                       out.data() + b * out_stride);
  }

  return make_op(
      "modulated_conv", std::move(out), {x, w, style},
      [s, kk, wsz, hw, in_stride, out_stride, demodulate, build_weff](Node& n) {
        const bool want_gx = n.inputs[0]->requires_grad;
        const bool want_gw = n.inputs[1]->requires_grad;
        const bool want_gs = n.inputs[2]->requires_grad;
        if (!want_gx && !want_gw && !want_gs) return;
        const Tensor& wv = n.inputs[1]->value;
        const Tensor& sv = n.inputs[2]->value;
        Tensor* gx = want_gx ? &n.inputs[0]->ensure_grad() : nullptr;
        std::vector<double> dw_parts((want_gw ? static_cast<size_t>(wsz * s.n) : 0), 0.0);
        std::vector<double> ds_parts((want_gs ? static_cast<size_t>(s.c * s.n) : 0), 0.0);
        const int threads = std::min<int>(kernels::max_threads(), static_cast<int>(s.n));
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
        for (int64_t b = 0; b < s.n; ++b) {
          std::vector<double> wm(static_cast<size_t>(wsz));
          std::vector<double> dinv(static_cast<size_t>(s.o));
          std::vector<double> weff_t(static_cast<size_t>(wsz));
          build_weff(wv.data(), sv.data() + b * s.c, wm.data(), dinv.data());
          {
            std::vector<double> weff(static_cast<size_t>(wsz));
            for (int64_t o = 0; o < s.o; ++o)
              k().scale(static_cast<int>(s.ck()), dinv[o], wm.data() + o * s.ck(),
                        weff.data() + o * s.ck());
            detail::transpose_into(weff.data(), weff_t.data(), static_cast<int>(s.o),
                                   static_cast<int>(s.ck()));
          }
          std::vector<double> dweff(static_cast<size_t>(wsz), 0.0);
          conv_backward_image(n.inputs[0]->value.data() + b * in_stride, weff_t.data(),
                              n.grad.data() + b * out_stride, s,
                              want_gx ? gx->data() + b * in_stride : nullptr, dweff.data(),
                              want_gx, true);
          // Chain through the demodulated weight construction.
          std::vector<double> dwm(static_cast<size_t>(wsz));
          for (int64_t o = 0; o < s.o; ++o) {
            const double d = dinv[o];
            const double* dwe = dweff.data() + o * s.ck();
            const double* wmo = wm.data() + o * s.ck();
            double* dst = dwm.data() + o * s.ck();
            if (demodulate) {
              const double ddot = k().dot(static_cast<int>(s.ck()), dwe, wmo);
              const double coef = d * d * d * ddot;
              for (int64_t t = 0; t < s.ck(); ++t) dst[t] = d * dwe[t] - coef * wmo[t];
            } else {
              std::memcpy(dst, dwe, sizeof(double) * static_cast<size_t>(s.ck()));
            }
          }
          if (want_gw) {
            double* dwp = dw_parts.data() + b * wsz;
            const double* st = sv.data() + b * s.c;
            for (int64_t o = 0; o < s.o; ++o)
              for (int64_t c = 0; c < s.c; ++c) {
                const double svc = st[c];
                const double* src = dwm.data() + (o * s.c + c) * kk;
                double* dst = dwp + (o * s.c + c) * kk;
                for (int64_t t = 0; t < kk; ++t) dst[t] += src[t] * svc;
              }
          }
          if (want_gs) {
            double* dsp = ds_parts.data() + b * s.c;
            for (int64_t o = 0; o < s.o; ++o)
              for (int64_t c = 0; c < s.c; ++c)
                dsp[c] += k().dot(static_cast<int>(kk), dwm.data() + (o * s.c + c) * kk,
                                  wv.data() + (o * s.c + c) * kk);
          }
        }
        if (want_gw) {
          Tensor& gw = n.inputs[1]->ensure_grad();
          for (int64_t b = 0; b < s.n; ++b)
            k().axpy(static_cast<int>(wsz), 1.0, dw_parts.data() + b * wsz, gw.data());
        }
        if (want_gs) {
          Tensor& gs = n.inputs[2]->ensure_grad();
          for (int64_t b = 0; b < s.n; ++b)
            k().axpy(static_cast<int>(s.c), 1.0, ds_parts.data() + b * s.c,
                     gs.data() + b * s.c);
        }
      });
}

Var resample_up(const Var& x) {
  require(x->value.rank() == 4, "resample_up: [N,C,H,W] required");
  const int64_t n = x->value.dim(0), c = x->value.dim(1), h = x->value.dim(2),
                w = x->value.dim(3);
  Tensor out({n, c, 2 * h, 2 * w});
  for (int64_t ic = 0; ic < n * c; ++ic) {
    const double* src = x->value.data() + ic * h * w;
    double* dst = out.data() + ic * 4 * h * w;
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x2 = 0; x2 < w; ++x2) {
        const double v = src[y * w + x2];
        double* d = dst + (2 * y) * (2 * w) + 2 * x2;
        d[0] = v;
        d[1] = v;
        d[2 * w] = v;
        d[2 * w + 1] = v;
      }
  }
  return make_op("resample_up", std::move(out), {x}, [n, c, h, w](Node& nd) {
    if (!nd.inputs[0]->requires_grad) return;
    Tensor& gx = nd.inputs[0]->ensure_grad();
    for (int64_t ic = 0; ic < n * c; ++ic) {
      double* dst = gx.data() + ic * h * w;
      const double* g = nd.grad.data() + ic * 4 * h * w;
      for (int64_t y = 0; y < h; ++y)
        for (int64_t x2 = 0; x2 < w; ++x2) {
          const double* s = g + (2 * y) * (2 * w) + 2 * x2;
          dst[y * w + x2] += s[0] + s[1] + s[2 * w] + s[2 * w + 1];
        }
    }
  });
}

Var resample_down(const Var& x) {
  require(x->value.rank() == 4, "resample_down: [N,C,H,W] required");
  const int64_t n = x->value.dim(0), c = x->value.dim(1), h = x->value.dim(2),
                w = x->value.dim(3);
  require(h % 2 == 0 && w % 2 == 0, "resample_down: odd spatial dimensions");
  const int64_t oh = h / 2, ow = w / 2;
  Tensor out({n, c, oh, ow});
  for (int64_t ic = 0; ic < n * c; ++ic) {
    const double* src = x->value.data() + ic * h * w;
    double* dst = out.data() + ic * oh * ow;
    for (int64_t y = 0; y < oh; ++y)
      for (int64_t x2 = 0; x2 < ow; ++x2) {
        const double* s = src + (2 * y) * w + 2 * x2;
        dst[y * ow + x2] = 0.25 * (s[0] + s[1] + s[w] + s[w + 1]);
      }
  }
  return make_op("resample_down", std::move(out), {x}, [n, c, h, w, oh, ow](Node& nd) {
    if (!nd.inputs[0]->requires_grad) return;
    Tensor& gx = nd.inputs[0]->ensure_grad();
    for (int64_t ic = 0; ic < n * c; ++ic) {
      double* dst = gx.data() + ic * h * w;
      const double* g = nd.grad.data() + ic * oh * ow;
      for (int64_t y = 0; y < oh; ++y)
        for (int64_t x2 = 0; x2 < ow; ++x2) {
          const double q = 0.25 * g[y * ow + x2];
          double* d = dst + (2 * y) * w + 2 * x2;
          d[0] += q;
          d[1] += q;
          d[w] += q;
          d[w + 1] += q;
        }
    }
  });
}

Var global_avg_pool(const Var& x) {
  require(x->value.rank() == 4, "global_avg_pool: [N,C,H,W] required");
  const int64_t n = x->value.dim(0), c = x->value.dim(1), hw = x->value.dim(2) * x->value.dim(3);
  Tensor out({n, c});
  const double inv = 1.0 / static_cast<double>(hw);
  for (int64_t i = 0; i < n * c; ++i)
    out[i] = k().sum(static_cast<int>(hw), x->value.data() + i * hw) * inv;
  return make_op("global_avg_pool", std::move(out), {x}, [hw, inv](Node& nd) {
    if (!nd.inputs[0]->requires_grad) return;
    Tensor& gx = nd.inputs[0]->ensure_grad();
    for (int64_t i = 0; i < nd.grad.numel(); ++i) {
      const double g = nd.grad[i] * inv;
      double* p = gx.data() + i * hw;
      for (int64_t t = 0; t < hw; ++t) p[t] += g;
    }
  });
}

Var adain(const Var& x, const Var& style_mean, const Var& style_std, double eps) {
  require(x->value.rank() == 3, "adain: single image [C,H,W] required");
  const int64_t c = x->value.dim(0), hw = x->value.dim(1) * x->value.dim(2);
  require(style_mean->value.numel() == c && style_std->value.numel() == c,
          "adain: style must be per-channel");
  Tensor out(x->value.shape());
  auto mu = std::make_shared<std::vector<double>>(static_cast<size_t>(c));
  auto sig = std::make_shared<std::vector<double>>(static_cast<size_t>(c));
  const double inv = 1.0 / static_cast<double>(hw);
  for (int64_t j = 0; j < c; ++j) {
    const double* xc = x->value.data() + j * hw;
    const double m = k().sum(static_cast<int>(hw), xc) * inv;
    double var = 0.0;
    for (int64_t t = 0; t < hw; ++t) var += (xc[t] - m) * (xc[t] - m);
    const double sg = std::sqrt(var * inv);
    (*mu)[static_cast<size_t>(j)] = m;
    (*sig)[static_cast<size_t>(j)] = sg;
    const double a = style_std->value[j] / (sg + eps);
    const double b = style_mean->value[j];
    double* oc = out.data() + j * hw;
    for (int64_t t = 0; t < hw; ++t) oc[t] = a * (xc[t] - m) + b;
  }
  return make_op("adain", std::move(out), {x, style_mean, style_std},
                 [c, hw, eps, mu, sig, inv](Node& n) {
                   const Tensor& xv = n.inputs[0]->value;
                   const Tensor& tstd = n.inputs[2]->value;
                   for (int64_t j = 0; j < c; ++j) {
                     const double m = (*mu)[static_cast<size_t>(j)];
                     const double sg = (*sig)[static_cast<size_t>(j)];
                     const double s = sg + eps;
                     const double* xc = xv.data() + j * hw;
                     const double* g = n.grad.data() + j * hw;
                     double gu_dot = 0.0, g_sum = 0.0;
                     for (int64_t t = 0; t < hw; ++t) {
                       gu_dot += g[t] * (xc[t] - m);
                       g_sum += g[t];
                     }
                     if (n.inputs[1]->requires_grad) n.inputs[1]->ensure_grad()[j] += g_sum;
                     if (n.inputs[2]->requires_grad)
                       n.inputs[2]->ensure_grad()[j] += gu_dot / s;
                     if (n.inputs[0]->requires_grad) {
                       Tensor& gx = n.inputs[0]->ensure_grad();
                       double* gxc = gx.data() + j * hw;
                       const double t = tstd[j];
                       const double sig_term = sg > 0.0 ? gu_dot * inv / (s * s * sg) : 0.0;
                       const double g_mean = g_sum * inv / s;
                       for (int64_t p = 0; p < hw; ++p)
                         gxc[p] += t * (g[p] / s - g_mean - sig_term * (xc[p] - m));
                     }
                   }
                 });
}

// ---------------- batch plumbing ----------------

Var slice_image(const Var& x, int64_t b) {
  require(x->value.rank() == 4, "slice_image: [N,C,H,W] required");
  require(b >= 0 && b < x->value.dim(0), "slice_image: index out of range");
  const int64_t c = x->value.dim(1), h = x->value.dim(2), w = x->value.dim(3);
  const int64_t stride = c * h * w;
  Tensor out({c, h, w});
  std::memcpy(out.data(), x->value.data() + b * stride,
              sizeof(double) * static_cast<size_t>(stride));
  return make_op("slice_image", std::move(out), {x}, [b, stride](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    k().axpy(static_cast<int>(stride), 1.0, n.grad.data(),
             n.inputs[0]->ensure_grad().data() + b * stride);
  });
}

Var stack_images(const std::vector<Var>& images) {
  require(!images.empty(), "stack_images: empty input list");
  const Tensor& first = images[0]->value;
  require(first.rank() == 3, "stack_images: [C,H,W] inputs required");
  const int64_t stride = first.numel();
  Tensor out({static_cast<int64_t>(images.size()), first.dim(0), first.dim(1), first.dim(2)});
  for (size_t i = 0; i < images.size(); ++i) {
    require(images[i]->value.same_shape(first), "stack_images: shape mismatch");
    std::memcpy(out.data() + static_cast<int64_t>(i) * stride, images[i]->value.data(),
                sizeof(double) * static_cast<size_t>(stride));
  }
  return make_op("stack_images", std::move(out), std::vector<Var>(images), [stride](Node& n) {
    for (size_t i = 0; i < n.inputs.size(); ++i)
      if (n.inputs[i]->requires_grad)
        k().axpy(static_cast<int>(stride), 1.0,
                 n.grad.data() + static_cast<int64_t>(i) * stride,
                 n.inputs[i]->ensure_grad().data());
  });
}

Var chw_to_rows(const Var& x) {
  require(x->value.rank() == 3, "chw_to_rows: [C,H,W] required");
  const int64_t c = x->value.dim(0), hw = x->value.dim(1) * x->value.dim(2);
  Tensor out({hw, c});
  for (int64_t j = 0; j < c; ++j)
    for (int64_t p = 0; p < hw; ++p) out[p * c + j] = x->value[j * hw + p];
  return make_op("chw_to_rows", std::move(out), {x}, [c, hw](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    Tensor& gx = n.inputs[0]->ensure_grad();
    for (int64_t j = 0; j < c; ++j)
      for (int64_t p = 0; p < hw; ++p) gx[j * hw + p] += n.grad[p * c + j];
  });
}

Var rows_to_chw(const Var& x, int64_t h, int64_t w) {
  require(x->value.rank() == 2, "rows_to_chw: rank-2 input required");
  require(x->value.dim(0) == h * w, "rows_to_chw: row count must equal H*W");
  const int64_t c = x->value.dim(1), hw = h * w;
  Tensor out({c, h, w});
  for (int64_t j = 0; j < c; ++j)
    for (int64_t p = 0; p < hw; ++p) out[j * hw + p] = x->value[p * c + j];
  return make_op("rows_to_chw", std::move(out), {x}, [c, hw](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    Tensor& gx = n.inputs[0]->ensure_grad();
    for (int64_t j = 0; j < c; ++j)
      for (int64_t p = 0; p < hw; ++p) gx[p * c + j] += n.grad[j * hw + p];
  });
}

}  // namespace gfl
