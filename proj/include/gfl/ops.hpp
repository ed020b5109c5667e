#pragma once
// Differentiable tensor operations. Forward math runs through the kernel
// dispatch table; each op records its backward on the tape via make_op.
//
// Shape conventions:
//   matrices        [n x d], row-major
//   feature maps    [N x C x H x W] (a rank-3 [C x H x W] input is treated
//                   as a single image where noted)

#include <vector>

#include "gfl/autodiff.hpp"

namespace gfl {

// ---- elementwise ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var leaky_relu(const Var& x, double slope = 0.2);
Var softplus(const Var& x);
Var clamp(const Var& x, double lo, double hi);
// y = x + strength * noise, strength a scalar variable, noise a constant.
Var add_scaled_const(const Var& x, Tensor noise, const Var& strength);

// ---- reductions ----
Var sum(const Var& x);
Var mean(const Var& x);
Var mean_rows(const Var& x);  // [k x d] -> [d]

// ---- linear algebra ----
Var matmul(const Var& a, const Var& b);              // [p x q]·[q x r]
Var matmul_nt(const Var& a, const Var& b);           // [p x q]·[r x q]^T -> [p x r]
Var add_row_bias(const Var& x, const Var& b);        // [n x d] + [d]
Var linear(const Var& x, const Var& w, const Var& b);  // x·w + b

// ---- rows/columns/shape ----
Var reshape(const Var& x, std::vector<int64_t> shape);
Var concat_cols(const std::vector<Var>& xs);
Var slice_cols(const Var& x, int64_t j0, int64_t j1);
Var concat_rows(const std::vector<Var>& xs);
Var slice_rows(const Var& x, int64_t i0, int64_t i1);

// ---- fused batch forms ----
// Block-diagonal scaled-dot attention: row-groups attend only within their
// group. Q is [G*p x d], K/V are [G*q x d]; optional column-split heads.
// weights_out receives the softmax matrices [G*p x q] as a constant.
Var block_attention(const Var& q, const Var& k, const Var& v, int64_t groups,
                    int heads = 1, Var* weights_out = nullptr);
// Column standardization per row-group (the grouped form of instance_norm).
Var instance_norm_cols_grouped(const Var& x, int64_t groups, double eps = 1e-8);
Var nchw_to_rows(const Var& x);  // [N,C,H,W] -> [N*H*W x C]
Var rows_to_nchw(const Var& x, int64_t n, int64_t h, int64_t w);
Var tile_rows(const Var& x, int64_t times);         // [m x d] -> [times*m x d]
Var group_mean_rows(const Var& x, int64_t groups);  // [G*k x d] -> [G x d]

// ---- normalization ----
// Column-wise (x - mean) / (std + eps), population std over the rows.
Var instance_norm_cols(const Var& x, double eps = 1e-8);
// Row-wise standardization with learned per-feature gain and bias.
Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias, double eps = 1e-8);
Var softmax_rows(const Var& x);

// ---- images ----
// Cross-correlation, stride 1, zero same-padding; kernel must be 1x1 or 3x3.
Var conv2d(const Var& x, const Var& w);
Var add_channel_bias(const Var& x, const Var& b);  // [N,C,H,W] + [C]
// Style-modulated conv: weights scaled per input channel by style[n,c], then
// optionally rescaled so each output filter has unit L2 norm.
Var modulated_conv(const Var& x, const Var& w, const Var& style, bool demodulate,
                   double eps = 1e-8);
Var resample_up(const Var& x);    // 2x nearest neighbor
Var resample_down(const Var& x);  // 2x2 average pool, even dims required
Var global_avg_pool(const Var& x);  // [N,C,H,W] -> [N,C]
// Aligns channel statistics of a single image [C,H,W] to the given style.
Var adain(const Var& x, const Var& style_mean, const Var& style_std, double eps = 1e-8);

// ---- batch plumbing ----
Var slice_image(const Var& x, int64_t b);           // [N,C,H,W] -> [C,H,W]
Var stack_images(const std::vector<Var>& images);   // n x [C,H,W] -> [N,C,H,W]
Var chw_to_rows(const Var& x);                      // [C,H,W] -> [H*W x C]
Var rows_to_chw(const Var& x, int64_t h, int64_t w);  // [H*W x C] -> [C,H,W]

}  // namespace gfl
