#pragma once
// Bipartite attention: scaled dot-product and multi-head primitives, plus the
// simplex and duplex update rules that let a small set of latents modulate a
// grid of image features (and vice versa).
//
// Ops that attend one set over another take role-ordered encodings: enc_a is
// added to the updated/query set, enc_b to the key/value set. Either may be
// null. The weights_out hooks expose the softmax matrices for tests.

#include "gfl/autodiff.hpp"
#include "gfl/ops.hpp"

namespace gfl {

struct AffineMap {
  Var w;  // [d_in x d_out]
  Var b;  // [d_out]
};

Var apply_map(const AffineMap& m, const Var& x);

// q/k/v plus the gain and bias style maps; all preserve dimensionality d.
struct AttentionMaps {
  AffineMap q, k, v, gamma, beta;
};

// softmax(Q K^T / sqrt(d_k)) V
Var scaled_dot_attention(const Var& q, const Var& k, const Var& v,
                         Var* weights_out = nullptr);

struct MultiHeadMaps {
  std::vector<Var> wq, wk, wv;  // per head, [d x d/h]
  Var wo;                       // [d x d]
};

Var multi_head_attention(const Var& q, const Var& k, const Var& v, const MultiHeadMaps& maps);

// a(A, B) = Attention(q(A + enc_a), k(B + enc_b), v(B + enc_b)).
// heads > 1 splits the mapped features into column groups with one softmax
// per group (d must divide evenly).
Var bipartite_attention(const Var& a_set, const Var& b_set, const AttentionMaps& maps,
                        const Var& enc_a, const Var& enc_b, int heads = 1,
                        Var* weights_out = nullptr);

// LayerNorm(A + a(A, B)) with learned per-feature gain/bias.
Var additive_update(const Var& a_set, const Var& b_set, const AttentionMaps& maps,
                    const Var& enc_a, const Var& enc_b, const Var& ln_gain,
                    const Var& ln_bias, int heads = 1);

// gamma(a(X,Y)) * omega(X) + beta(a(X,Y)); omega is column-standardization.
Var simplex_update(const Var& x, const Var& y, const AttentionMaps& maps, const Var& enc_x,
                   const Var& enc_y, int heads = 1, double eps = 1e-8);

// Centroids K = a(Y, X): attention-weighted averages of v(X + enc_x) rows.
Var compute_centroids(const Var& y, const Var& x, const AttentionMaps& maps_yx,
                      const Var& enc_y, const Var& enc_x, int heads = 1,
                      Var* weights_out = nullptr);

// Duplex rule with the key/value structure supplied directly.
Var duplex_update_with(const Var& x, const Var& k_direct, const Var& v_direct,
                       const AttentionMaps& maps_xy, const Var& enc_x, int heads = 1,
                       double eps = 1e-8);

// K = compute_centroids(Y, X), V = v(Y + enc_y), then the gain/bias rule.
Var duplex_update(const Var& x, const Var& y, const AttentionMaps& maps_xy,
                  const AttentionMaps& maps_yx, const Var& enc_x, const Var& enc_y,
                  int heads = 1, double eps = 1e-8);

struct DuplexRound {
  Var x;
  Var y;
};

// Alternates Y := additive_update(Y, X) then X := duplex_update(X, Y').
DuplexRound duplex_round(const Var& x, const Var& y, const AttentionMaps& maps_xy,
                         const AttentionMaps& maps_yx, const Var& enc_x, const Var& enc_y,
                         const Var& ln_gain, const Var& ln_bias, int heads = 1,
                         double eps = 1e-8);

// Deterministic sin/cos table over the (row, col) grid; d must divide by 4.
Tensor sinusoidal_grid_encoding(int64_t h, int64_t w, int64_t d);

}  // namespace gfl
