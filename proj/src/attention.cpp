#include "gfl/attention.hpp"

#include <cmath>

#include "op_detail.hpp"

namespace gfl {

using detail::require;

Var apply_map(const AffineMap& m, const Var& x) { return add_row_bias(matmul(x, m.w), m.b); }

Var scaled_dot_attention(const Var& q, const Var& k, const Var& v, Var* weights_out) {
  require(q->value.rank() == 2 && k->value.rank() == 2 && v->value.rank() == 2,
          "scaled_dot_attention: rank-2 inputs required");
  require(q->value.dim(1) >= 1, "scaled_dot_attention: d_k must be positive");
  require(k->value.dim(1) == q->value.dim(1),
          "scaled_dot_attention: query/key width mismatch");
  require(k->value.dim(0) == v->value.dim(0),
          "scaled_dot_attention: key/value row count mismatch");
  return block_attention(q, k, v, 1, 1, weights_out);
}

Var multi_head_attention(const Var& q, const Var& k, const Var& v, const MultiHeadMaps& maps) {
  require(!maps.wq.empty() && maps.wq.size() == maps.wk.size() &&
              maps.wq.size() == maps.wv.size(),
          "multi_head_attention: per-head projection count mismatch");
  std::vector<Var> heads;
  heads.reserve(maps.wq.size());
  for (size_t i = 0; i < maps.wq.size(); ++i)
    heads.push_back(scaled_dot_attention(matmul(q, maps.wq[i]), matmul(k, maps.wk[i]),
                                         matmul(v, maps.wv[i])));
  return matmul(heads.size() == 1 ? heads[0] : concat_cols(heads), maps.wo);
}

namespace {

Var maybe_add(const Var& x, const Var& enc) {
  if (!enc) return x;
  return add(x, enc);
}

Var headwise_attention(const Var& q, const Var& k, const Var& v, int heads, Var* weights_out) {
  return block_attention(q, k, v, 1, heads, weights_out);
}

}  // namespace

Var bipartite_attention(const Var& a_set, const Var& b_set, const AttentionMaps& maps,
                        const Var& enc_a, const Var& enc_b, int heads, Var* weights_out) {
  require(a_set->value.rank() == 2 && b_set->value.rank() == 2,
          "bipartite_attention: rank-2 sets required");
  require(b_set->value.dim(0) >= 1, "bipartite_attention: attended set is empty");
  Var a_in = maybe_add(a_set, enc_a);
  Var b_in = maybe_add(b_set, enc_b);
  return headwise_attention(apply_map(maps.q, a_in), apply_map(maps.k, b_in),
                            apply_map(maps.v, b_in), heads, weights_out);
}

Var additive_update(const Var& a_set, const Var& b_set, const AttentionMaps& maps,
                    const Var& enc_a, const Var& enc_b, const Var& ln_gain,
                    const Var& ln_bias, int heads) {
  Var attended = bipartite_attention(a_set, b_set, maps, enc_a, enc_b, heads);
  return layer_norm_rows(add(a_set, attended), ln_gain, ln_bias);
}

namespace {

Var style_modulate(const Var& x, const Var& attended, const AttentionMaps& maps, double eps) {
  Var gain = apply_map(maps.gamma, attended);
  Var bias = apply_map(maps.beta, attended);
  return add(mul(gain, instance_norm_cols(x, eps)), bias);
}

}  // namespace

Var simplex_update(const Var& x, const Var& y, const AttentionMaps& maps, const Var& enc_x,
                   const Var& enc_y, int heads, double eps) {
  Var attended = bipartite_attention(x, y, maps, enc_x, enc_y, heads);
  return style_modulate(x, attended, maps, eps);
}

Var compute_centroids(const Var& y, const Var& x, const AttentionMaps& maps_yx,
                      const Var& enc_y, const Var& enc_x, int heads, Var* weights_out) {
  require(x->value.dim(0) >= 1, "compute_centroids: empty feature set");
  return bipartite_attention(y, x, maps_yx, enc_y, enc_x, heads, weights_out);
}

Var duplex_update_with(const Var& x, const Var& k_direct, const Var& v_direct,
                       const AttentionMaps& maps_xy, const Var& enc_x, int heads,
                       double eps) {
  Var q = apply_map(maps_xy.q, maybe_add(x, enc_x));
  Var attended = headwise_attention(q, k_direct, v_direct, heads, nullptr);
  return style_modulate(x, attended, maps_xy, eps);
}

Var duplex_update(const Var& x, const Var& y, const AttentionMaps& maps_xy,
                  const AttentionMaps& maps_yx, const Var& enc_x, const Var& enc_y,
                  int heads, double eps) {
  Var centroids = compute_centroids(y, x, maps_yx, enc_y, enc_x, heads);
  Var values = apply_map(maps_xy.v, maybe_add(y, enc_y));
  return duplex_update_with(x, centroids, values, maps_xy, enc_x, heads, eps);
}

DuplexRound duplex_round(const Var& x, const Var& y, const AttentionMaps& maps_xy,
                         const AttentionMaps& maps_yx, const Var& enc_x, const Var& enc_y,
                         const Var& ln_gain, const Var& ln_bias, int heads, double eps) {
  DuplexRound out;
  out.y = additive_update(y, x, maps_yx, enc_y, enc_x, ln_gain, ln_bias, heads);
  // The refreshed latents keep their positional identity, so no further
  // embedding is added on the second leg.
  out.x = duplex_update(x, out.y, maps_xy, maps_yx, enc_x, nullptr, heads, eps);
  return out;
}

Tensor sinusoidal_grid_encoding(int64_t h, int64_t w, int64_t d) {
  detail::require(d % 4 == 0, "sinusoidal_grid_encoding: d must be divisible by 4");
  const int64_t quarter = d / 4;
  Tensor enc({h * w, d});
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      double* row = enc.data() + (y * w + x) * d;
      for (int64_t j = 0; j < quarter; ++j) {
        const double freq =
            std::pow(10000.0, -static_cast<double>(4 * j) / static_cast<double>(d));
        row[j] = std::sin(static_cast<double>(y) * freq);
        row[quarter + j] = std::cos(static_cast<double>(y) * freq);
        row[2 * quarter + j] = std::sin(static_cast<double>(x) * freq);
        row[3 * quarter + j] = std::cos(static_cast<double>(x) * freq);
      }
    }
  return enc;
}

}  // namespace gfl
