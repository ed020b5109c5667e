#include "gfl/stylegan.hpp"

#include <cmath>

#include "gfl/kernels/kernels.hpp"
#include "op_detail.hpp"

namespace gfl {

MappingNetwork build_mapping(ParamSet& params, const std::string& prefix,
                             const RandomStream& init, int64_t latent_size,
                             int64_t dlatent_size, int depth) {
  detail::require(depth >= 1, "build_mapping: depth must be positive");
  MappingNetwork net;
  for (int i = 0; i < depth; ++i) {
    const int64_t in = i == 0 ? latent_size : dlatent_size;
    const std::string base = prefix + ".fc" + std::to_string(i);
    AffineMap fc;
    fc.w = params.add(base + ".w",
                      init_normal({in, dlatent_size}, init, base + ".w",
                                  std::sqrt(1.0 / static_cast<double>(in))));
    fc.b = params.add(base + ".b", init_const({dlatent_size}, 0.0));
    net.layers.push_back(fc);
  }
  return net;
}

Var map_latents(const Var& z, const MappingNetwork& net) {
  detail::require(z->value.rank() == 2, "map_latents: z must be [k x latent_size]");
  detail::require(z->value.dim(1) == net.layers.front().w->value.dim(0),
                  "map_latents: latent width mismatch");
  Var h = z;
  for (const AffineMap& fc : net.layers) h = leaky_relu(apply_map(fc, h), net.slope);
  return h;
}

Var noise_inject(const Var& x, const Var& strength, const RandomStream& noise) {
  Tensor field(x->value.shape());
  fill_normal(field, noise);
  return add_scaled_const(x, std::move(field), strength);
}

void ema_update(Tensor& avg, const Tensor& cur, double decay) {
  detail::require(avg.same_shape(cur), "ema_update: shape mismatch");
  const int n = static_cast<int>(avg.numel());
  kernels::active().scale(n, decay, avg.data(), avg.data());
  kernels::active().axpy(n, 1.0 - decay, cur.data(), avg.data());
}

std::vector<Var> style_mixing(const Var& w_a, const Var& w_b, int num_layers,
                              int crossover_layer, double prob, const RandomStream& rs) {
  detail::require(prob >= 0.0 && prob <= 1.0, "style_mixing: prob outside [0,1]");
  const bool mix = rs.uniform(0) < prob;
  std::vector<Var> assignment;
  assignment.reserve(static_cast<size_t>(num_layers));
  for (int l = 0; l < num_layers; ++l)
    assignment.push_back(mix && l >= crossover_layer ? w_b : w_a);
  return assignment;
}

}  // namespace gfl
