#pragma once
// Style-based building blocks: the shared mapping network, AdaIN-style
// statistics alignment (see ops.hpp), modulated convolution plumbing, noise
// injection, weight averaging and style mixing.

#include <vector>

#include "gfl/attention.hpp"
#include "gfl/params.hpp"

namespace gfl {

struct MappingNetwork {
  std::vector<AffineMap> layers;
  double slope = 0.2;
};

// Fully connected stack with Leaky ReLU after every layer, shared across all
// latent components (rows of z).
MappingNetwork build_mapping(ParamSet& params, const std::string& prefix,
                             const RandomStream& init, int64_t latent_size,
                             int64_t dlatent_size, int depth);

// Rows of z map independently through the shared network.
Var map_latents(const Var& z, const MappingNetwork& net);

// y = x + strength * N(0,1); the noise field is a pure function of the stream.
Var noise_inject(const Var& x, const Var& strength, const RandomStream& noise);

// avg' = decay * avg + (1 - decay) * cur
void ema_update(Tensor& avg, const Tensor& cur, double decay);

// With probability prob the layers from crossover_layer on use w_b, otherwise
// every layer uses w_a. One uniform draw, seed-deterministic.
std::vector<Var> style_mixing(const Var& w_a, const Var& w_b, int num_layers,
                              int crossover_layer, double prob, const RandomStream& rs);

}  // namespace gfl
