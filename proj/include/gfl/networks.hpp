#pragma once
// Model assembly: the style-based generator and convolutional discriminator
// in four flavors — plain StyleGAN2-style baseline, simplex or duplex
// attention in the generator, and optional aggregator attention in the
// discriminator.

#include <memory>
#include <string>
#include <vector>

#include "gfl/stylegan.hpp"

namespace gfl {

enum class AttentionKind { none, simplex, duplex };

struct ModelConfig {
  std::string variant = "stylegan2";
  AttentionKind gen_attention = AttentionKind::none;
  bool disc_attention = false;
  int64_t resolution = 32;  // power of two, 16..64 supported (4 for toy tests)
  int64_t components = 1;   // k latent rows
  int64_t latent_size = 32;
  int64_t dlatent_size = 32;
  int mapping_depth = 4;
  int heads = 1;
  std::string preset = "code";  // optimizer preset name
  int64_t min_attention_res = 8;
  double style_mixing_prob = 0.9;
  uint64_t model_seed = 0;
  std::vector<std::pair<int64_t, int64_t>> channels = {
      {4, 64}, {8, 64}, {16, 32}, {32, 32}, {64, 16}};

  int64_t channels_at(int64_t res) const;
  std::vector<int64_t> block_resolutions() const;  // 4, 8, ..., resolution
  int num_blocks() const { return static_cast<int>(block_resolutions().size()); }

  std::string to_text() const;
  static ModelConfig from_text(const std::string& text);
};

// variant is one of stylegan2 | simplex | duplex | simplex-vanillaD |
// duplex-vanillaD; the -vanillaD suffix switches discriminator attention off.
ModelConfig config_for_variant(const std::string& variant, int64_t resolution = 32,
                               int64_t k = 16, const std::string& preset = "code",
                               uint64_t model_seed = 0);

class Generator {
 public:
  explicit Generator(const ModelConfig& cfg);

  // Per-image, per-block mapped latents (each [k x dlatent]); applies the
  // mapping network and optional style mixing.
  std::vector<std::vector<Var>> prepare_latents(const Var& z, int64_t batch,
                                                const Var* z2, double mix_prob,
                                                const RandomStream& mix_stream);

  // w_rows[b][l] is the latent matrix image b uses at block l.
  Var forward_mapped(const std::vector<std::vector<Var>>& w_rows,
                     const RandomStream& noise);

  // Mapping + synthesis without mixing. z is [batch*k x latent_size].
  Var forward(const Var& z, int64_t batch, const RandomStream& noise);

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  const ModelConfig& config() const { return cfg_; }
  const MappingNetwork& mapping() const { return mapping_; }

 private:
  struct Block {
    int64_t res = 0, in_ch = 0, out_ch = 0;
    bool attend = false;
    AttentionMaps xy, yx;  // yx present for duplex only
    AffineMap adapter;     // dlatent -> in_ch
    Var emb;               // [k x in_ch] trained positional embeddings
    Var ln_gain, ln_bias;  // duplex latent-update norm
    Tensor grid;           // [res^2 x in_ch]
    Var conv_w, conv_b;
    AffineMap style;  // dlatent -> in_ch, bias starts at 1
    Var noise_strength;
  };

  ModelConfig cfg_;
  ParamSet params_;
  MappingNetwork mapping_;
  Var const_input_;
  std::vector<Block> blocks_;
  Var torgb_w_, torgb_b_;
};

class Discriminator {
 public:
  explicit Discriminator(const ModelConfig& cfg);

  Var forward(const Var& images);  // [N,3,R,R] -> logits [N]

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  const ModelConfig& config() const { return cfg_; }

 private:
  struct Block {
    int64_t res = 0, in_ch = 0, out_ch = 0;
    Var conv_w, conv_b;
    bool attend = false;
    AttentionMaps xy, yx;
    Var emb;
    Var ln_gain, ln_bias;
    AffineMap transition;  // previous aggregator width -> out_ch
    bool has_transition = false;
    Tensor grid;
  };

  ModelConfig cfg_;
  ParamSet params_;
  Var fromrgb_w_, fromrgb_b_;
  std::vector<Block> blocks_;  // resolution descending, last block is 8x8
  Var agg_init_;               // [k x first attended width]
  Var final_conv_w_, final_conv_b_;
  AffineMap final_fc_;
};

struct Model {
  ModelConfig cfg;
  std::unique_ptr<Generator> g;
  std::unique_ptr<Discriminator> d;
  std::vector<Tensor> ema;  // aligned with g->params().items()
};

Model build_model(const ModelConfig& cfg);

// Temporarily swaps the generator's parameter values with the EMA snapshot.
class EmaScope {
 public:
  EmaScope(Model& m, bool use_ema);
  ~EmaScope();
  EmaScope(const EmaScope&) = delete;
  EmaScope& operator=(const EmaScope&) = delete;

 private:
  Model& model_;
  bool swapped_;
};

// Deterministic inference image for (z, noise seed); z is [k x latent_size].
Tensor generate_image(Model& m, const Tensor& z, uint64_t noise_seed, bool use_ema = true);

// Images along the straight line between z0 and z1 (inclusive endpoints).
std::vector<Tensor> interpolate_images(Model& m, const Tensor& z0, const Tensor& z1,
                                       int steps, uint64_t noise_seed, bool use_ema = true);

struct Checkpoint;

// Config, parameters and EMA snapshot (optimizer state is the trainer's to
// append). Loading ignores array names it does not own.
Checkpoint model_to_checkpoint(const Model& m);
void load_model_arrays(Model& m, const Checkpoint& ck);
Model model_from_checkpoint(const Checkpoint& ck);

struct CensusRow {
  std::string name;
  std::string shape;
  int64_t count = 0;
};

std::vector<CensusRow> parameter_census(const ParamSet& params);
// Every parameter name of base exists in super.
bool names_contained(const ParamSet& base, const ParamSet& super);

}  // namespace gfl
