#include "gfl/networks.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gfl/checkpoint.hpp"
#include "op_detail.hpp"

namespace gfl {

using detail::fail;
using detail::require;

int64_t ModelConfig::channels_at(int64_t res) const {
  for (const auto& [r, c] : channels)
    if (r == res) return c;
  fail("ModelConfig: no channel entry for resolution " + std::to_string(res));
}

std::vector<int64_t> ModelConfig::block_resolutions() const {
  std::vector<int64_t> out;
  for (int64_t r = 4; r <= resolution; r *= 2) out.push_back(r);
  return out;
}

namespace {

const char* kind_name(AttentionKind k) {
  switch (k) {
    case AttentionKind::none:
      return "none";
    case AttentionKind::simplex:
      return "simplex";
    case AttentionKind::duplex:
      return "duplex";
  }
  return "none";
}

AttentionKind kind_from(const std::string& s) {
  if (s == "none") return AttentionKind::none;
  if (s == "simplex") return AttentionKind::simplex;
  if (s == "duplex") return AttentionKind::duplex;
  fail("unknown attention kind: " + s);
}

bool power_of_two(int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

std::string ModelConfig::to_text() const {
  std::ostringstream os;
  os << "variant=" << variant << '\n';
  os << "gen_attention=" << kind_name(gen_attention) << '\n';
  os << "disc_attention=" << (disc_attention ? 1 : 0) << '\n';
  os << "resolution=" << resolution << '\n';
  os << "components=" << components << '\n';
  os << "latent_size=" << latent_size << '\n';
  os << "dlatent_size=" << dlatent_size << '\n';
  os << "mapping_depth=" << mapping_depth << '\n';
  os << "heads=" << heads << '\n';
  os << "preset=" << preset << '\n';
  os << "min_attention_res=" << min_attention_res << '\n';
  os << "style_mixing_prob=" << style_mixing_prob << '\n';
  os << "model_seed=" << model_seed << '\n';
  os << "channels=";
  for (size_t i = 0; i < channels.size(); ++i) {
    if (i) os << ',';
    os << channels[i].first << ':' << channels[i].second;
  }
  os << '\n';
  return os.str();
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  ModelConfig cfg;
  cfg.channels.clear();
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const size_t eq = line.find('=');
    if (eq == std::string::npos || line.empty()) continue;
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "variant") cfg.variant = val;
    else if (key == "gen_attention") cfg.gen_attention = kind_from(val);
    else if (key == "disc_attention") cfg.disc_attention = val == "1";
    else if (key == "resolution") cfg.resolution = std::stoll(val);
    else if (key == "components") cfg.components = std::stoll(val);
    else if (key == "latent_size") cfg.latent_size = std::stoll(val);
    else if (key == "dlatent_size") cfg.dlatent_size = std::stoll(val);
    else if (key == "mapping_depth") cfg.mapping_depth = std::stoi(val);
    else if (key == "heads") cfg.heads = std::stoi(val);
    else if (key == "preset") cfg.preset = val;
    else if (key == "min_attention_res") cfg.min_attention_res = std::stoll(val);
    else if (key == "style_mixing_prob") cfg.style_mixing_prob = std::stod(val);
    else if (key == "model_seed") cfg.model_seed = std::stoull(val);
    else if (key == "channels") {
      std::istringstream cs(val);
      std::string item;
      while (std::getline(cs, item, ',')) {
        const size_t colon = item.find(':');
        require(colon != std::string::npos, "config: bad channels entry");
        cfg.channels.emplace_back(std::stoll(item.substr(0, colon)),
                                  std::stoll(item.substr(colon + 1)));
      }
    } else {
      fail("config: unknown key " + key);
    }
  }
  return cfg;
}

ModelConfig config_for_variant(const std::string& variant, int64_t resolution, int64_t k,
                               const std::string& preset, uint64_t model_seed) {
  require(power_of_two(resolution) && resolution >= 8 && resolution <= 64,
          "config: resolution must be a power of two in [8, 64]");
  ModelConfig cfg;
  cfg.variant = variant;
  cfg.resolution = resolution;
  cfg.preset = preset;
  cfg.model_seed = model_seed;
  if (variant == "stylegan2") {
    cfg.gen_attention = AttentionKind::none;
    cfg.disc_attention = false;
    cfg.components = 1;
  } else if (variant == "simplex" || variant == "simplex-vanillaD") {
    cfg.gen_attention = AttentionKind::simplex;
    cfg.disc_attention = variant == "simplex";
    cfg.components = k;
  } else if (variant == "duplex" || variant == "duplex-vanillaD") {
    cfg.gen_attention = AttentionKind::duplex;
    cfg.disc_attention = variant == "duplex";
    cfg.components = k;
  } else {
    fail("unknown variant: " + variant +
         " (expected stylegan2|simplex|duplex|simplex-vanillaD|duplex-vanillaD)");
  }
  return cfg;
}

namespace {

AffineMap add_affine(ParamSet& params, const RandomStream& init, const std::string& base,
                     int64_t in, int64_t out, double w_std, double b_init = 0.0) {
  AffineMap m;
  m.w = params.add(base + ".w", w_std == 0.0 ? init_const({in, out}, 0.0)
                                             : init_normal({in, out}, init, base + ".w", w_std));
  m.b = params.add(base + ".b", init_const({out}, b_init));
  return m;
}

AttentionMaps add_attention_maps(ParamSet& params, const RandomStream& init,
                                 const std::string& base, int64_t d, bool with_styles) {
  const double qkv_std = std::sqrt(1.0 / static_cast<double>(d));
  AttentionMaps maps;
  maps.q = add_affine(params, init, base + ".q", d, d, qkv_std);
  maps.k = add_affine(params, init, base + ".k", d, d, qkv_std);
  maps.v = add_affine(params, init, base + ".v", d, d, qkv_std);
  if (with_styles) {
    // Gain starts as the identity style and bias as zero so the block begins
    // as plain feature normalization; both weights move off zero immediately.
    maps.gamma = add_affine(params, init, base + ".gamma", d, d, 0.0, 1.0);
    maps.beta = add_affine(params, init, base + ".beta", d, d, 0.0, 0.0);
  }
  return maps;
}

double he_std(int64_t fan_in) { return std::sqrt(2.0 / static_cast<double>(fan_in)); }

}  // namespace

// ---------------- Generator ----------------

Generator::Generator(const ModelConfig& cfg) : cfg_(cfg) {
  const RandomStream init(splitmix64(cfg.model_seed ^ hash_str("generator")));
  require(cfg.latent_size >= 1 && cfg.dlatent_size >= 1 && cfg.components >= 1,
          "generator: bad latent configuration");
  mapping_ = build_mapping(params_, "g.map", init, cfg.latent_size, cfg.dlatent_size,
                           cfg.mapping_depth);
  const auto resolutions = cfg.block_resolutions();
  const int64_t c0 = cfg.channels_at(4);
  const_input_ = params_.add("g.const", init_normal({c0, 4, 4}, init, "g.const", 1.0));

  int64_t prev_ch = c0;
  for (int64_t res : resolutions) {
    Block blk;
    blk.res = res;
    blk.in_ch = prev_ch;
    blk.out_ch = cfg.channels_at(res);
    const std::string base = "g.b" + std::to_string(res);
    blk.attend = cfg.gen_attention != AttentionKind::none && res >= cfg.min_attention_res;
    if (blk.attend) {
      require(blk.in_ch % 4 == 0, "generator: attention width must divide by 4");
      blk.xy = add_attention_maps(params_, init, base + ".attn", blk.in_ch, true);
      blk.adapter = add_affine(params_, init, base + ".attn.adapter", cfg.dlatent_size,
                               blk.in_ch, std::sqrt(1.0 / static_cast<double>(cfg.dlatent_size)));
      blk.emb = params_.add(base + ".attn.emb",
                            init_normal({cfg.components, blk.in_ch}, init, base + ".attn.emb", 0.1));
      if (cfg.gen_attention == AttentionKind::duplex) {
        blk.yx = add_attention_maps(params_, init, base + ".attn.yx", blk.in_ch, false);
        blk.ln_gain = params_.add(base + ".attn.ln.gain", init_const({blk.in_ch}, 1.0));
        blk.ln_bias = params_.add(base + ".attn.ln.bias", init_const({blk.in_ch}, 0.0));
      }
      blk.grid = sinusoidal_grid_encoding(res, res, blk.in_ch);
    }
    blk.conv_w = params_.add(base + ".conv.w",
                             init_normal({blk.out_ch, blk.in_ch, 3, 3}, init, base + ".conv.w",
                                         he_std(blk.in_ch * 9)));
    blk.conv_b = params_.add(base + ".conv.b", init_const({blk.out_ch}, 0.0));
    blk.style = add_affine(params_, init, base + ".style", cfg.dlatent_size, blk.in_ch,
                           std::sqrt(1.0 / static_cast<double>(cfg.dlatent_size)), 1.0);
    blk.noise_strength = params_.add(base + ".noise", init_const({1}, 0.0));
    blocks_.push_back(std::move(blk));
    prev_ch = cfg.channels_at(res);
  }
  torgb_w_ = params_.add("g.torgb.w", init_normal({3, prev_ch, 1, 1}, init, "g.torgb.w",
                                                  0.5 * std::sqrt(1.0 / static_cast<double>(prev_ch))));
  torgb_b_ = params_.add("g.torgb.b", init_const({3}, 0.0));
}

std::vector<std::vector<Var>> Generator::prepare_latents(const Var& z, int64_t batch,
                                                         const Var* z2, double mix_prob,
                                                         const RandomStream& mix_stream) {
  const int64_t k = cfg_.components;
  require(z->value.rank() == 2 && z->value.dim(0) == batch * k &&
              z->value.dim(1) == cfg_.latent_size,
          "prepare_latents: z must be [batch*k x latent_size]");
  Var w1 = map_latents(z, mapping_);
  Var w2 = nullptr;
  if (z2) {
    require((*z2)->value.same_shape(z->value), "prepare_latents: z2 shape mismatch");
    w2 = map_latents(*z2, mapping_);
  }
  const int nblocks = cfg_.num_blocks();
  std::vector<std::vector<Var>> out(static_cast<size_t>(batch));
  for (int64_t b = 0; b < batch; ++b) {
    Var wb1 = slice_rows(w1, b * k, (b + 1) * k);
    if (!w2 || mix_prob <= 0.0 || nblocks < 2) {
      out[static_cast<size_t>(b)].assign(static_cast<size_t>(nblocks), wb1);
    } else {
      Var wb2 = slice_rows(w2, b * k, (b + 1) * k);
      const RandomStream img_stream = mix_stream.derive(static_cast<uint64_t>(b));
      const int crossover =
          1 + static_cast<int>(img_stream.below(1, static_cast<uint64_t>(nblocks - 1)));
      out[static_cast<size_t>(b)] = style_mixing(wb1, wb2, nblocks, crossover, mix_prob,
                                                 img_stream.derive("coin"));
    }
  }
  return out;
}

Var Generator::forward_mapped(const std::vector<std::vector<Var>>& w_rows,
                              const RandomStream& noise) {
  const int64_t batch = static_cast<int64_t>(w_rows.size());
  require(batch >= 1, "generator: empty batch");
  for (const auto& per_block : w_rows)
    require(static_cast<int>(per_block.size()) == cfg_.num_blocks(),
            "generator: latent assignment must cover every block");

  std::vector<Var> start(static_cast<size_t>(batch), const_input_);
  Var x = stack_images(start);
  for (size_t l = 0; l < blocks_.size(); ++l) {
    const Block& blk = blocks_[l];
    if (l > 0) x = resample_up(x);
    if (blk.attend) {
      Var grid = make_const(blk.grid);
      std::vector<Var> images;
      images.reserve(static_cast<size_t>(batch));
      for (int64_t b = 0; b < batch; ++b) {
        Var rows = chw_to_rows(slice_image(x, b));
        Var latents = apply_map(blk.adapter, w_rows[static_cast<size_t>(b)][l]);
        Var updated;
        if (cfg_.gen_attention == AttentionKind::simplex) {
          updated = simplex_update(rows, latents, blk.xy, grid, blk.emb, cfg_.heads);
        } else {
          updated = duplex_round(rows, latents, blk.xy, blk.yx, grid, blk.emb, blk.ln_gain,
                                 blk.ln_bias, cfg_.heads)
                        .x;
        }
        images.push_back(rows_to_chw(updated, blk.res, blk.res));
      }
      x = stack_images(images);
    }
    std::vector<Var> style_rows;
    style_rows.reserve(static_cast<size_t>(batch));
    for (int64_t b = 0; b < batch; ++b) {
      Var w_mean = reshape(mean_rows(w_rows[static_cast<size_t>(b)][l]), {1, cfg_.dlatent_size});
      style_rows.push_back(apply_map(blk.style, w_mean));
    }
    Var styles = batch == 1 ? style_rows[0] : concat_rows(style_rows);
    x = modulated_conv(x, blk.conv_w, styles, /*demodulate=*/true);
    x = add_channel_bias(x, blk.conv_b);
    x = leaky_relu(x, 0.2);
    x = noise_inject(x, blk.noise_strength, noise.derive(static_cast<uint64_t>(blk.res)));
  }
  x = conv2d(x, torgb_w_);
  x = add_channel_bias(x, torgb_b_);
  return clamp(x, -1.0, 1.0);
}

Var Generator::forward(const Var& z, int64_t batch, const RandomStream& noise) {
  return forward_mapped(prepare_latents(z, batch, nullptr, 0.0, RandomStream(0)), noise);
}

// ---------------- Discriminator ----------------

Discriminator::Discriminator(const ModelConfig& cfg) : cfg_(cfg) {
  const RandomStream init(splitmix64(cfg.model_seed ^ hash_str("discriminator")));
  auto resolutions = cfg.block_resolutions();
  std::reverse(resolutions.begin(), resolutions.end());  // R ... 4

  const int64_t c_top = cfg.channels_at(cfg.resolution);
  fromrgb_w_ = params_.add("d.fromrgb.w",
                           init_normal({c_top, 3, 1, 1}, init, "d.fromrgb.w", he_std(3)));
  fromrgb_b_ = params_.add("d.fromrgb.b", init_const({c_top}, 0.0));

  int64_t agg_width = 0;
  for (int64_t res : resolutions) {
    if (res == 4) break;  // the 4x4 stage is the classifier head
    Block blk;
    blk.res = res;
    blk.in_ch = cfg.channels_at(res);
    blk.out_ch = cfg.channels_at(res / 2);
    const std::string base = "d.b" + std::to_string(res);
    blk.conv_w = params_.add(base + ".conv.w",
                             init_normal({blk.out_ch, blk.in_ch, 3, 3}, init, base + ".conv.w",
                                         he_std(blk.in_ch * 9)));
    blk.conv_b = params_.add(base + ".conv.b", init_const({blk.out_ch}, 0.0));
    blk.attend = cfg.disc_attention && res >= cfg.min_attention_res;
    if (blk.attend) {
      require(blk.out_ch % 4 == 0, "discriminator: attention width must divide by 4");
      blk.xy = add_attention_maps(params_, init, base + ".attn", blk.out_ch, true);
      blk.yx = add_attention_maps(params_, init, base + ".attn.yx", blk.out_ch, false);
      blk.ln_gain = params_.add(base + ".attn.ln.gain", init_const({blk.out_ch}, 1.0));
      blk.ln_bias = params_.add(base + ".attn.ln.bias", init_const({blk.out_ch}, 0.0));
      blk.emb = params_.add(base + ".attn.emb",
                            init_normal({cfg.components, blk.out_ch}, init, base + ".attn.emb", 0.1));
      blk.grid = sinusoidal_grid_encoding(res, res, blk.out_ch);
      if (agg_width == 0) {
        agg_init_ = params_.add("d.agg.init", init_normal({cfg.components, blk.out_ch}, init,
                                                          "d.agg.init", 1.0));
      } else if (agg_width != blk.out_ch) {
        blk.has_transition = true;
        blk.transition =
            add_affine(params_, init, base + ".attn.adapter", agg_width, blk.out_ch,
                       std::sqrt(1.0 / static_cast<double>(agg_width)));
      }
      agg_width = blk.out_ch;
    }
    blocks_.push_back(std::move(blk));
  }

  const int64_t c4 = cfg.channels_at(4);
  final_conv_w_ = params_.add("d.final.conv.w",
                              init_normal({c4, c4, 3, 3}, init, "d.final.conv.w", he_std(c4 * 9)));
  final_conv_b_ = params_.add("d.final.conv.b", init_const({c4}, 0.0));
  const int64_t fc_in = c4 * 16 + (cfg.disc_attention ? cfg.components * agg_width : 0);
  final_fc_ = add_affine(params_, init, "d.final.fc", fc_in, 1,
                         std::sqrt(1.0 / static_cast<double>(fc_in)));
}

Var Discriminator::forward(const Var& images) {
  require(images->value.rank() == 4 && images->value.dim(1) == 3 &&
              images->value.dim(2) == cfg_.resolution &&
              images->value.dim(3) == cfg_.resolution,
          "discriminator: image shape mismatch with spec resolution " +
              std::to_string(cfg_.resolution));
  const int64_t batch = images->value.dim(0);
  Var x = leaky_relu(add_channel_bias(conv2d(images, fromrgb_w_), fromrgb_b_), 0.2);
  std::vector<Var> agg(static_cast<size_t>(batch), agg_init_);
  for (const Block& blk : blocks_) {
    x = leaky_relu(add_channel_bias(conv2d(x, blk.conv_w), blk.conv_b), 0.2);
    if (blk.attend) {
      Var grid = make_const(blk.grid);
      std::vector<Var> images_out;
      images_out.reserve(static_cast<size_t>(batch));
      for (int64_t b = 0; b < batch; ++b) {
        Var rows = chw_to_rows(slice_image(x, b));
        Var y = agg[static_cast<size_t>(b)];
        if (blk.has_transition) y = apply_map(blk.transition, y);
        Var y_new = additive_update(y, rows, blk.yx, blk.emb, grid, blk.ln_gain, blk.ln_bias,
                                    cfg_.heads);
        Var updated = simplex_update(rows, y_new, blk.xy, grid, nullptr, cfg_.heads);
        agg[static_cast<size_t>(b)] = y_new;
        images_out.push_back(rows_to_chw(updated, blk.res, blk.res));
      }
      x = stack_images(images_out);
    }
    x = resample_down(x);
  }
  x = leaky_relu(add_channel_bias(conv2d(x, final_conv_w_), final_conv_b_), 0.2);
  const int64_t c4 = cfg_.channels_at(4);
  Var flat = reshape(x, {batch, c4 * 16});
  if (cfg_.disc_attention) {
    std::vector<Var> rows;
    rows.reserve(static_cast<size_t>(batch));
    for (int64_t b = 0; b < batch; ++b) {
      Var y = agg[static_cast<size_t>(b)];
      rows.push_back(concat_cols(
          {slice_rows(flat, b, b + 1), reshape(y, {1, y->value.numel()})}));
    }
    flat = batch == 1 ? rows[0] : concat_rows(rows);
  }
  return reshape(apply_map(final_fc_, flat), {batch});
}

// ---------------- model plumbing ----------------

Model build_model(const ModelConfig& cfg) {
  Model m;
  m.cfg = cfg;
  m.g = std::make_unique<Generator>(cfg);
  m.d = std::make_unique<Discriminator>(cfg);
  m.ema.reserve(m.g->params().items().size());
  for (const auto& it : m.g->params().items()) m.ema.push_back(it.var->value);
  return m;
}

EmaScope::EmaScope(Model& m, bool use_ema) : model_(m), swapped_(use_ema) {
  if (!swapped_) return;
  auto& items = model_.g->params().items();
  for (size_t i = 0; i < items.size(); ++i)
    std::swap(items[i].var->value, model_.ema[i]);
}

EmaScope::~EmaScope() {
  if (!swapped_) return;
  auto& items = model_.g->params().items();
  for (size_t i = 0; i < items.size(); ++i)
    std::swap(items[i].var->value, model_.ema[i]);
}

Tensor generate_image(Model& m, const Tensor& z, uint64_t noise_seed, bool use_ema) {
  require(z.rank() == 2 && z.dim(0) == m.cfg.components && z.dim(1) == m.cfg.latent_size,
          "generate_image: z must be [k x latent_size]");
  NoGrad ng;
  EmaScope scope(m, use_ema);
  Var img = m.g->forward(make_const(z), 1,
                         RandomStream(noise_seed).derive("synthesis-noise"));
  Tensor out({3, m.cfg.resolution, m.cfg.resolution});
  std::copy(img->value.data(), img->value.data() + out.numel(), out.data());
  return out;
}

std::vector<Tensor> interpolate_images(Model& m, const Tensor& z0, const Tensor& z1,
                                       int steps, uint64_t noise_seed, bool use_ema) {
  require(steps >= 2, "interpolate: steps must be at least 2");
  require(z0.same_shape(z1), "interpolate: endpoint shape mismatch");
  std::vector<Tensor> out;
  out.reserve(static_cast<size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
    Tensor z(z0.shape());
    for (int64_t j = 0; j < z.numel(); ++j) z[j] = (1.0 - t) * z0[j] + t * z1[j];
    out.push_back(generate_image(m, z, noise_seed, use_ema));
  }
  return out;
}

Checkpoint model_to_checkpoint(const Model& m) {
  Checkpoint ck;
  ck.config_text = m.cfg.to_text();
  for (const auto& it : m.g->params().items()) ck.arrays.push_back({it.name, it.var->value});
  for (const auto& it : m.d->params().items()) ck.arrays.push_back({it.name, it.var->value});
  const auto& g_items = m.g->params().items();
  for (size_t i = 0; i < g_items.size(); ++i)
    ck.arrays.push_back({"ema." + g_items[i].name, m.ema[i]});
  return ck;
}

void load_model_arrays(Model& m, const Checkpoint& ck) {
  auto restore = [&ck](ParamSet& params) {
    for (const auto& it : params.items()) {
      const Tensor* t = ck.find(it.name);
      require(t != nullptr, "checkpoint: missing array " + it.name);
      require(t->same_shape(it.var->value), "checkpoint: shape mismatch for " + it.name);
      it.var->value = *t;
    }
  };
  restore(m.g->params());
  restore(m.d->params());
  const auto& g_items = m.g->params().items();
  for (size_t i = 0; i < g_items.size(); ++i) {
    const Tensor* t = ck.find("ema." + g_items[i].name);
    require(t != nullptr, "checkpoint: missing EMA array for " + g_items[i].name);
    m.ema[i] = *t;
  }
}

Model model_from_checkpoint(const Checkpoint& ck) {
  Model m = build_model(ModelConfig::from_text(ck.config_text));
  load_model_arrays(m, ck);
  return m;
}

std::vector<CensusRow> parameter_census(const ParamSet& params) {
  std::vector<CensusRow> rows;
  rows.reserve(params.items().size());
  for (const auto& it : params.items())
    rows.push_back({it.name, it.var->value.shape_str(), it.var->value.numel()});
  return rows;
}

bool names_contained(const ParamSet& base, const ParamSet& super) {
  for (const auto& it : base.items())
    if (super.find(it.name) == nullptr) return false;
  return true;
}

}  // namespace gfl
