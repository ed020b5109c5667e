#include "gfl/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gfl/checkpoint.hpp"
#include "gfl/kernels/kernels.hpp"
#include "gfl/ops.hpp"
#include "op_detail.hpp"

namespace gfl {

using detail::require;

OptimizerPreset optimizer_preset(const std::string& name) {
  if (name == "code") return {"code", 0.0, 0.99, 1e-8};
  if (name == "article") return {"article", 0.9, 0.999, 1e-3};
  detail::fail("unknown optimizer preset: " + name + " (expected code|article)");
}

Adam::Adam(const ParamSet& params) {
  m_.reserve(params.items().size());
  v_.reserve(params.items().size());
  for (const auto& it : params.items()) {
    m_.emplace_back(it.var->value.shape());
    v_.emplace_back(it.var->value.shape());
  }
}

void adam_step(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, int64_t t,
               const OptimizerPreset& preset, double lr) {
  require(t >= 1, "adam_step: step index must be >= 1");
  const double b1 = preset.beta1, b2 = preset.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (int64_t i = 0; i < param.numel(); ++i) {
    const double g = grad[i];
    m[i] = b1 * m[i] + (1.0 - b1) * g;
    v[i] = b2 * v[i] + (1.0 - b2) * g * g;
    const double mhat = m[i] / corr1;
    const double vhat = v[i] / corr2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + preset.epsilon);
  }
}

void Adam::step(const ParamSet& params, const OptimizerPreset& preset, double lr) {
  ++t_;
  const auto& items = params.items();
  for (size_t i = 0; i < items.size(); ++i) {
    Node& node = *items[i].var;
    if (!node.has_grad()) node.ensure_grad();
    adam_step(node.value, node.grad, m_[i], v_[i], t_, preset, lr);
  }
}

double gan_value(const Tensor& d_real_logits, const Tensor& d_fake_logits) {
  auto mean_log = [](const Tensor& logits, bool complement) {
    double acc = 0.0;
    for (int64_t i = 0; i < logits.numel(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-logits[i]));
      acc += std::log(std::max(complement ? 1.0 - p : p, 1e-12));
    }
    return acc / static_cast<double>(logits.numel());
  };
  return mean_log(d_real_logits, false) + mean_log(d_fake_logits, true);
}

NonsatLosses nonsat_losses(const Var& d_real, const Var& d_fake) {
  NonsatLosses out;
  out.loss_g = mean(softplus(scale(d_fake, -1.0)));
  out.loss_d = add(mean(softplus(scale(d_real, -1.0))), mean(softplus(d_fake)));
  return out;
}

namespace {

// Temporarily treats a parameter set as constants so a backward pass can
// target the network input alone.
class FreezeParams {
 public:
  explicit FreezeParams(const ParamSet& params) {
    for (const auto& it : params.items()) {
      flags_.push_back(it.var->requires_grad);
      it.var->requires_grad = false;
    }
    items_ = &params.items();
  }
  ~FreezeParams() {
    for (size_t i = 0; i < items_->size(); ++i)
      (*items_)[i].var->requires_grad = flags_[i];
  }

 private:
  const std::vector<ParamSet::Item>* items_;
  std::vector<bool> flags_;
};

}  // namespace

R1Value r1_penalty(Discriminator& d, const Tensor& real_images, double gamma) {
  R1Value out;
  Tensor grads;
  {
    FreezeParams freeze(d.params());
    Var x = make_leaf(real_images, true);
    Var logits = d.forward(x);
    require(logits->value.all_finite(), "r1_penalty: non-finite discriminator output");
    backward(sum(logits));
    require(x->has_grad(), "r1_penalty: discriminator is constant in its input");
    grads = x->grad;
  }
  require(grads.all_finite(), "r1_penalty: non-finite input gradient");
  const int64_t batch = real_images.dim(0);
  const int64_t stride = real_images.numel() / batch;
  double norm_sum = 0.0;
  for (int64_t b = 0; b < batch; ++b)
    norm_sum += kernels::active().dot(static_cast<int>(stride), grads.data() + b * stride,
                                      grads.data() + b * stride);
  out.penalty = 0.5 * gamma * norm_sum / static_cast<double>(batch);
  out.input_grads = std::move(grads);
  return out;
}

double apply_r1(Discriminator& d, const Tensor& real_images, double gamma_eff,
                double fd_delta) {
  const R1Value value = r1_penalty(d, real_images, gamma_eff);
  const int64_t batch = real_images.dim(0);
  const int64_t stride = real_images.numel() / batch;

  // d(penalty)/d(theta) = (gamma_eff / B) * sum_b d/d(theta) [g_b . v_b] with
  // v_b = const copy of g_b; the directional derivative is evaluated by a
  // symmetric difference so only first-order machinery is needed.
  Tensor probes({2 * batch, real_images.dim(1), real_images.dim(2), real_images.dim(3)});
  std::vector<double> half_inv_eps(static_cast<size_t>(batch));
  for (int64_t b = 0; b < batch; ++b) {
    const double* v = value.input_grads.data() + b * stride;
    const double rms = std::sqrt(kernels::active().dot(static_cast<int>(stride), v, v) /
                                 static_cast<double>(stride));
    const double eps = fd_delta / (rms + 1e-12);
    half_inv_eps[static_cast<size_t>(b)] = 1.0 / (2.0 * eps);
    const double* x = real_images.data() + b * stride;
    double* plus = probes.data() + b * stride;
    double* minus = probes.data() + (batch + b) * stride;
    for (int64_t i = 0; i < stride; ++i) {
      plus[i] = x[i] + eps * v[i];
      minus[i] = x[i] - eps * v[i];
    }
  }
  Var logits = d.forward(make_const(std::move(probes)));
  Tensor weights({2 * batch});
  for (int64_t b = 0; b < batch; ++b) {
    const double c = gamma_eff / static_cast<double>(batch) * half_inv_eps[static_cast<size_t>(b)];
    weights[b] = c;
    weights[batch + b] = -c;
  }
  backward(sum(mul(logits, make_const(std::move(weights)))));
  return value.penalty;
}

std::string csv_header() {
  return "kimg,loss_g,loss_d,fid,is,precision,recall,imgs_per_sec";
}

namespace {

std::string cell(const std::optional<double>& v) {
  if (!v) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", *v);
  return buf;
}

}  // namespace

std::string csv_line(const LogRow& r) {
  char kimg[64];
  std::snprintf(kimg, sizeof(kimg), "%.6g", r.kimg);
  std::string line = kimg;
  for (const auto* v : {&r.loss_g, &r.loss_d, &r.fid, &r.is, &r.precision, &r.recall,
                        &r.imgs_per_sec})
    line += "," + cell(*v);
  return line;
}

namespace {

Tensor draw_latents(int64_t batch, int64_t k, int64_t latent, const RandomStream& rs) {
  Tensor z({batch * k, latent});
  fill_normal(z, rs);
  return z;
}

std::string format_kimg(double kimg) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", kimg);
  return buf;
}

}  // namespace

TrainResult train(Model& m, const Dataset& data, const TrainConfig& cfg,
                  const FeatureExtractor* fx) {
  require(data.size() >= 1, "train: dataset is empty");
  require(cfg.batch >= 1, "train: batch must be positive");
  require(cfg.lazy_interval >= 1, "train: lazy_interval must be positive");
  require(data.resolution() == m.cfg.resolution,
          "train: dataset resolution does not match the model");

  const OptimizerPreset preset = optimizer_preset(cfg.preset);
  Adam opt_g(m.g->params());
  Adam opt_d(m.d->params());
  const RandomStream run(splitmix64(cfg.seed ^ hash_str("train-run")));
  BatchIterator batches(data, run.derive("data").seed());

  namespace fs = std::filesystem;
  std::ofstream log_file;
  const bool writing = !cfg.out_dir.empty();
  if (writing) {
    fs::create_directories(cfg.out_dir);
    std::ofstream cfg_file(cfg.out_dir + "/config.txt");
    cfg_file << "variant=" << cfg.variant << "\nresolution=" << cfg.resolution
             << "\nk=" << cfg.k << "\npreset=" << cfg.preset << "\nkimg=" << cfg.total_kimg
             << "\nbatch=" << cfg.batch << "\nlazy_interval=" << cfg.lazy_interval
             << "\nr1_gamma=" << cfg.r1_gamma << "\nlr=" << cfg.lr
             << "\nema_decay=" << cfg.ema_decay << "\nseed=" << cfg.seed
             << "\ndata=" << cfg.data << "\nstyle_mix_prob=" << cfg.style_mix_prob << "\n";
    log_file.open(cfg.out_dir + "/log.csv");
    log_file << csv_header() << "\n";
  }

  TrainResult result;
  const int64_t total_steps =
      static_cast<int64_t>(std::llround(cfg.total_kimg * 1000.0 / static_cast<double>(cfg.batch)));
  const int64_t ckpt_every = std::max<int64_t>(
      1, static_cast<int64_t>(std::llround(cfg.checkpoint_every_kimg * 1000.0 /
                                           static_cast<double>(cfg.batch))));

  auto save_ckpt = [&](double kimg, int64_t step) {
    if (!writing) return;
    Checkpoint ck = model_to_checkpoint(m);
    const auto& g_items = m.g->params().items();
    const auto& d_items = m.d->params().items();
    for (size_t i = 0; i < g_items.size(); ++i) {
      ck.arrays.push_back({"opt.g.m." + g_items[i].name, opt_g.moments_m()[i]});
      ck.arrays.push_back({"opt.g.v." + g_items[i].name, opt_g.moments_v()[i]});
    }
    for (size_t i = 0; i < d_items.size(); ++i) {
      ck.arrays.push_back({"opt.d.m." + d_items[i].name, opt_d.moments_m()[i]});
      ck.arrays.push_back({"opt.d.v." + d_items[i].name, opt_d.moments_v()[i]});
    }
    ck.put_scalar("state.step", static_cast<double>(step));
    ck.put_scalar("state.kimg", kimg);
    ck.put_scalar("state.seed", static_cast<double>(cfg.seed));
    ck.put_scalar("state.adam_t_g", static_cast<double>(opt_g.t()));
    ck.put_scalar("state.adam_t_d", static_cast<double>(opt_d.t()));
    const std::string path = cfg.out_dir + "/ckpt-" + format_kimg(kimg) + ".bin";
    save_checkpoint(path, ck);
    result.checkpoints.push_back(path);
  };

  auto emit_row = [&](LogRow row) {
    if (writing) {
      log_file << csv_line(row) << "\n";
      log_file.flush();
    }
    result.rows.push_back(std::move(row));
  };

  auto maybe_metrics = [&](LogRow& row, double kimg) {
    if (!cfg.fid_at_checkpoints || !fx) return;
    const MetricsReport rep =
        evaluate_model(m, data, *fx, cfg.metric_samples, run.derive("eval").seed(), kimg);
    row.fid = rep.fid;
    row.is = rep.inception_score;
    row.precision = rep.precision;
    row.recall = rep.recall;
  };

  save_ckpt(0.0, 0);
  if (total_steps == 0) {
    // Initialization-only run: checkpoint written, metric log left empty.
    return result;
  }
  {
    LogRow row;
    row.kimg = 0.0;
    maybe_metrics(row, 0.0);
    emit_row(std::move(row));
  }

  using Clock = std::chrono::steady_clock;
  Clock::time_point window_start = Clock::now();
  int64_t window_images = 0;
  double total_secs = 0.0;
  int64_t total_images = 0;

  double last_loss_g = 0.0, last_loss_d = 0.0;
  const int64_t k = m.cfg.components, latent = m.cfg.latent_size;

  for (int64_t step = 0; step < total_steps; ++step) {
    const uint64_t s = static_cast<uint64_t>(step);

    // --- discriminator step ---
    Tensor reals = batches.next_batch(cfg.batch);
    Tensor fake_images;
    {
      NoGrad ng;
      Var za = make_const(draw_latents(cfg.batch, k, latent, run.derive("z-d").derive(s)));
      std::vector<std::vector<Var>> latents;
      if (cfg.style_mix_prob > 0.0) {
        Var zb = make_const(draw_latents(cfg.batch, k, latent, run.derive("z-d2").derive(s)));
        latents = m.g->prepare_latents(za, cfg.batch, &zb, cfg.style_mix_prob,
                                       run.derive("mix-d").derive(s));
      } else {
        latents = m.g->prepare_latents(za, cfg.batch, nullptr, 0.0, RandomStream(0));
      }
      fake_images = m.g->forward_mapped(latents, run.derive("noise-d").derive(s))->value;
    }
    m.d->params().zero_grads();
    {
      Var d_real = m.d->forward(make_const(reals));
      Var d_fake = m.d->forward(make_const(fake_images));
      NonsatLosses losses = nonsat_losses(d_real, d_fake);
      last_loss_d = losses.loss_d->value[0];
      if (!std::isfinite(last_loss_d))
        throw TrainingDiverged("discriminator loss is not finite at step " +
                               std::to_string(step));
      backward(losses.loss_d);
    }
    if (step % cfg.lazy_interval == 0) {
      result.r1_accumulated +=
          apply_r1(*m.d, reals, cfg.r1_gamma * static_cast<double>(cfg.lazy_interval));
    }
    opt_d.step(m.d->params(), preset, cfg.lr);
    m.d->params().zero_grads();

    // --- generator step ---
    m.g->params().zero_grads();
    {
      Tensor z = draw_latents(cfg.batch, k, latent, run.derive("z-g").derive(s));
      Var zv = make_const(std::move(z));
      Var z2v = nullptr;
      std::vector<std::vector<Var>> latents;
      if (cfg.style_mix_prob > 0.0) {
        Tensor z2 = draw_latents(cfg.batch, k, latent, run.derive("z-g2").derive(s));
        z2v = make_const(std::move(z2));
        latents = m.g->prepare_latents(zv, cfg.batch, &z2v, cfg.style_mix_prob,
                                       run.derive("mix-g").derive(s));
      } else {
        latents = m.g->prepare_latents(zv, cfg.batch, nullptr, 0.0, RandomStream(0));
      }
      Var fake = m.g->forward_mapped(latents, run.derive("noise-g").derive(s));
      Var d_fake = m.d->forward(fake);
      Var loss_g = mean(softplus(scale(d_fake, -1.0)));
      last_loss_g = loss_g->value[0];
      if (!std::isfinite(last_loss_g))
        throw TrainingDiverged("generator loss is not finite at step " + std::to_string(step));
      backward(loss_g);
    }
    opt_g.step(m.g->params(), preset, cfg.lr);
    m.g->params().zero_grads();
    m.d->params().zero_grads();

    const auto& g_items = m.g->params().items();
    for (size_t i = 0; i < g_items.size(); ++i)
      ema_update(m.ema[i], g_items[i].var->value, cfg.ema_decay);

    if (static_cast<int64_t>(result.first_loss_g.size()) < 10)
      result.first_loss_g.push_back(last_loss_g);

    window_images += cfg.batch;
    total_images += cfg.batch;
    const int64_t next_step = step + 1;
    const double kimg = static_cast<double>(next_step * cfg.batch) / 1000.0;
    if (next_step % ckpt_every == 0 || next_step == total_steps) {
      const double secs = std::chrono::duration<double>(Clock::now() - window_start).count();
      total_secs += secs;
      LogRow row;
      row.kimg = kimg;
      row.loss_g = last_loss_g;
      row.loss_d = last_loss_d;
      save_ckpt(kimg, next_step);
      maybe_metrics(row, kimg);
      if (cfg.log_timing && secs > 0.0)
        row.imgs_per_sec = static_cast<double>(window_images) / secs;
      emit_row(std::move(row));
      window_start = Clock::now();
      window_images = 0;
    }
  }

  result.steps = total_steps;
  result.kimg = static_cast<double>(total_steps * cfg.batch) / 1000.0;
  result.mean_imgs_per_sec = total_secs > 0.0 ? static_cast<double>(total_images) / total_secs
                                              : 0.0;
  return result;
}

TrainResult train_variant(const TrainConfig& cfg, Model* out_model) {
  Model m = build_model(
      config_for_variant(cfg.variant, cfg.resolution, cfg.k, cfg.preset, cfg.model_seed));
  m.cfg.style_mixing_prob = cfg.style_mix_prob;
  auto data = open_dataset(cfg.data, cfg.resolution, /*synth_seed=*/cfg.seed ^ 0xDA7A,
                           cfg.synth_count);
  const FeatureExtractor fx = build_extractor();
  TrainResult result = train(m, *data, cfg, &fx);
  if (out_model) *out_model = std::move(m);
  return result;
}

}  // namespace gfl
