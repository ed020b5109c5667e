#pragma once
// Adversarial optimization: non-saturating logistic losses, lazy R1 gradient
// penalty, Adam with the "code" and "article" presets, the kimg-based
// training loop, CSV logging and checkpointing.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfl/dataset.hpp"
#include "gfl/metrics.hpp"
#include "gfl/networks.hpp"

namespace gfl {

struct OptimizerPreset {
  std::string name;
  double beta1 = 0.0;
  double beta2 = 0.99;
  double epsilon = 1e-8;
};

// "code": (0.0, 0.99, 1e-8); "article": (0.9, 0.999, 1e-3)
OptimizerPreset optimizer_preset(const std::string& name);

class Adam {
 public:
  explicit Adam(const ParamSet& params);
  // Bias-corrected update from the gradients currently on the parameters.
  void step(const ParamSet& params, const OptimizerPreset& preset, double lr);
  int64_t t() const { return t_; }
  std::vector<Tensor>& moments_m() { return m_; }
  std::vector<Tensor>& moments_v() { return v_; }
  void set_t(int64_t t) { t_ = t; }

 private:
  std::vector<Tensor> m_, v_;
  int64_t t_ = 0;
};

// Single-tensor Adam update, exposed for the optimizer contract tests.
void adam_step(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, int64_t t,
               const OptimizerPreset& preset, double lr);

// mean log D(real) + mean log(1 - D(fake)) through sigmoid, eps-guarded.
double gan_value(const Tensor& d_real_logits, const Tensor& d_fake_logits);

struct NonsatLosses {
  Var loss_g;
  Var loss_d;
};
NonsatLosses nonsat_losses(const Var& d_real, const Var& d_fake);

// (gamma/2) * mean over the batch of ||grad_x D(x)||^2, plus the per-image
// input gradients (the discriminator parameters are untouched).
struct R1Value {
  double penalty = 0.0;
  Tensor input_grads;  // same shape as the image batch
};
R1Value r1_penalty(Discriminator& d, const Tensor& real_images, double gamma);

// Adds d(penalty)/d(theta) onto the discriminator parameter gradients using a
// central-difference directional derivative (first-order passes only) and
// returns the exact penalty value at coefficient gamma_eff.
double apply_r1(Discriminator& d, const Tensor& real_images, double gamma_eff,
                double fd_delta = 1e-4);

struct TrainConfig {
  std::string variant = "stylegan2";
  int64_t resolution = 32;
  int64_t k = 16;
  std::string preset = "code";
  double total_kimg = 30.0;
  int64_t batch = 8;
  int lazy_interval = 16;
  double r1_gamma = 10.0;
  double lr = 0.002;
  double ema_decay = 0.995;
  double checkpoint_every_kimg = 2.0;
  bool fid_at_checkpoints = true;
  int64_t metric_samples = 256;
  uint64_t seed = 7;
  std::string data = "synthetic";
  int64_t synth_count = 4096;
  std::string out_dir;  // empty: no files written
  bool log_timing = true;
  double style_mix_prob = 0.9;
  uint64_t model_seed = 0;
};

struct LogRow {
  double kimg = 0.0;
  std::optional<double> loss_g, loss_d, fid, is, precision, recall, imgs_per_sec;
};

struct TrainResult {
  int64_t steps = 0;
  double kimg = 0.0;
  std::vector<LogRow> rows;
  std::vector<std::string> checkpoints;
  double r1_accumulated = 0.0;  // sum of effective penalties actually applied
  double mean_imgs_per_sec = 0.0;
  std::vector<double> first_loss_g;  // first 10 G losses, determinism probes
};

class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(const std::string& what) : std::runtime_error(what) {}
};

std::string csv_header();
std::string csv_line(const LogRow& row);

// Runs the loop, returns the result, and leaves the trained model in `m`.
TrainResult train(Model& m, const Dataset& data, const TrainConfig& cfg,
                  const FeatureExtractor* fx = nullptr);

// Convenience: build the model from cfg and train.
TrainResult train_variant(const TrainConfig& cfg, Model* out_model = nullptr);

}  // namespace gfl
