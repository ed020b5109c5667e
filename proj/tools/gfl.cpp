// gfl — desk-scale GANformer laboratory CLI.
//
// Subcommands: train, eval, generate, interpolate, bench, curve.
// Flag precedence: command line > --config file > built-in defaults.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "gfl/bench.hpp"
#include "gfl/checkpoint.hpp"
#include "gfl/dataset.hpp"
#include "gfl/image_io.hpp"
#include "gfl/metrics.hpp"
#include "gfl/networks.hpp"
#include "gfl/training.hpp"

namespace {

using namespace gfl;

std::string canonical_variant(const std::string& variant, const std::string& disc_attention) {
  const bool disc_on = disc_attention == "on";
  if (variant == "stylegan2") {
    if (disc_on)
      throw std::invalid_argument(
          "invalid variant combination: stylegan2 has no attention anywhere");
    return "stylegan2";
  }
  if (variant == "simplex" || variant == "duplex")
    return disc_on ? variant : variant + "-vanillaD";
  throw std::invalid_argument("unknown variant: " + variant);
}

Tensor z_for_seed(const ModelConfig& cfg, uint64_t seed) {
  Tensor z({cfg.components, cfg.latent_size});
  fill_normal(z, RandomStream(seed).derive("z"));
  return z;
}

std::vector<std::string> run_dir_checkpoints(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind("ckpt-", 0) == 0 &&
        name.size() > 9 && name.substr(name.size() - 4) == ".bin")
      paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw std::invalid_argument("no ckpt-*.bin files under " + dir);
  return paths;
}

int run(int argc, char** argv) {
  CLI::App app{"desk-scale bipartite-attention GAN laboratory"};
  app.require_subcommand(1);
  app.set_config("--config", "", "plain-text key=value flag file");

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "adversarial training run");
  std::string variant = "stylegan2", disc_attention = "off", preset = "code";
  std::string data = "synthetic", out_dir = "run";
  int64_t k = 16, res = 32, batch = 8, metric_samples = 256, synth_count = 4096;
  double kimg = 30.0, ckpt_kimg = 2.0, gamma = 10.0, lr = 0.002, ema_decay = 0.995,
         mix_prob = 0.9;
  int lazy_interval = 16;
  uint64_t seed = 7, model_seed = 0;
  std::string fid_flag = "on", log_timing = "on";
  train_cmd->add_option("--variant", variant, "stylegan2|simplex|duplex");
  train_cmd->add_option("--disc-attention", disc_attention, "on|off")
      ->check(CLI::IsMember({"on", "off"}));
  train_cmd->add_option("--preset", preset, "code|article")
      ->check(CLI::IsMember({"code", "article"}));
  train_cmd->add_option("--k", k, "latent components");
  train_cmd->add_option("--res", res, "output resolution");
  train_cmd->add_option("--kimg", kimg, "thousands of real images to show");
  train_cmd->add_option("--seed", seed, "run seed");
  train_cmd->add_option("--model-seed", model_seed, "parameter init seed");
  train_cmd->add_option("--data", data, "synthetic or a PNG directory");
  train_cmd->add_option("--out", out_dir, "run directory");
  train_cmd->add_option("--batch", batch, "batch size");
  train_cmd->add_option("--lazy-interval", lazy_interval, "D steps between R1 applications");
  train_cmd->add_option("--gamma", gamma, "R1 coefficient");
  train_cmd->add_option("--lr", lr, "Adam learning rate for both networks");
  train_cmd->add_option("--ema-decay", ema_decay, "generator weight EMA decay");
  train_cmd->add_option("--ckpt-kimg", ckpt_kimg, "checkpoint cadence in kimg");
  train_cmd->add_option("--fid", fid_flag, "evaluate metrics at checkpoints (on|off)")
      ->check(CLI::IsMember({"on", "off"}));
  train_cmd->add_option("--metric-samples", metric_samples, "samples per metric evaluation");
  train_cmd->add_option("--synth-count", synth_count, "synthetic dataset size");
  train_cmd->add_option("--mix-prob", mix_prob, "style mixing probability");
  train_cmd->add_option("--log-timing", log_timing,
                        "write imgs/sec into log.csv (off for byte-reproducible logs)")
      ->check(CLI::IsMember({"on", "off"}));

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "metrics for a checkpoint");
  std::string eval_ckpt;
  int64_t eval_samples = 256;
  std::string eval_data = "synthetic";
  int64_t eval_synth_count = 4096;
  uint64_t eval_seed = 7;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--data", eval_data, "synthetic or a PNG directory");
  eval_cmd->add_option("--samples", eval_samples, "sample count per side");
  eval_cmd->add_option("--seed", eval_seed, "evaluation seed");
  eval_cmd->add_option("--synth-count", eval_synth_count, "synthetic dataset size");

  // ---- generate ----
  auto* gen_cmd = app.add_subcommand("generate", "PNG grid of samples");
  std::string gen_ckpt, gen_out = "samples.png", gen_ema = "on";
  std::vector<uint64_t> gen_seeds = {0, 1, 2, 3};
  int gen_cols = 0;
  gen_cmd->add_option("--checkpoint", gen_ckpt)->required();
  gen_cmd->add_option("--seeds", gen_seeds, "sample seeds")->delimiter(',');
  gen_cmd->add_option("--out", gen_out, "output PNG path");
  gen_cmd->add_option("--grid", gen_cols, "grid columns (default: square-ish)");
  gen_cmd->add_option("--ema", gen_ema, "use EMA weights (on|off)")
      ->check(CLI::IsMember({"on", "off"}));

  // ---- interpolate ----
  auto* interp_cmd = app.add_subcommand("interpolate", "PNG strip between two seeds");
  std::string interp_ckpt, interp_out = "interpolation.png", interp_ema = "on";
  uint64_t seed0 = 0, seed1 = 1;
  int steps = 8;
  interp_cmd->add_option("--checkpoint", interp_ckpt)->required();
  interp_cmd->add_option("--seed0", seed0);
  interp_cmd->add_option("--seed1", seed1);
  interp_cmd->add_option("--steps", steps);
  interp_cmd->add_option("--out", interp_out);
  interp_cmd->add_option("--ema", interp_ema)->check(CLI::IsMember({"on", "off"}));

  // ---- bench ----
  auto* bench_cmd = app.add_subcommand("bench", "complexity / throughput benchmarks");
  std::string mode = "attention", bench_out;
  std::vector<int64_t> n_values = {64, 256, 1024, 4096};
  int64_t bench_m = 16, bench_d = 32, bench_batch = 8, bench_res = 32, bench_k = 16;
  int repeats = 20, bench_steps = 60;
  bench_cmd->add_option("--mode", mode)->check(CLI::IsMember({"attention", "throughput"}));
  bench_cmd->add_option("--n", n_values, "feature-set sizes")->delimiter(',');
  bench_cmd->add_option("--m", bench_m, "latent count");
  bench_cmd->add_option("--d", bench_d, "feature width");
  bench_cmd->add_option("--repeats", repeats);
  bench_cmd->add_option("--res", bench_res);
  bench_cmd->add_option("--k", bench_k);
  bench_cmd->add_option("--batch", bench_batch);
  bench_cmd->add_option("--steps", bench_steps, "training steps per throughput sample");
  bench_cmd->add_option("--out", bench_out, "CSV path (default stdout)");

  // ---- curve ----
  auto* curve_cmd = app.add_subcommand("curve", "FID-vs-kimg over a run directory");
  std::string run_dir, curve_data = "synthetic", curve_out;
  int64_t curve_samples = 256, curve_synth_count = 4096;
  uint64_t curve_seed = 7;
  curve_cmd->add_option("--run", run_dir, "run directory with ckpt-*.bin")->required();
  curve_cmd->add_option("--data", curve_data);
  curve_cmd->add_option("--samples", curve_samples);
  curve_cmd->add_option("--seed", curve_seed);
  curve_cmd->add_option("--synth-count", curve_synth_count);
  curve_cmd->add_option("--out", curve_out, "CSV path (default <run>/fid_curve.csv)");

  CLI11_PARSE(app, argc, argv);

  if (train_cmd->parsed()) {
    TrainConfig cfg;
    cfg.variant = canonical_variant(variant, disc_attention);
    cfg.resolution = res;
    cfg.k = k;
    cfg.preset = preset;
    cfg.total_kimg = kimg;
    cfg.batch = batch;
    cfg.lazy_interval = lazy_interval;
    cfg.r1_gamma = gamma;
    cfg.lr = lr;
    cfg.ema_decay = ema_decay;
    cfg.checkpoint_every_kimg = ckpt_kimg;
    cfg.fid_at_checkpoints = fid_flag == "on";
    cfg.metric_samples = metric_samples;
    cfg.seed = seed;
    cfg.model_seed = model_seed;
    cfg.data = data;
    cfg.synth_count = synth_count;
    cfg.out_dir = out_dir;
    cfg.log_timing = log_timing == "on";
    cfg.style_mix_prob = mix_prob;
    const TrainResult result = train_variant(cfg);
    std::printf("trained %s for %.6g kimg (%lld steps), %zu checkpoints, %.2f imgs/sec\n",
                cfg.variant.c_str(), result.kimg, static_cast<long long>(result.steps),
                result.checkpoints.size(), result.mean_imgs_per_sec);
    return 0;
  }

  if (eval_cmd->parsed()) {
    Model m = model_from_checkpoint(load_checkpoint(eval_ckpt));
    auto ds = open_dataset(eval_data, m.cfg.resolution, eval_seed ^ 0xDA7A, eval_synth_count);
    const FeatureExtractor fx = build_extractor();
    Checkpoint ck = load_checkpoint(eval_ckpt);
    const double at_kimg = ck.find("state.kimg") ? ck.scalar("state.kimg") : 0.0;
    const MetricsReport rep = evaluate_model(m, *ds, fx, eval_samples, eval_seed, at_kimg);
    std::printf("%s\n", csv_header().c_str());
    LogRow row;
    row.kimg = rep.kimg;
    row.fid = rep.fid;
    row.is = rep.inception_score;
    row.precision = rep.precision;
    row.recall = rep.recall;
    std::printf("%s\n", csv_line(row).c_str());
    return 0;
  }

  if (gen_cmd->parsed()) {
    Model m = model_from_checkpoint(load_checkpoint(gen_ckpt));
    std::vector<Tensor> images;
    for (uint64_t s : gen_seeds)
      images.push_back(generate_image(m, z_for_seed(m.cfg, s),
                                      RandomStream(s).derive("noise").seed(),
                                      gen_ema == "on"));
    const int cols = gen_cols > 0 ? gen_cols
                                  : std::max(1, static_cast<int>(std::ceil(
                                                    std::sqrt(static_cast<double>(images.size())))));
    write_png_grid(gen_out, images, cols);
    std::printf("wrote %zu samples to %s\n", images.size(), gen_out.c_str());
    return 0;
  }

  if (interp_cmd->parsed()) {
    Model m = model_from_checkpoint(load_checkpoint(interp_ckpt));
    const auto images =
        interpolate_images(m, z_for_seed(m.cfg, seed0), z_for_seed(m.cfg, seed1), steps,
                           RandomStream(seed0 ^ (seed1 << 1)).derive("noise").seed(),
                           interp_ema == "on");
    write_png_grid(interp_out, images, static_cast<int>(images.size()));
    std::printf("wrote %d interpolation frames to %s\n", steps, interp_out.c_str());
    return 0;
  }

  if (bench_cmd->parsed()) {
    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!bench_out.empty()) {
      file.open(bench_out);
      os = &file;
    }
    if (mode == "attention") {
      const AttentionBenchResult r = bench_attention(n_values, bench_m, bench_d, repeats);
      *os << "variant,n,median_seconds,fitted_slope\n";
      for (const auto& row : r.rows) {
        const double slope = row.variant == "self"      ? r.slope_self
                             : row.variant == "simplex" ? r.slope_simplex
                                                        : r.slope_duplex;
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s,%lld,%.6e,%.3f\n", row.variant.c_str(),
                      static_cast<long long>(row.n), row.median_seconds, slope);
        *os << buf;
      }
      std::fprintf(stderr, "slopes: self=%.3f simplex=%.3f duplex=%.3f\n", r.slope_self,
                   r.slope_simplex, r.slope_duplex);
    } else {
      const std::vector<std::string> variants = {"stylegan2", "simplex", "duplex",
                                                 "simplex-vanillaD", "duplex-vanillaD"};
      const auto rows =
          bench_throughput(variants, bench_res, bench_k, bench_batch, bench_steps);
      *os << "variant,imgs_per_sec\n";
      for (const auto& row : rows) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%s,%.3f\n", row.variant.c_str(), row.imgs_per_sec);
        *os << buf;
      }
    }
    return 0;
  }

  if (curve_cmd->parsed()) {
    const auto paths = run_dir_checkpoints(run_dir);
    Model probe = model_from_checkpoint(load_checkpoint(paths.front()));
    auto ds = open_dataset(curve_data, probe.cfg.resolution, curve_seed ^ 0xDA7A,
                           curve_synth_count);
    const FeatureExtractor fx = build_extractor();
    const auto points = fid_curve(paths, *ds, fx, curve_samples, curve_seed);
    const std::string out_path = curve_out.empty() ? run_dir + "/fid_curve.csv" : curve_out;
    std::ofstream os(out_path);
    os << "kimg,fid\n";
    for (const auto& p : points) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "%.6g,%.6g\n", p.kimg, p.fid);
      os << buf;
    }
    std::printf("wrote %zu curve points to %s\n", points.size(), out_path.c_str());
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gfl: %s\n", e.what());
    return 1;
  }
}
