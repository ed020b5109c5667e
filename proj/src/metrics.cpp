#include "gfl/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "gfl/checkpoint.hpp"
#include "gfl/dataset.hpp"
#include "gfl/linalg.hpp"
#include "gfl/ops.hpp"
#include "op_detail.hpp"

namespace gfl {

using detail::require;

FeatureExtractor build_extractor(uint64_t seed) {
  const RandomStream init(splitmix64(seed ^ hash_str("feature-extractor")));
  FeatureExtractor fx;
  fx.seed = seed;
  const int64_t widths[4] = {3, 16, 32, 64};
  for (int stage = 0; stage < 3; ++stage) {
    const int64_t in = widths[stage], out = widths[stage + 1];
    Tensor w({out, in, 3, 3});
    fill_normal(w, init.derive("conv").derive(static_cast<uint64_t>(stage)),
                std::sqrt(2.0 / static_cast<double>(in * 9)));
    Tensor b({out});
    fx.conv_w.push_back(std::move(w));
    fx.conv_b.push_back(std::move(b));
  }
  fx.head_w = Tensor({fx.feature_dim, fx.classes});
  fill_normal(fx.head_w, init.derive("head"), std::sqrt(1.0 / static_cast<double>(fx.feature_dim)));
  return fx;
}

Tensor extract_features(const std::vector<Tensor>& images, const FeatureExtractor& fx) {
  require(!images.empty(), "extract_features: empty image set");
  NoGrad ng;
  const int64_t n = static_cast<int64_t>(images.size());
  Tensor feats({n, fx.feature_dim});
  // Modest batches keep the conv workspace small.
  const int64_t chunk = 32;
  for (int64_t start = 0; start < n; start += chunk) {
    const int64_t cnt = std::min(chunk, n - start);
    const Tensor& first = images[static_cast<size_t>(start)];
    require(first.rank() == 3 && first.dim(0) == 3, "extract_features: [3,H,W] images required");
    Tensor batch({cnt, 3, first.dim(1), first.dim(2)});
    for (int64_t i = 0; i < cnt; ++i) {
      const Tensor& img = images[static_cast<size_t>(start + i)];
      require(img.same_shape(first), "extract_features: image size mismatch");
      for (int64_t j = 0; j < img.numel(); ++j) {
        require(img[j] >= -1.0 - 1e-9 && img[j] <= 1.0 + 1e-9,
                "extract_features: pixel outside [-1,1]");
        batch.data()[i * img.numel() + j] = img[j];
      }
    }
    Var x = make_const(std::move(batch));
    for (size_t stage = 0; stage < fx.conv_w.size(); ++stage) {
      x = leaky_relu(add_channel_bias(conv2d(x, make_const(fx.conv_w[stage])),
                                      make_const(fx.conv_b[stage])),
                     0.2);
      x = resample_down(x);
    }
    Var pooled = global_avg_pool(x);  // [cnt x 64]
    for (int64_t i = 0; i < cnt; ++i)
      for (int64_t j = 0; j < fx.feature_dim; ++j)
        feats.at(start + i, j) = pooled->value.at(i, j);
  }
  return feats;
}

Tensor class_probs(const Tensor& features, const FeatureExtractor& fx) {
  NoGrad ng;
  Var logits = matmul(make_const(features), make_const(fx.head_w));
  return softmax_rows(logits)->value;
}

GaussianStats gaussian_stats(const Tensor& features) {
  require(features.rank() == 2 && features.dim(0) >= 2, "gaussian_stats: need >= 2 samples");
  const int64_t n = features.dim(0), f = features.dim(1);
  GaussianStats st;
  st.count = n;
  st.mean = Tensor({f});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < f; ++j) st.mean[j] += features.at(i, j);
  for (int64_t j = 0; j < f; ++j) st.mean[j] /= static_cast<double>(n);
  st.cov = Tensor({f, f});
  std::vector<double> centered(static_cast<size_t>(f));
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < f; ++j) centered[static_cast<size_t>(j)] = features.at(i, j) - st.mean[j];
    for (int64_t a = 0; a < f; ++a) {
      const double ca = centered[static_cast<size_t>(a)];
      for (int64_t b = a; b < f; ++b) st.cov.at(a, b) += ca * centered[static_cast<size_t>(b)];
    }
  }
  const double inv = 1.0 / static_cast<double>(n - 1);
  for (int64_t a = 0; a < f; ++a)
    for (int64_t b = a; b < f; ++b) {
      st.cov.at(a, b) *= inv;
      st.cov.at(b, a) = st.cov.at(a, b);
    }
  if (n < f + 1) {  // rank-deficient estimate: diagonal shrinkage
    for (int64_t a = 0; a < f; ++a) st.cov.at(a, a) += 1e-6;
  }
  return st;
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  require(a.mean.same_shape(b.mean) && a.cov.same_shape(b.cov),
          "frechet_distance: dimension mismatch");
  const int64_t f = a.mean.dim(0);
  double mean_term = 0.0;
  for (int64_t j = 0; j < f; ++j) {
    const double d = a.mean[j] - b.mean[j];
    mean_term += d * d;
  }
  const Tensor sa_root = matrix_sqrt_psd(a.cov);
  Tensor inner = matmul_plain(matmul_plain(sa_root, b.cov), sa_root);
  // Symmetrize against roundoff before the second decomposition.
  for (int64_t i = 0; i < f; ++i)
    for (int64_t j = i + 1; j < f; ++j) {
      const double m = 0.5 * (inner.at(i, j) + inner.at(j, i));
      inner.at(i, j) = m;
      inner.at(j, i) = m;
    }
  Tensor vals, vecs;
  symmetric_eigen(inner, vals, vecs);
  double cross = 0.0;
  for (int64_t i = 0; i < f; ++i) cross += std::sqrt(std::max(0.0, vals[i]));
  const double d2 = mean_term + trace(a.cov) + trace(b.cov) - 2.0 * cross;
  return std::max(0.0, d2);
}

double fid_between(const Tensor& real_features, const Tensor& fake_features) {
  return frechet_distance(gaussian_stats(real_features), gaussian_stats(fake_features));
}

double inception_score_from_probs(const Tensor& probs) {
  require(probs.rank() == 2 && probs.dim(0) >= 1 && probs.dim(1) >= 2,
          "inception_score: need an [N x C>=2] distribution matrix");
  const int64_t n = probs.dim(0), c = probs.dim(1);
  std::vector<double> marginal(static_cast<size_t>(c), 0.0);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < c; ++j) marginal[static_cast<size_t>(j)] += probs.at(i, j);
  for (double& m : marginal) m /= static_cast<double>(n);
  double mean_kl = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double kl = 0.0;
    for (int64_t j = 0; j < c; ++j) {
      const double p = probs.at(i, j);
      if (p <= 0.0) continue;
      kl += p * std::log(p / std::max(marginal[static_cast<size_t>(j)], 1e-12));
    }
    mean_kl += kl;
  }
  return std::exp(mean_kl / static_cast<double>(n));
}

double inception_score_proxy(const std::vector<Tensor>& images, const FeatureExtractor& fx) {
  return inception_score_from_probs(class_probs(extract_features(images, fx), fx));
}

std::pair<double, double> precision_recall(const Tensor& real_features,
                                           const Tensor& fake_features, int k) {
  require(k >= 1, "precision_recall: k must be positive");
  require(real_features.dim(0) >= k + 1 && fake_features.dim(0) >= k + 1,
          "precision_recall: sets must have at least k+1 points");
  require(real_features.dim(1) == fake_features.dim(1), "precision_recall: width mismatch");
  const int64_t f = real_features.dim(1);

  auto sq_dist = [f](const Tensor& a, int64_t i, const Tensor& b, int64_t j) {
    double d = 0.0;
    for (int64_t t = 0; t < f; ++t) {
      const double diff = a.at(i, t) - b.at(j, t);
      d += diff * diff;
    }
    return d;
  };

  // Squared radius to the k-th nearest neighbour within the same set.
  auto knn_radii = [&](const Tensor& set) {
    const int64_t n = set.dim(0);
    std::vector<double> radii(static_cast<size_t>(n));
    std::vector<double> dists;
    for (int64_t i = 0; i < n; ++i) {
      dists.clear();
      for (int64_t j = 0; j < n; ++j)
        if (j != i) dists.push_back(sq_dist(set, i, set, j));
      std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
      radii[static_cast<size_t>(i)] = dists[static_cast<size_t>(k - 1)];
    }
    return radii;
  };

  auto coverage = [&](const Tensor& manifold, const std::vector<double>& radii,
                      const Tensor& queries) {
    const int64_t nq = queries.dim(0), nm = manifold.dim(0);
    int64_t covered = 0;
    for (int64_t i = 0; i < nq; ++i) {
      for (int64_t j = 0; j < nm; ++j) {
        if (sq_dist(queries, i, manifold, j) <= radii[static_cast<size_t>(j)]) {
          ++covered;
          break;
        }
      }
    }
    return static_cast<double>(covered) / static_cast<double>(nq);
  };

  const auto real_radii = knn_radii(real_features);
  const auto fake_radii = knn_radii(fake_features);
  const double precision = coverage(real_features, real_radii, fake_features);
  const double recall = coverage(fake_features, fake_radii, real_features);
  return {precision, recall};
}

double fid_improvement(double baseline_fid, double model_fid) {
  require(baseline_fid > 0.0, "fid_improvement: baseline must be positive");
  return 100.0 * (baseline_fid - model_fid) / baseline_fid;
}

MetricsReport evaluate_model(Model& m, const Dataset& data, const FeatureExtractor& fx,
                             int64_t samples, uint64_t eval_seed, double kimg) {
  require(samples >= 8, "evaluate_model: need at least 8 samples");
  const int64_t count = std::min<int64_t>(samples, data.size());
  const RandomStream stream = RandomStream(eval_seed).derive("eval");

  std::vector<Tensor> fakes;
  fakes.reserve(static_cast<size_t>(count));
  const int64_t k = m.cfg.components, latent = m.cfg.latent_size;
  for (int64_t i = 0; i < count; ++i) {
    Tensor z({k, latent});
    fill_normal(z, stream.derive("z").derive(static_cast<uint64_t>(i)));
    fakes.push_back(generate_image(m, z, stream.derive("noise").bits(static_cast<uint64_t>(i)),
                                   /*use_ema=*/true));
  }

  const auto order = shuffled_indices(data.size(), stream.derive("real-subset"));
  std::vector<Tensor> reals;
  reals.reserve(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) reals.push_back(data.image(order[static_cast<size_t>(i)]));

  const Tensor fake_feats = extract_features(fakes, fx);
  const Tensor real_feats = extract_features(reals, fx);

  MetricsReport rep;
  rep.kimg = kimg;
  rep.fid = fid_between(real_feats, fake_feats);
  rep.inception_score = inception_score_from_probs(class_probs(fake_feats, fx));
  const auto pr = precision_recall(real_feats, fake_feats);
  rep.precision = pr.first;
  rep.recall = pr.second;
  return rep;
}

std::vector<CurvePoint> fid_curve(const std::vector<std::string>& checkpoint_paths,
                                  const Dataset& data, const FeatureExtractor& fx,
                                  int64_t samples, uint64_t eval_seed) {
  require(!checkpoint_paths.empty(), "fid_curve: need at least one checkpoint");
  std::vector<CurvePoint> points;
  points.reserve(checkpoint_paths.size());
  for (const std::string& path : checkpoint_paths) {
    Checkpoint ck = load_checkpoint(path);
    Model m = model_from_checkpoint(ck);
    const double kimg = ck.find("state.kimg") ? ck.scalar("state.kimg") : 0.0;
    const MetricsReport rep = evaluate_model(m, data, fx, samples, eval_seed, kimg);
    points.push_back({kimg, rep.fid});
  }
  std::sort(points.begin(), points.end(),
            [](const CurvePoint& a, const CurvePoint& b) { return a.kimg < b.kimg; });
  return points;
}

}  // namespace gfl
