#pragma once
// Evaluation: Fréchet distance over a frozen random feature extractor, a
// softmax-head inception-score proxy, k-NN precision/recall, improvement
// percentages and FID-vs-kimg curves.
//
// The extractor is a stand-in for a pretrained embedding network: a small
// frozen conv stack drawn once from a fixed seed. Scores are only comparable
// between runs of this laboratory, never with published values.

#include <string>
#include <utility>
#include <vector>

#include "gfl/networks.hpp"
#include "gfl/tensor.hpp"

namespace gfl {

class Dataset;

struct FeatureExtractor {
  std::vector<Tensor> conv_w;  // three 3x3 stages
  std::vector<Tensor> conv_b;
  Tensor head_w;  // [f x classes] frozen IS head
  int64_t feature_dim = 64;
  int64_t classes = 10;
  uint64_t seed = 0;
};

FeatureExtractor build_extractor(uint64_t seed = 0x0f1d);

// images are [3,H,W] in [-1,1]; result is [N x feature_dim].
Tensor extract_features(const std::vector<Tensor>& images, const FeatureExtractor& fx);

// Row-wise class distribution of the IS head on extractor features.
Tensor class_probs(const Tensor& features, const FeatureExtractor& fx);

struct GaussianStats {
  Tensor mean;  // [f]
  Tensor cov;   // [f x f], symmetric
  int64_t count = 0;
};

// Sample mean/covariance (population). When count < dim + 1 the covariance
// cannot be full rank and diagonal shrinkage of 1e-6 is applied.
GaussianStats gaussian_stats(const Tensor& features);

// ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^{1/2}); the cross term is taken
// through the symmetrized product with negative eigenvalues clamped to zero.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

double fid_between(const Tensor& real_features, const Tensor& fake_features);

// exp(mean KL(p(y|x) || p(y))) over given row distributions.
double inception_score_from_probs(const Tensor& probs);
double inception_score_proxy(const std::vector<Tensor>& images, const FeatureExtractor& fx);

// k-NN manifold coverage estimator; both sets need at least k+1 points.
std::pair<double, double> precision_recall(const Tensor& real_features,
                                           const Tensor& fake_features, int k = 3);

// 100 * (baseline - model) / baseline
double fid_improvement(double baseline_fid, double model_fid);

struct MetricsReport {
  double kimg = 0.0;
  double fid = 0.0;
  double inception_score = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

// Generates `samples` EMA images and compares them against `samples` dataset
// images (both capped by dataset size).
MetricsReport evaluate_model(Model& m, const Dataset& data, const FeatureExtractor& fx,
                             int64_t samples, uint64_t eval_seed, double kimg);

struct CurvePoint {
  double kimg = 0.0;
  double fid = 0.0;
};

// FID per checkpoint, rows sorted by kimg ascending.
std::vector<CurvePoint> fid_curve(const std::vector<std::string>& checkpoint_paths,
                                  const Dataset& data, const FeatureExtractor& fx,
                                  int64_t samples, uint64_t eval_seed);

}  // namespace gfl
