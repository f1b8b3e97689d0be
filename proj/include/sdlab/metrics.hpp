// Copyright (c) 2026 sdlab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>

#include <Eigen/Eigenvalues>

#include "sdlab/generator.hpp"
#include "sdlab/target.hpp"

namespace sdlab {

// Quantitative collapse diagnostics: Frechet distance between sample sets and
// entropy-based classification metrics against an exact Bayes classifier over
// a reference mixture.

namespace detail {

inline Vec sample_mean(const Mat& samples) { return samples.colwise().mean(); }

// Biased (1/n) empirical covariance.
inline Mat sample_cov(const Mat& samples) {
  const Vec mu = sample_mean(samples);
  const Mat centered = samples.rowwise() - mu.transpose();
  return (centered.transpose() * centered) / static_cast<double>(samples.rows());
}

// Symmetric PSD square root with negative eigenvalues clamped to zero.
inline Mat psd_sqrt(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  Vec vals = es.eigenvalues();
  for (int i = 0; i < vals.size(); ++i) vals[i] = vals[i] > 0.0 ? std::sqrt(vals[i]) : 0.0;
  return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

// ||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a S_b)^{1/2}) with moments fitted
// empirically. The cross term is evaluated through the symmetric eigenproblem
// of sqrt(S_a) S_b sqrt(S_a); tiny negative eigenvalues are clamped to zero.
inline double frechet_distance(const Mat& samples_a, const Mat& samples_b) {
  if (samples_a.rows() < 2 || samples_b.rows() < 2)
    throw std::invalid_argument("frechet_distance: need at least 2 samples per set");
  if (samples_a.cols() != samples_b.cols())
    throw std::invalid_argument("frechet_distance: dimension mismatch");
  const Vec mu_a = detail::sample_mean(samples_a);
  const Vec mu_b = detail::sample_mean(samples_b);
  const Mat cov_a = detail::sample_cov(samples_a);
  const Mat cov_b = detail::sample_cov(samples_b);
  const Mat root_a = detail::psd_sqrt(cov_a);
  Mat prod = root_a * cov_b * root_a;
  prod = 0.5 * (prod + prod.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat> es(prod);
  double trace_sqrt = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double v = es.eigenvalues()[i];
    if (v > 0.0) trace_sqrt += std::sqrt(v);
  }
  return (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * trace_sqrt;
}

// Exact Bayes posterior over the components of a reference mixture, optionally
// flattened by a temperature (posterior ~ softmax(log-joint / temperature)).
struct SyntheticClassifier {
  MixtureTarget reference;
  double temperature = 1.0;

  SyntheticClassifier(MixtureTarget ref, double temp = 1.0)
      : reference(std::move(ref)), temperature(temp) {
    if (!(temperature > 0.0))
      throw std::invalid_argument("SyntheticClassifier: temperature must be positive");
  }

  int label_count() const { return static_cast<int>(reference.components.size()); }
};

inline Vec classify(const SyntheticClassifier& clf, const Vec& x) {
  const int k = clf.label_count();
  Vec log_joint(k);
  for (int i = 0; i < k; ++i) {
    const auto& comp = clf.reference.components[static_cast<size_t>(i)];
    if (x.size() != comp.dim()) throw std::invalid_argument("classify: dimension mismatch");
    const double lw = clf.reference.weights[i] > 0.0
                          ? std::log(clf.reference.weights[i])
                          : -std::numeric_limits<double>::infinity();
    log_joint[i] = lw + gaussian_log_density(x, comp.mu, comp.sigma);
  }
  Vec scaled = log_joint / clf.temperature;
  const double lse = log_sum_exp(scaled);
  Vec post(k);
  for (int i = 0; i < k; ++i) post[i] = std::exp(scaled[i] - lse);
  post /= post.sum();
  return post;
}

// Entropy of a probability vector, natural log, 0 log 0 = 0.
inline double posterior_entropy(const Vec& p) {
  double h = 0.0;
  for (int i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  return h;
}

// Per-view posteriors for n_views renders at cameras drawn from the prior;
// one row per view. IQ and IV are computed from a shared posterior matrix so
// the pair refers to the same view set.
inline Mat view_posteriors(const Generator& gen, const SyntheticClassifier& clf, int n_views,
                           RngStream& rng) {
  if (n_views < 1) throw std::invalid_argument("view_posteriors: n_views must be >= 1");
  Mat post(n_views, clf.label_count());
  for (int i = 0; i < n_views; ++i)
    post.row(i) = classify(clf, render(gen, sample_camera(gen, rng))).transpose();
  return post;
}

// Average per-view posterior entropy: low means confidently classified views.
inline double inception_quality_from(const Mat& posteriors) {
  double acc = 0.0;
  for (int i = 0; i < posteriors.rows(); ++i)
    acc += posterior_entropy(posteriors.row(i).transpose());
  return acc / static_cast<double>(posteriors.rows());
}

// Entropy of the view-averaged posterior: high means views spread over labels.
inline double inception_variety_from(const Mat& posteriors) {
  return posterior_entropy(posteriors.colwise().mean().transpose());
}

inline double inception_quality(const Generator& gen, const SyntheticClassifier& clf,
                                int n_views, RngStream& rng) {
  return inception_quality_from(view_posteriors(gen, clf, n_views, rng));
}

inline double inception_variety(const Generator& gen, const SyntheticClassifier& clf,
                                int n_views, RngStream& rng) {
  return inception_variety_from(view_posteriors(gen, clf, n_views, rng));
}

// (IV - IQ) / IQ; undefined (nullopt) when IQ is numerically zero, since the
// ratio carries no information there.
inline std::optional<double> inception_gain(double iq, double iv) {
  if (iq <= 1e-6) return std::nullopt;
  return (iv - iq) / iq;
}

// trace(A A^T) and ||b - mu*||: direct coordinates of the collapse picture.
inline std::pair<double, double> collapse_diagnostics(const LinearGaussianGenerator& gen,
                                                      const GaussianTarget& target) {
  return {(gen.A * gen.A.transpose()).trace(), (gen.b - target.mu).norm()};
}

struct MetricRecord {
  double fid = 0.0;
  double iq = 0.0;
  double iv = 0.0;
  std::optional<double> ig;
  double trace_cov = 0.0;
  double mean_err = 0.0;
};

}  // namespace sdlab
