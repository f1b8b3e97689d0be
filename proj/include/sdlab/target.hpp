// Copyright (c) 2026 sdlab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Eigenvalues>

#include "sdlab/gaussian.hpp"
#include "sdlab/schedule.hpp"

namespace sdlab {

// Stand-in for the pretrained prior: a distribution whose diffused score
// \nabla log p_t(x) and log density are available in closed form at every t.

struct GaussianTarget {
  Vec mu;     // D
  Mat sigma;  // D x D, symmetric positive definite

  GaussianTarget(Vec mu_in, Mat sigma_in) : mu(std::move(mu_in)), sigma(std::move(sigma_in)) {
    if (sigma.rows() != mu.size() || sigma.cols() != mu.size())
      throw std::invalid_argument("GaussianTarget: covariance shape mismatch");
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw std::invalid_argument("GaussianTarget: covariance must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(sigma);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw std::invalid_argument("GaussianTarget: covariance must be positive definite");
  }

  int dim() const { return static_cast<int>(mu.size()); }

  // Moments of the diffused target N(alpha*mu, alpha^2*Sigma + sigma^2*I).
  GaussianMoments moments_t(double t, const DiffusionSchedule& sched) const {
    const double a = sched.alpha(t);
    const double s = sched.sigma(t);
    return {a * mu, a * a * sigma + s * s * Mat::Identity(dim(), dim())};
  }
};

struct MixtureTarget {
  Vec weights;  // K, nonnegative, sums to 1
  std::vector<GaussianTarget> components;

  MixtureTarget(Vec weights_in, std::vector<GaussianTarget> components_in)
      : weights(std::move(weights_in)), components(std::move(components_in)) {
    if (components.empty() || weights.size() != static_cast<Eigen::Index>(components.size()))
      throw std::invalid_argument("MixtureTarget: weight/component count mismatch");
    if (weights.minCoeff() < 0.0 || std::abs(weights.sum() - 1.0) > 1e-12)
      throw std::invalid_argument("MixtureTarget: weights must be nonnegative and sum to 1");
    for (const auto& c : components)
      if (c.dim() != components.front().dim())
        throw std::invalid_argument("MixtureTarget: components must share one dimension");
  }

  int dim() const { return components.front().dim(); }
};

class Target {
 public:
  explicit Target(GaussianTarget g, double prior_guidance = 1.0)
      : dist_(std::move(g)), prior_guidance_(prior_guidance) {}
  explicit Target(MixtureTarget m, double prior_guidance = 1.0)
      : dist_(std::move(m)), prior_guidance_(prior_guidance) {}

  int dim() const {
    return std::visit([](const auto& d) { return d.dim(); }, dist_);
  }

  bool is_gaussian() const { return std::holds_alternative<GaussianTarget>(dist_); }
  const GaussianTarget& gaussian() const { return std::get<GaussianTarget>(dist_); }
  const MixtureTarget& mixture() const { return std::get<MixtureTarget>(dist_); }
  double prior_guidance() const { return prior_guidance_; }

  // Score of the diffused target, scaled by the guidance factor.
  // Gaussian: (alpha^2 Sigma + sigma^2 I)^{-1} (alpha mu - x).
  // Mixture: responsibility-weighted average of diffused component scores.
  Vec score(const Vec& x, double t, const DiffusionSchedule& sched) const {
    check_dim(x);
    Vec s = std::visit([&](const auto& d) { return score_impl(d, x, t, sched); }, dist_);
    return prior_guidance_ == 1.0 ? s : Vec(prior_guidance_ * s);
  }

  double log_density_t(const Vec& x, double t, const DiffusionSchedule& sched) const {
    check_dim(x);
    return std::visit([&](const auto& d) { return log_density_impl(d, x, t, sched); }, dist_);
  }

  // n i.i.d. draws from the time-0 target, one per row.
  Mat sample(RngStream& rng, int n) const {
    if (n < 1) throw std::invalid_argument("Target::sample: n must be >= 1");
    return std::visit([&](const auto& d) { return sample_impl(d, rng, n); }, dist_);
  }

 private:
  void check_dim(const Vec& x) const {
    if (x.size() != dim()) throw std::invalid_argument("Target: input dimension mismatch");
  }

  static Vec score_impl(const GaussianTarget& g, const Vec& x, double t,
                        const DiffusionSchedule& sched) {
    const GaussianMoments m = g.moments_t(t, sched);
    return detail::spd_cholesky(m.cov, "Target::score").solve(m.mean - x);
  }

  static Vec score_impl(const MixtureTarget& mix, const Vec& x, double t,
                        const DiffusionSchedule& sched) {
    const int k = static_cast<int>(mix.components.size());
    Vec log_terms(k);
    std::vector<Vec> comp_scores(k);
    for (int i = 0; i < k; ++i) {
      const GaussianMoments m = mix.components[i].moments_t(t, sched);
      log_terms[i] = (mix.weights[i] > 0.0 ? std::log(mix.weights[i])
                                           : -std::numeric_limits<double>::infinity()) +
                     gaussian_log_density(x, m.mean, m.cov);
      comp_scores[i] = detail::spd_cholesky(m.cov, "Target::score").solve(m.mean - x);
    }
    const double lse = log_sum_exp(log_terms);
    Vec out = Vec::Zero(x.size());
    for (int i = 0; i < k; ++i) {
      const double r = std::exp(log_terms[i] - lse);
      if (r > 0.0) out += r * comp_scores[i];
    }
    return out;
  }

  static double log_density_impl(const GaussianTarget& g, const Vec& x, double t,
                                 const DiffusionSchedule& sched) {
    const GaussianMoments m = g.moments_t(t, sched);
    return gaussian_log_density(x, m.mean, m.cov);
  }

  static double log_density_impl(const MixtureTarget& mix, const Vec& x, double t,
                                 const DiffusionSchedule& sched) {
    Vec log_terms(static_cast<Eigen::Index>(mix.components.size()));
    for (size_t i = 0; i < mix.components.size(); ++i) {
      const GaussianMoments m = mix.components[i].moments_t(t, sched);
      log_terms[static_cast<Eigen::Index>(i)] =
          (mix.weights[static_cast<Eigen::Index>(i)] > 0.0
               ? std::log(mix.weights[static_cast<Eigen::Index>(i)])
               : -std::numeric_limits<double>::infinity()) +
          gaussian_log_density(x, m.mean, m.cov);
    }
    return log_sum_exp(log_terms);
  }

  static Mat sample_impl(const GaussianTarget& g, RngStream& rng, int n) {
    return gaussian_sample(g.mu, g.sigma, rng, n);
  }

  static Mat sample_impl(const MixtureTarget& mix, RngStream& rng, int n) {
    Mat out(n, mix.dim());
    for (int i = 0; i < n; ++i) {
      const double u = rng.uniform();
      double acc = 0.0;
      int pick = static_cast<int>(mix.components.size()) - 1;
      for (int j = 0; j < mix.weights.size(); ++j) {
        acc += mix.weights[j];
        if (u < acc) {
          pick = j;
          break;
        }
      }
      out.row(i) = gaussian_sample(mix.components[pick].mu, mix.components[pick].sigma, rng, 1);
    }
    return out;
  }

  std::variant<GaussianTarget, MixtureTarget> dist_;
  double prior_guidance_;
};

}  // namespace sdlab
