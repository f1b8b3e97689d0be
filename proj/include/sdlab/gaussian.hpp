// Copyright (c) 2026 sdlab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "sdlab/rng.hpp"

namespace sdlab {

inline constexpr double kLog2Pi = 1.8378770664093453;  // ln(2*pi)

// First and second moments of a Gaussian; the carrier type for all
// closed-form objective evaluations.
struct GaussianMoments {
  Vec mean;
  Mat cov;

  int dim() const { return static_cast<int>(mean.size()); }
};

namespace detail {

// Cholesky factor of an SPD matrix; throws on failure.
inline Eigen::LLT<Mat> spd_cholesky(const Mat& m, const char* what) {
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success)
    throw std::domain_error(std::string(what) + ": matrix is not positive definite");
  return llt;
}

inline double log_det_from_llt(const Eigen::LLT<Mat>& llt) {
  double log_det = 0.0;
  const auto& l = llt.matrixLLT();
  for (int i = 0; i < l.rows(); ++i) log_det += 2.0 * std::log(l(i, i));
  return log_det;
}

}  // namespace detail

inline double gaussian_log_density(const Vec& x, const Vec& mean, const Mat& cov) {
  if (x.size() != mean.size() || cov.rows() != x.size() || cov.cols() != x.size())
    throw std::invalid_argument("gaussian_log_density: dimension mismatch");
  const auto llt = detail::spd_cholesky(cov, "gaussian_log_density");
  const Vec y = llt.matrixL().solve(x - mean);
  return -0.5 * (x.size() * kLog2Pi + detail::log_det_from_llt(llt) + y.squaredNorm());
}

// Draws n samples, one per row, via the Cholesky factor.
inline Mat gaussian_sample(const Vec& mean, const Mat& cov, RngStream& rng, int n) {
  const auto llt = detail::spd_cholesky(cov, "gaussian_sample");
  const Mat l = llt.matrixL();
  Mat out(n, mean.size());
  for (int i = 0; i < n; ++i)
    out.row(i) = (mean + l * rng.normal_vec(static_cast<int>(mean.size()))).transpose();
  return out;
}

// KL(q || p) for Gaussians. p must be strictly positive definite; a singular q
// is rejected rather than mapped to +inf.
inline double kl_gaussian(const GaussianMoments& q, const GaussianMoments& p) {
  if (q.dim() != p.dim()) throw std::invalid_argument("kl_gaussian: dimension mismatch");
  const int d = q.dim();
  const auto llt_p = detail::spd_cholesky(p.cov, "kl_gaussian (p)");
  const auto llt_q = detail::spd_cholesky(q.cov, "kl_gaussian (q)");
  const Mat p_inv_q = llt_p.solve(q.cov);
  const Vec dm = p.mean - q.mean;
  const double maha = dm.dot(llt_p.solve(dm));
  const double log_det_ratio = detail::log_det_from_llt(llt_p) - detail::log_det_from_llt(llt_q);
  return 0.5 * (p_inv_q.trace() + maha - d + log_det_ratio);
}

// Differential entropy (D/2) ln(2*pi*e) + (1/2) ln det(cov), natural log.
inline double entropy_gaussian(const GaussianMoments& q) {
  const auto llt = detail::spd_cholesky(q.cov, "entropy_gaussian");
  return 0.5 * q.dim() * (kLog2Pi + 1.0) + 0.5 * detail::log_det_from_llt(llt);
}

// log sum_i exp(v_i), stabilized.
inline double log_sum_exp(const Vec& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (int i = 0; i < v.size(); ++i) acc += std::exp(v[i] - m);
  return m + std::log(acc);
}

}  // namespace sdlab
