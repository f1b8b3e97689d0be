// Copyright (c) 2026 sdlab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "sdlab/generator.hpp"
#include "sdlab/schedule.hpp"
#include "sdlab/target.hpp"

namespace sdlab {

// Closed-form objectives for the linear generator / Gaussian target pair.
// These are the ground truth the stochastic distillation rules are tested
// against. Time integrals run over a fixed deterministic grid so that
// finite-difference checks are free of Monte Carlo noise.

inline std::vector<double> t_grid(const DiffusionSchedule& sched, int n = 64) {
  std::vector<double> ts(n);
  const double span = sched.t_max() - sched.t_min();
  for (int i = 0; i < n; ++i) ts[i] = sched.t_min() + (i + 0.5) * span / n;
  return ts;
}

namespace detail {

struct PerT {
  double alpha, sigma, omega, big_omega;
  Mat sp;          // alpha^2 Sigma* + sigma^2 I
  Eigen::LLT<Mat> sp_llt;
};

inline PerT per_t(const GaussianTarget& target, double t, const DiffusionSchedule& sched) {
  PerT p;
  p.alpha = sched.alpha(t);
  p.sigma = sched.sigma(t);
  const auto w = sched.weight(t);
  p.omega = w.omega;
  p.big_omega = w.big_omega;
  p.sp = p.alpha * p.alpha * target.sigma +
         p.sigma * p.sigma * Mat::Identity(target.dim(), target.dim());
  p.sp_llt = spd_cholesky(p.sp, "objective");
  return p;
}

}  // namespace detail

// J_MLE: -E_{t,c}[ Omega(t) E_{x ~ q_t(.|c)} log p_t(x|y) ], evaluated in
// closed form per t (Gaussian cross-entropy) and averaged over the grid.
inline double j_mle(const LinearGaussianGenerator& gen, const GaussianTarget& target,
                    const DiffusionSchedule& sched, const std::vector<double>& ts) {
  if (gen.dim() != target.dim()) throw std::invalid_argument("j_mle: dimension mismatch");
  const int d = gen.dim();
  double acc = 0.0;
  for (double t : ts) {
    const auto p = detail::per_t(target, t, sched);
    const Vec db = gen.b - target.mu;
    const double maha = db.dot(p.sp_llt.solve(db));
    const Mat sp_inv_a = p.sp_llt.solve(gen.A);
    const double cross =
        d * kLog2Pi + detail::log_det_from_llt(p.sp_llt) +
        p.sigma * p.sigma * p.sp_llt.solve(Mat::Identity(d, d)).trace() +
        p.alpha * p.alpha * (maha + (gen.A.transpose() * sp_inv_a).trace());
    acc += p.big_omega * 0.5 * cross;
  }
  return acc / static_cast<double>(ts.size());
}

// E_t[ Omega(t) H[q_t(.|y)] ] for the linear generator's Gaussian marginal.
inline double marginal_entropy_term(const LinearGaussianGenerator& gen,
                                    const DiffusionSchedule& sched,
                                    const std::vector<double>& ts) {
  const int d = gen.dim();
  double acc = 0.0;
  for (double t : ts) {
    const double a = sched.alpha(t);
    const double s = sched.sigma(t);
    const Mat q = a * a * (gen.A * gen.A.transpose()) + s * s * Mat::Identity(d, d);
    acc += sched.weight(t).big_omega * entropy_gaussian({Vec::Zero(d), q});
  }
  return acc / static_cast<double>(ts.size());
}

// J_Ent(theta, lambda) = J_MLE - lambda E_t[ Omega H[q_t(.|y)] ].
inline double j_ent(const LinearGaussianGenerator& gen, const GaussianTarget& target,
                    double lambda, const DiffusionSchedule& sched,
                    const std::vector<double>& ts) {
  return j_mle(gen, target, sched, ts) - lambda * marginal_entropy_term(gen, sched, ts);
}

// E_{t,c}[ Omega KL(q_t(.|c) || p_t) ]: the conditional KL objective. Differs
// from j_mle by a theta-independent constant.
inline double j_kl_conditional(const LinearGaussianGenerator& gen, const GaussianTarget& target,
                               const DiffusionSchedule& sched, const std::vector<double>& ts) {
  const int d = gen.dim();
  double acc = 0.0;
  for (double t : ts) {
    const auto p = detail::per_t(target, t, sched);
    const double s2 = p.sigma * p.sigma;
    const Vec db = gen.b - target.mu;
    const double maha = db.dot(p.sp_llt.solve(db));
    const Mat sp_inv_a = p.sp_llt.solve(gen.A);
    const double kl =
        0.5 * (s2 * p.sp_llt.solve(Mat::Identity(d, d)).trace() +
               p.alpha * p.alpha * (maha + (gen.A.transpose() * sp_inv_a).trace()) - d +
               detail::log_det_from_llt(p.sp_llt) - d * std::log(s2));
    acc += p.big_omega * kl;
  }
  return acc / static_cast<double>(ts.size());
}

// E_t[ Omega KL(q_t(.|y) || p_t) ]: the camera-marginal KL objective.
inline double j_kl_marginal(const LinearGaussianGenerator& gen, const GaussianTarget& target,
                            const DiffusionSchedule& sched, const std::vector<double>& ts) {
  const int d = gen.dim();
  double acc = 0.0;
  for (double t : ts) {
    const auto p = detail::per_t(target, t, sched);
    const Mat q = p.alpha * p.alpha * (gen.A * gen.A.transpose()) +
                  p.sigma * p.sigma * Mat::Identity(d, d);
    acc += p.big_omega * kl_gaussian({p.alpha * gen.b, q}, {p.alpha * target.mu, p.sp});
  }
  return acc / static_cast<double>(ts.size());
}

// lambda-weighted KL combination from the entropy-regularized objective's
// decomposition; equals j_ent up to a theta-independent constant.
inline double kl_combination(const LinearGaussianGenerator& gen, const GaussianTarget& target,
                             double lambda, const DiffusionSchedule& sched,
                             const std::vector<double>& ts) {
  return lambda * j_kl_marginal(gen, target, sched, ts) +
         (1.0 - lambda) * j_kl_conditional(gen, target, sched, ts);
}

// Exact gradient of j_ent with respect to the flat parameters [b; A].
inline Vec grad_j_ent_analytic(const LinearGaussianGenerator& gen, const GaussianTarget& target,
                               double lambda, const DiffusionSchedule& sched,
                               const std::vector<double>& ts) {
  if (gen.dim() != target.dim())
    throw std::invalid_argument("grad_j_ent_analytic: dimension mismatch");
  const int d = gen.dim();
  const int k = gen.camera_dim();
  Vec grad_b = Vec::Zero(d);
  Mat grad_a = Mat::Zero(d, k);
  for (double t : ts) {
    const auto p = detail::per_t(target, t, sched);
    const double a2 = p.alpha * p.alpha;
    grad_b += p.big_omega * a2 * p.sp_llt.solve(gen.b - target.mu);
    grad_a += p.big_omega * a2 * p.sp_llt.solve(gen.A);
    if (lambda != 0.0) {
      const Mat q = a2 * (gen.A * gen.A.transpose()) +
                    p.sigma * p.sigma * Mat::Identity(d, d);
      grad_a -= lambda * p.big_omega * a2 *
                detail::spd_cholesky(q, "grad_j_ent_analytic").solve(gen.A);
    }
  }
  Vec out(d + d * k);
  out.head(d) = grad_b / static_cast<double>(ts.size());
  int at = d;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < k; ++j) out[at++] = grad_a(i, j) / static_cast<double>(ts.size());
  return out;
}

// Central-difference gradient, component by component.
inline Vec finite_diff(const std::function<double(const Vec&)>& f, const Vec& theta, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff: h must be positive");
  Vec grad(theta.size());
  Vec probe = theta;
  for (int i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + h;
    const double up = f(probe);
    probe[i] = theta[i] - h;
    const double down = f(probe);
    probe[i] = theta[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace sdlab
