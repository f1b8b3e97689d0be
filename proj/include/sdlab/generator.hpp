// Copyright (c) 2026 sdlab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "sdlab/gaussian.hpp"
#include "sdlab/schedule.hpp"

namespace sdlab {

// Analog of the 3D representation plus renderer: a parametric generator with a
// camera prior, an exact render Jacobian, and closed-form conditional and
// marginal scores for the diffused rendered-image distribution.

// g(theta, c) = b + A c with c ~ N(0, I_k). The time-t conditional render
// distribution is N(alpha (b + A c), sigma^2 I); the marginal is
// N(alpha b, alpha^2 A A^T + sigma^2 I).
struct LinearGaussianGenerator {
  Vec b;  // D
  Mat A;  // D x k

  int dim() const { return static_cast<int>(b.size()); }
  int camera_dim() const { return static_cast<int>(A.cols()); }
};

// g(theta, c) = views.row(c) with c ~ U{0..K-1}. The time-t marginal is the
// equal-weight mixture of N(alpha views.row(c), sigma^2 I), which keeps the
// marginal score exactly computable for a multi-modal render distribution.
struct DiscreteViewGenerator {
  Mat views;  // K x D

  int dim() const { return static_cast<int>(views.cols()); }
  int view_count() const { return static_cast<int>(views.rows()); }
};

using Generator = std::variant<LinearGaussianGenerator, DiscreteViewGenerator>;
using Camera = std::variant<Vec, int>;

inline int dim(const Generator& g) {
  return std::visit([](const auto& v) { return v.dim(); }, g);
}

inline int param_count(const Generator& g) {
  if (const auto* lin = std::get_if<LinearGaussianGenerator>(&g))
    return lin->dim() + lin->dim() * lin->camera_dim();
  const auto& d = std::get<DiscreteViewGenerator>(g);
  return d.view_count() * d.dim();
}

// Flat parameter layout: linear -> [b; A row-major], discrete -> views row-major.
inline Vec flatten(const Generator& g) {
  Vec out(param_count(g));
  if (const auto* lin = std::get_if<LinearGaussianGenerator>(&g)) {
    out.head(lin->dim()) = lin->b;
    int at = lin->dim();
    for (int i = 0; i < lin->A.rows(); ++i)
      for (int j = 0; j < lin->A.cols(); ++j) out[at++] = lin->A(i, j);
    return out;
  }
  const auto& d = std::get<DiscreteViewGenerator>(g);
  int at = 0;
  for (int i = 0; i < d.views.rows(); ++i)
    for (int j = 0; j < d.views.cols(); ++j) out[at++] = d.views(i, j);
  return out;
}

inline void set_params(Generator& g, const Vec& theta) {
  if (theta.size() != param_count(g))
    throw std::invalid_argument("set_params: parameter size mismatch");
  if (auto* lin = std::get_if<LinearGaussianGenerator>(&g)) {
    lin->b = theta.head(lin->dim());
    int at = lin->dim();
    for (int i = 0; i < lin->A.rows(); ++i)
      for (int j = 0; j < lin->A.cols(); ++j) lin->A(i, j) = theta[at++];
    return;
  }
  auto& d = std::get<DiscreteViewGenerator>(g);
  int at = 0;
  for (int i = 0; i < d.views.rows(); ++i)
    for (int j = 0; j < d.views.cols(); ++j) d.views(i, j) = theta[at++];
}

inline Camera sample_camera(const Generator& g, RngStream& rng) {
  if (const auto* lin = std::get_if<LinearGaussianGenerator>(&g))
    return Camera(rng.normal_vec(lin->camera_dim()));
  return Camera(rng.uniform_int(std::get<DiscreteViewGenerator>(g).view_count()));
}

// Deterministic render; no noise enters g.
inline Vec render(const Generator& g, const Camera& c) {
  if (const auto* lin = std::get_if<LinearGaussianGenerator>(&g)) {
    const Vec* cv = std::get_if<Vec>(&c);
    if (cv == nullptr || cv->size() != lin->camera_dim())
      throw std::invalid_argument("render: camera dimension mismatch");
    return lin->b + lin->A * (*cv);
  }
  const auto& d = std::get<DiscreteViewGenerator>(g);
  const int* idx = std::get_if<int>(&c);
  if (idx == nullptr || *idx < 0 || *idx >= d.view_count())
    throw std::invalid_argument("render: camera index out of range");
  return d.views.row(*idx).transpose();
}

// (dg/dtheta)^T v mapped into the flat parameter layout.
// Linear: grad_b = v, grad_A = v c^T. Discrete: v lands in row c.
inline Vec jacobian_apply(const Generator& g, const Camera& c, const Vec& v) {
  if (v.size() != dim(g)) throw std::invalid_argument("jacobian_apply: dimension mismatch");
  Vec out = Vec::Zero(param_count(g));
  if (const auto* lin = std::get_if<LinearGaussianGenerator>(&g)) {
    const Vec& cv = std::get<Vec>(c);
    if (cv.size() != lin->camera_dim())
      throw std::invalid_argument("jacobian_apply: camera dimension mismatch");
    out.head(lin->dim()) = v;
    int at = lin->dim();
    for (int i = 0; i < lin->dim(); ++i)
      for (int j = 0; j < lin->camera_dim(); ++j) out[at++] = v[i] * cv[j];
    return out;
  }
  const auto& d = std::get<DiscreteViewGenerator>(g);
  const int idx = std::get<int>(c);
  if (idx < 0 || idx >= d.view_count())
    throw std::invalid_argument("jacobian_apply: camera index out of range");
  out.segment(idx * d.dim(), d.dim()) = v;
  return out;
}

// (alpha g(theta, c) - x) / sigma^2, valid for both families.
inline Vec score_q_conditional(const Generator& g, const Vec& x, double t, const Camera& c,
                               const DiffusionSchedule& sched) {
  const double s = sched.sigma(t);
  if (s == 0.0) throw std::domain_error("score_q_conditional: sigma_t = 0");
  return (sched.alpha(t) * render(g, c) - x) / (s * s);
}

// Exact score of the camera-marginalized render distribution at time t.
inline Vec score_q_marginal(const Generator& g, const Vec& x, double t,
                            const DiffusionSchedule& sched) {
  const double a = sched.alpha(t);
  const double s = sched.sigma(t);
  if (s == 0.0) throw std::domain_error("score_q_marginal: sigma_t = 0");
  if (const auto* lin = std::get_if<LinearGaussianGenerator>(&g)) {
    if (x.size() != lin->dim()) throw std::invalid_argument("score_q_marginal: dimension mismatch");
    const Mat cov = a * a * (lin->A * lin->A.transpose()) +
                    s * s * Mat::Identity(lin->dim(), lin->dim());
    return detail::spd_cholesky(cov, "score_q_marginal").solve(a * lin->b - x);
  }
  const auto& d = std::get<DiscreteViewGenerator>(g);
  if (x.size() != d.dim()) throw std::invalid_argument("score_q_marginal: dimension mismatch");
  // Equal-weight mixture with shared isotropic covariance: responsibilities
  // reduce to a softmax over -||x - alpha v_k||^2 / (2 sigma^2).
  const int k = d.view_count();
  Vec log_terms(k);
  for (int i = 0; i < k; ++i)
    log_terms[i] = -(x - a * d.views.row(i).transpose()).squaredNorm() / (2.0 * s * s);
  const double lse = log_sum_exp(log_terms);
  Vec out = Vec::Zero(d.dim());
  for (int i = 0; i < k; ++i)
    out += std::exp(log_terms[i] - lse) * (a * d.views.row(i).transpose() - x) / (s * s);
  return out;
}

// Exact parametric description of q_t(.|y): a single Gaussian for the linear
// family, a K-component equal-weight mixture for the discrete one.
struct MarginalDistribution {
  Vec weights;
  std::vector<GaussianMoments> components;
};

inline MarginalDistribution marginal_distribution(const Generator& g, double t,
                                                  const DiffusionSchedule& sched) {
  const double a = sched.alpha(t);
  const double s = sched.sigma(t);
  if (const auto* lin = std::get_if<LinearGaussianGenerator>(&g)) {
    const Mat cov = a * a * (lin->A * lin->A.transpose()) +
                    s * s * Mat::Identity(lin->dim(), lin->dim());
    return {Vec::Ones(1), {GaussianMoments{a * lin->b, cov}}};
  }
  const auto& d = std::get<DiscreteViewGenerator>(g);
  MarginalDistribution out;
  out.weights = Vec::Constant(d.view_count(), 1.0 / d.view_count());
  const Mat cov = s * s * Mat::Identity(d.dim(), d.dim());
  for (int i = 0; i < d.view_count(); ++i)
    out.components.push_back({a * d.views.row(i).transpose(), cov});
  return out;
}

// One draw of Algorithm-style training data: camera, clean render, timestep,
// noise, and the perturbed render x_t = alpha x0 + sigma eps.
struct RenderSample {
  Camera c;
  Vec x0;
  double t;
  Vec eps;
  Vec x_t;
};

inline RenderSample make_render_sample(const Generator& g, const Camera& c, double t,
                                       const Vec& eps, const DiffusionSchedule& sched) {
  RenderSample s;
  s.c = c;
  s.x0 = render(g, c);
  s.t = t;
  s.eps = eps;
  s.x_t = sched.alpha(t) * s.x0 + sched.sigma(t) * eps;
  return s;
}

}  // namespace sdlab
