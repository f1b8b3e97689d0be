// Copyright (c) 2026 sdlab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <stdexcept>
#include <variant>

#include <nlohmann/json.hpp>

#include "sdlab/generator.hpp"
#include "sdlab/schedule.hpp"

namespace sdlab {

// Sentinel for "no camera condition"; selects the unconditional branch.
struct NullToken {};
using Conditioning = std::variant<NullToken, Vec>;

inline Vec score_from_eps(const Vec& eps_hat, double t, const DiffusionSchedule& sched) {
  const double s = sched.sigma(t);
  if (s == 0.0) throw std::domain_error("score_from_eps: sigma_t = 0");
  return -eps_hat / s;
}

// Camera embedding fed to the conditional branch: the camera vector itself for
// the linear family, a one-hot row for the discrete one.
inline Vec embed_camera(const Generator& g, const Camera& c) {
  if (std::holds_alternative<LinearGaussianGenerator>(g)) return std::get<Vec>(c);
  const auto& d = std::get<DiscreteViewGenerator>(g);
  Vec e = Vec::Zero(d.view_count());
  e[std::get<int>(c)] = 1.0;
  return e;
}

// Noise estimator that is affine in (x, condition) with scalar time features,
// trained by denoising score matching. Internally the model produces
//   r(x, t, c) = sum_f phi_f(t) (W_x^f x + W_c^f c + u^f)
// and predicts eps_hat = r / sigma_t, so the implied score -eps_hat/sigma_t is
// sum_f phi_f (.) / sigma_t^2. With phi = (1, alpha, ...) this span contains
// the exact conditional score (alpha g - x) / sigma_t^2 of a fixed generator.
// The fourth feature alpha_t/sigma_t^2 is rescaled by its maximum over
// [t_min, t_max] so that plain SGD stays stable at small t.
class AffineScoreModel {
 public:
  static constexpr int kFeatureCount = 4;

  struct Branch {
    std::array<Mat, kFeatureCount> w_x;
    std::array<Mat, kFeatureCount> w_c;  // empty matrices on the null branch
    std::array<Vec, kFeatureCount> bias;
  };

  AffineScoreModel(int dim, int cond_dim, const DiffusionSchedule& sched)
      : dim_(dim), cond_dim_(cond_dim) {
    const double a = sched.alpha(sched.t_min());
    const double s = sched.sigma(sched.t_min());
    feature4_scale_ = a / (s * s);
    for (int f = 0; f < kFeatureCount; ++f) {
      conditional_.w_x[f] = Mat::Zero(dim, dim);
      conditional_.w_c[f] = Mat::Zero(dim, cond_dim);
      conditional_.bias[f] = Vec::Zero(dim);
      unconditional_.w_x[f] = Mat::Zero(dim, dim);
      unconditional_.w_c[f] = Mat(0, 0);
      unconditional_.bias[f] = Vec::Zero(dim);
    }
  }

  int dim() const { return dim_; }
  int cond_dim() const { return cond_dim_; }
  Branch& conditional() { return conditional_; }
  const Branch& conditional() const { return conditional_; }
  Branch& unconditional() { return unconditional_; }
  const Branch& unconditional() const { return unconditional_; }

  Vec time_features(double t, const DiffusionSchedule& sched) const {
    const double a = sched.alpha(t);
    const double s = sched.sigma(t);
    Vec phi(kFeatureCount);
    phi << 1.0, a, s, (a / (s * s)) / feature4_scale_;
    return phi;
  }

  // cond == nullptr selects the unconditional branch; the conditional branch
  // parameters are never read in that case (and vice versa).
  Vec predict_eps(const Vec& x_t, double t, const Vec* cond, const DiffusionSchedule& sched) const {
    if (x_t.size() != dim_) throw std::invalid_argument("predict_eps: dimension mismatch");
    if (cond != nullptr && cond->size() != cond_dim_)
      throw std::invalid_argument("predict_eps: condition dimension mismatch");
    const Branch& br = cond != nullptr ? conditional_ : unconditional_;
    const Vec phi = time_features(t, sched);
    Vec r = Vec::Zero(dim_);
    for (int f = 0; f < kFeatureCount; ++f) {
      r += phi[f] * (br.w_x[f] * x_t + br.bias[f]);
      if (cond != nullptr) r += phi[f] * (br.w_c[f] * (*cond));
    }
    return r / sched.sigma(t);
  }

  Vec predict_eps(const Vec& x_t, double t, const Conditioning& cond,
                  const DiffusionSchedule& sched) const {
    const Vec* c = std::get_if<Vec>(&cond);
    return predict_eps(x_t, t, c, sched);
  }

  // One SGD step on omega(t) ||eps_hat - eps||^2 for the selected branch only.
  // Returns the loss value before the step.
  double dsm_step(const Vec& x_t, double t, const Vec& eps, const Vec* cond, double eta2,
                  const DiffusionSchedule& sched) {
    const Vec phi = time_features(t, sched);
    const double inv_sigma = 1.0 / sched.sigma(t);
    const double omega = sched.weight(t).omega;
    const Vec resid = predict_eps(x_t, t, cond, sched) - eps;
    Branch& br = cond != nullptr ? conditional_ : unconditional_;
    const Vec grad_out = (2.0 * omega * inv_sigma) * resid;  // d loss / d r
    for (int f = 0; f < kFeatureCount; ++f) {
      const Vec gf = phi[f] * grad_out;
      br.w_x[f] -= eta2 * (gf * x_t.transpose());
      if (cond != nullptr) br.w_c[f] -= eta2 * (gf * cond->transpose());
      br.bias[f] -= eta2 * gf;
    }
    return omega * resid.squaredNorm();
  }

  double dsm_step(const RenderSample& sample, const Generator& g, bool use_null, double eta2,
                  const DiffusionSchedule& sched) {
    if (use_null) return dsm_step(sample.x_t, sample.t, sample.eps, nullptr, eta2, sched);
    const Vec e = embed_camera(g, sample.c);
    return dsm_step(sample.x_t, sample.t, sample.eps, &e, eta2, sched);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["dim"] = dim_;
    j["cond_dim"] = cond_dim_;
    j["feature4_scale"] = feature4_scale_;
    auto put = [&](const std::string& prefix, const Branch& br, bool with_cond) {
      for (int f = 0; f < kFeatureCount; ++f) {
        j[prefix + ".w_x." + std::to_string(f)] = mat_to_array(br.w_x[f]);
        if (with_cond) j[prefix + ".w_c." + std::to_string(f)] = mat_to_array(br.w_c[f]);
        j[prefix + ".u." + std::to_string(f)] =
            std::vector<double>(br.bias[f].data(), br.bias[f].data() + br.bias[f].size());
      }
    };
    put("cond", conditional_, true);
    put("null", unconditional_, false);
    return j;
  }

  static AffineScoreModel from_json(const nlohmann::json& j, const DiffusionSchedule& sched) {
    AffineScoreModel m(j.at("dim").get<int>(), j.at("cond_dim").get<int>(), sched);
    m.feature4_scale_ = j.at("feature4_scale").get<double>();
    auto get = [&](const std::string& prefix, Branch& br, bool with_cond, int cols_c) {
      for (int f = 0; f < kFeatureCount; ++f) {
        br.w_x[f] = mat_from_array(j.at(prefix + ".w_x." + std::to_string(f)), m.dim_, m.dim_);
        if (with_cond)
          br.w_c[f] = mat_from_array(j.at(prefix + ".w_c." + std::to_string(f)), m.dim_, cols_c);
        const auto u = j.at(prefix + ".u." + std::to_string(f)).get<std::vector<double>>();
        br.bias[f] = Eigen::Map<const Vec>(u.data(), static_cast<Eigen::Index>(u.size()));
      }
    };
    get("cond", m.conditional_, true, m.cond_dim_);
    get("null", m.unconditional_, false, 0);
    return m;
  }

 private:
  static std::vector<double> mat_to_array(const Mat& m) {
    std::vector<double> out;
    out.reserve(static_cast<size_t>(m.size()));
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
    return out;
  }

  static Mat mat_from_array(const nlohmann::json& j, int rows, int cols) {
    const auto v = j.get<std::vector<double>>();
    if (static_cast<int>(v.size()) != rows * cols)
      throw std::invalid_argument("score model state: array size mismatch");
    Mat m(rows, cols);
    int at = 0;
    for (int i = 0; i < rows; ++i)
      for (int jj = 0; jj < cols; ++jj) m(i, jj) = v[static_cast<size_t>(at++)];
    return m;
  }

  int dim_;
  int cond_dim_;
  double feature4_scale_;
  Branch conditional_;
  Branch unconditional_;
};

}  // namespace sdlab
