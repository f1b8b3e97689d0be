// Copyright (c) 2026 sdlab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "sdlab/rng.hpp"

namespace sdlab {

enum class WeightKind { kUnit, kSigma, kSigmaSquared };

inline std::string to_string(WeightKind w) {
  switch (w) {
    case WeightKind::kUnit: return "unit";
    case WeightKind::kSigma: return "sigma";
    case WeightKind::kSigmaSquared: return "sigma_squared";
  }
  return "unit";
}

inline WeightKind weight_kind_from_string(const std::string& s) {
  if (s == "unit") return WeightKind::kUnit;
  if (s == "sigma") return WeightKind::kSigma;
  if (s == "sigma_squared") return WeightKind::kSigmaSquared;
  throw std::invalid_argument("unknown weight kind '" + s + "' (unit|sigma|sigma_squared)");
}

// Continuous variance-preserving forward process with
//   alpha_t = exp(-t),  sigma_t = sqrt(1 - exp(-2 t)),
// so alpha_t^2 + sigma_t^2 = 1 on the whole horizon. Timesteps are sampled
// uniformly from [t_min, t_max]; t_min > 0 keeps sigma_t bounded away from
// zero wherever conditional scores are evaluated.
class DiffusionSchedule {
 public:
  DiffusionSchedule(double horizon, double t_min, double t_max,
                    WeightKind weight = WeightKind::kUnit)
      : horizon_(horizon), t_min_(t_min), t_max_(t_max), weight_(weight) {
    if (!(horizon > 0.0)) throw std::invalid_argument("schedule horizon must be positive");
    if (!(t_min > 0.0 && t_min <= t_max && t_max <= horizon))
      throw std::invalid_argument("schedule requires 0 < t_min <= t_max <= T");
  }

  static DiffusionSchedule standard() { return DiffusionSchedule(3.0, 0.05, 3.0); }

  double alpha(double t) const {
    check_domain(t);
    return std::exp(-t);
  }

  double sigma(double t) const {
    check_domain(t);
    return std::sqrt(1.0 - std::exp(-2.0 * t));
  }

  struct Weights {
    double omega;      // multiplies update rules
    double big_omega;  // omega * sigma / alpha, multiplies objectives
  };

  Weights weight(double t) const {
    if (t < t_min_ || t > t_max_)
      throw std::domain_error("weight(t) requires t_min <= t <= t_max");
    const double a = alpha(t);
    const double s = sigma(t);
    double omega = 1.0;
    if (weight_ == WeightKind::kSigma) omega = s;
    if (weight_ == WeightKind::kSigmaSquared) omega = s * s;
    return {omega, omega * s / a};
  }

  double sample_t(RngStream& rng) const { return t_min_ + rng.uniform() * (t_max_ - t_min_); }

  double horizon() const { return horizon_; }
  double t_min() const { return t_min_; }
  double t_max() const { return t_max_; }
  WeightKind weight_kind() const { return weight_; }

 private:
  void check_domain(double t) const {
    if (t < 0.0 || t > horizon_)
      throw std::domain_error("t outside schedule domain [0, T]");
  }

  double horizon_;
  double t_min_;
  double t_max_;
  WeightKind weight_;
};

}  // namespace sdlab
