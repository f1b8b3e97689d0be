// Copyright (c) 2026 sdlab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdlab/generator.hpp"
#include "sdlab/objective.hpp"
#include "sdlab/schedule.hpp"
#include "sdlab/score_model.hpp"
#include "sdlab/target.hpp"

namespace sdlab {

enum class Method { kSds, kVsd, kEsdExact, kEsdCfg };
enum class ScoreSource { kOracle, kLearned };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::kSds: return "SDS";
    case Method::kVsd: return "VSD";
    case Method::kEsdExact: return "ESD_EXACT";
    case Method::kEsdCfg: return "ESD_CFG";
  }
  return "SDS";
}

inline Method method_from_string(const std::string& s) {
  if (s == "SDS") return Method::kSds;
  if (s == "VSD") return Method::kVsd;
  if (s == "ESD_EXACT") return Method::kEsdExact;
  if (s == "ESD_CFG") return Method::kEsdCfg;
  throw std::invalid_argument("unknown method '" + s + "' (SDS|VSD|ESD_EXACT|ESD_CFG)");
}

inline std::string to_string(ScoreSource s) {
  return s == ScoreSource::kOracle ? "oracle" : "learned";
}

inline ScoreSource score_source_from_string(const std::string& s) {
  if (s == "oracle") return ScoreSource::kOracle;
  if (s == "learned") return ScoreSource::kLearned;
  throw std::invalid_argument("unknown score source '" + s + "' (oracle|learned)");
}

struct DistillConfig {
  Method method = Method::kEsdCfg;
  double lambda = 0.5;
  double p_null = 0.5;
  double eta1 = 0.01;
  double eta2 = 0.01;
  int steps = 2000;
  int warmup = 100;
  std::uint64_t seed = 0;
  ScoreSource score_source = ScoreSource::kOracle;
  int log_every = 100;
  double init_scale = 1.0;
  bool use_adam = false;
  bool fit_marginal_directly = false;
  double divergence_guard = 1e6;

  void validate() const {
    if (lambda < 0.0 || lambda > 1.0)
      throw std::invalid_argument("distill.lambda must lie in [0, 1]");
    if (p_null < 0.0 || p_null > 1.0)
      throw std::invalid_argument("distill.p_null must lie in [0, 1]");
    if (steps < 1) throw std::invalid_argument("distill.steps must be >= 1");
    if (warmup < 0 || warmup > steps)
      throw std::invalid_argument("distill.warmup must satisfy 0 <= warmup <= steps");
    if (log_every < 1) throw std::invalid_argument("distill.log_every must be >= 1");
    if (!(eta1 > 0.0)) throw std::invalid_argument("distill.eta1 must be positive");
    if (!(eta2 > 0.0)) throw std::invalid_argument("distill.eta2 must be positive");
    if (init_scale < 0.0) throw std::invalid_argument("distill.init_scale must be >= 0");
    if (fit_marginal_directly &&
        (score_source != ScoreSource::kLearned || method != Method::kEsdExact))
      throw std::invalid_argument(
          "distill.fit_marginal_directly requires method = ESD_EXACT and score_source = learned");
  }
};

// One independent counter-based stream per random-variable consumer, all
// derived from the master seed. Methods that consume different quantities of
// one stream stay aligned on all the others, which is what makes the
// "same seed => bitwise equal at lambda = 0" reductions testable.
struct RunRngs {
  RngStream camera;
  RngStream timestep;
  RngStream noise;
  RngStream null_coin;

  explicit RunRngs(std::uint64_t seed)
      : camera(seed, Stream::kCamera),
        timestep(seed, Stream::kTimestep),
        noise(seed, Stream::kNoise),
        null_coin(seed, Stream::kNullCoin) {}
};

// Where the q-scores in the update rules come from: exact closed forms or the
// learned estimator's branches. The prior score is always the target oracle.
struct ScoreSources {
  const Target* target = nullptr;
  const Generator* generator = nullptr;
  const AffineScoreModel* model = nullptr;
  ScoreSource source = ScoreSource::kOracle;

  Vec eps_prior(const Vec& x_t, double t, const DiffusionSchedule& sched) const {
    return -sched.sigma(t) * target->score(x_t, t, sched);
  }

  Vec eps_conditional(const Vec& x_t, double t, const Camera& c,
                      const DiffusionSchedule& sched) const {
    if (source == ScoreSource::kOracle)
      return -sched.sigma(t) * score_q_conditional(*generator, x_t, t, c, sched);
    const Vec e = embed_camera(*generator, c);
    return model->predict_eps(x_t, t, &e, sched);
  }

  Vec eps_marginal(const Vec& x_t, double t, const DiffusionSchedule& sched) const {
    if (source == ScoreSource::kOracle)
      return -sched.sigma(t) * score_q_marginal(*generator, x_t, t, sched);
    return model->predict_eps(x_t, t, nullptr, sched);
  }
};

inline ScoreSources oracle_sources(const Target& target, const Generator& gen) {
  return {&target, &gen, nullptr, ScoreSource::kOracle};
}

inline RenderSample draw_render_sample(const Generator& gen, const DiffusionSchedule& sched,
                                       RunRngs& rngs) {
  const Camera c = sample_camera(gen, rngs.camera);
  const double t = sched.sample_t(rngs.timestep);
  const Vec eps = rngs.noise.normal_vec(dim(gen));
  return make_render_sample(gen, c, t, eps, sched);
}

// Noise-residual form of the update rules. All four return the single-sample
// gradient estimate of the corresponding objective; descend on it.
//   SDS:       omega J^T (eps_prior - eps)
//   VSD:       omega J^T (eps_prior - eps_cond)
//   ESD exact: omega J^T (eps_prior - lambda eps_marg)
//   ESD CFG:   omega J^T (eps_prior - lambda eps_marg - (1-lambda) eps_cond)
// With the oracle conditional score, eps_cond equals the drawn eps and VSD
// coincides with SDS sample by sample.
inline Vec distill_grad_from_sample(Method method, double lambda, const RenderSample& s,
                                    const ScoreSources& src, const DiffusionSchedule& sched) {
  const double omega = sched.weight(s.t).omega;
  Vec resid;
  switch (method) {
    case Method::kSds:
      resid = src.eps_prior(s.x_t, s.t, sched) - s.eps;
      break;
    case Method::kVsd:
      resid = src.eps_prior(s.x_t, s.t, sched) - src.eps_conditional(s.x_t, s.t, s.c, sched);
      break;
    case Method::kEsdExact:
      resid = src.eps_prior(s.x_t, s.t, sched) - lambda * src.eps_marginal(s.x_t, s.t, sched);
      break;
    case Method::kEsdCfg:
      resid = src.eps_prior(s.x_t, s.t, sched) - lambda * src.eps_marginal(s.x_t, s.t, sched) -
              (1.0 - lambda) * src.eps_conditional(s.x_t, s.t, s.c, sched);
      break;
  }
  return omega * jacobian_apply(*src.generator, s.c, resid);
}

inline Vec sds_grad(const Generator& gen, const Target& target, const DiffusionSchedule& sched,
                    RunRngs& rngs) {
  const auto src = oracle_sources(target, gen);
  return distill_grad_from_sample(Method::kSds, 0.0, draw_render_sample(gen, sched, rngs), src,
                                  sched);
}

inline Vec vsd_grad(const Generator& gen, const Target& target, const DiffusionSchedule& sched,
                    const ScoreSources& src, RunRngs& rngs) {
  return distill_grad_from_sample(Method::kVsd, 0.0, draw_render_sample(gen, sched, rngs), src,
                                  sched);
}

inline Vec esd_exact_grad(const Generator& gen, const Target& target,
                          const DiffusionSchedule& sched, double lambda,
                          const ScoreSources& src, RunRngs& rngs) {
  return distill_grad_from_sample(Method::kEsdExact, lambda,
                                  draw_render_sample(gen, sched, rngs), src, sched);
}

inline Vec esd_cfg_grad(const Generator& gen, const Target& target,
                        const DiffusionSchedule& sched, double lambda, const ScoreSources& src,
                        RunRngs& rngs) {
  return distill_grad_from_sample(Method::kEsdCfg, lambda, draw_render_sample(gen, sched, rngs),
                                  src, sched);
}

struct TrajectoryPoint {
  int step;
  Vec theta;
  double grad_norm;
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
  Vec final_theta;
  bool diverged = false;
  int diverged_step = -1;
};

// Default initialization policy: linear b = 0, A = init_scale * I; discrete
// rows i.i.d. standard normal scaled by init_scale.
inline Generator make_initial_generator(const std::string& kind, int d, int cam_dim_or_views,
                                        double init_scale, RngStream& init_rng) {
  if (kind == "linear") {
    LinearGaussianGenerator lin{Vec::Zero(d), Mat::Zero(d, cam_dim_or_views)};
    for (int i = 0; i < std::min(d, cam_dim_or_views); ++i) lin.A(i, i) = init_scale;
    return lin;
  }
  if (kind == "discrete") {
    DiscreteViewGenerator disc{Mat(cam_dim_or_views, d)};
    for (int i = 0; i < disc.views.rows(); ++i)
      disc.views.row(i) = (init_scale * init_rng.normal_vec(d)).transpose();
    return disc;
  }
  throw std::invalid_argument("unknown generator kind '" + kind + "' (linear|discrete)");
}

// The full training loop: per step, draw (c, t, eps), form x_t, step theta
// along the configured rule with linear learning-rate warmup, then (for
// learned scores) take one denoising-score-matching step on the conditional
// branch with probability 1 - p_null, else on the null branch. Theta is
// updated before psi within a step, on the same draw.
inline Trajectory run_distillation(const DistillConfig& cfg, const Target& target, Generator gen,
                                   AffineScoreModel* model, const DiffusionSchedule& sched) {
  cfg.validate();
  const bool learned = cfg.score_source == ScoreSource::kLearned;
  if (learned && model == nullptr)
    throw std::invalid_argument("run: learned score source requires a score model");
  if (!learned && model != nullptr)
    throw std::invalid_argument("run: score model supplied but score_source is oracle");

  RunRngs rngs(cfg.seed);
  ScoreSources src{&target, &gen, model, cfg.score_source};

  Vec theta = flatten(gen);
  Vec adam_m = Vec::Zero(theta.size());
  Vec adam_v = Vec::Zero(theta.size());
  constexpr double kAdamBeta1 = 0.9, kAdamBeta2 = 0.999, kAdamEps = 1e-8;

  Trajectory traj;
  traj.points.push_back({0, theta, 0.0});
  double grad_norm = 0.0;

  for (int step = 0; step < cfg.steps; ++step) {
    const double lr =
        cfg.warmup > 0 && step < cfg.warmup ? cfg.eta1 * step / cfg.warmup : cfg.eta1;

    const RenderSample s = draw_render_sample(gen, sched, rngs);
    const Vec grad = distill_grad_from_sample(cfg.method, cfg.lambda, s, src, sched);
    grad_norm = grad.norm();

    if (cfg.use_adam) {
      adam_m = kAdamBeta1 * adam_m + (1.0 - kAdamBeta1) * grad;
      adam_v = kAdamBeta2 * adam_v + (1.0 - kAdamBeta2) * grad.cwiseProduct(grad).eval();
      const double bc1 = 1.0 - std::pow(kAdamBeta1, step + 1);
      const double bc2 = 1.0 - std::pow(kAdamBeta2, step + 1);
      theta -= lr * (adam_m / bc1)
                   .cwiseQuotient(((adam_v / bc2).cwiseSqrt().array() + kAdamEps).matrix());
    } else {
      theta -= lr * grad;
    }
    set_params(gen, theta);

    if (theta.norm() > cfg.divergence_guard) {
      traj.points.push_back({step + 1, theta, grad_norm});
      traj.diverged = true;
      traj.diverged_step = step + 1;
      break;
    }

    if (learned) {
      if (cfg.fit_marginal_directly) {
        model->dsm_step(s, gen, /*use_null=*/true, cfg.eta2, sched);
      } else {
        const bool train_cond = rngs.null_coin.uniform() < 1.0 - cfg.p_null;
        model->dsm_step(s, gen, /*use_null=*/!train_cond, cfg.eta2, sched);
      }
    }

    if (!traj.diverged && step + 1 < cfg.steps && (step + 1) % cfg.log_every == 0)
      traj.points.push_back({step + 1, theta, grad_norm});
  }

  if (!traj.diverged) traj.points.push_back({cfg.steps, theta, grad_norm});
  traj.final_theta = theta;
  return traj;
}

}  // namespace sdlab
