// Copyright (c) 2026 sdlab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sdlab/distill.hpp"
#include "sdlab/io.hpp"
#include "sdlab/metrics.hpp"
#include "sdlab/objective.hpp"

namespace sdlab {

// Named identity suites behind the `verify` subcommand. Every statistical
// check runs on a fixed seed and reports the measured error against its
// tolerance; Monte Carlo comparisons use 3-standard-error bands.

struct CheckResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double tolerance = 0.0;
};

namespace verify_detail {

inline constexpr std::uint64_t kSeed = 716253;

inline DiffusionSchedule lab_schedule() { return DiffusionSchedule::standard(); }

inline GaussianTarget lab_target() {
  Vec mu(2);
  mu << 1.0, -1.0;
  Mat sigma = Mat::Zero(2, 2);
  sigma(0, 0) = 1.0;
  sigma(1, 1) = 0.25;
  return {mu, sigma};
}

inline LinearGaussianGenerator lab_generator() {
  Vec b(2);
  b << 0.4, -0.2;
  Mat a(2, 2);
  a << 0.9, 0.1, 0.2, 0.6;
  return {b, a};
}

inline DiscreteViewGenerator two_view_generator() {
  Mat views(2, 1);
  views << -1.0, 1.0;
  return {views};
}

inline GaussianTarget scalar_target() {
  Vec mu(1);
  mu << 0.3;
  Mat sigma(1, 1);
  sigma << 0.6;
  return {mu, sigma};
}

struct MeanSe {
  Vec mean;
  Vec se;
};

inline MeanSe mc_mean_se(const std::vector<Vec>& samples) {
  const int n = static_cast<int>(samples.size());
  Vec mean = Vec::Zero(samples.front().size());
  for (const auto& s : samples) mean += s;
  mean /= n;
  Vec var = Vec::Zero(mean.size());
  for (const auto& s : samples) var += (s - mean).cwiseAbs2();
  var /= n;
  return {mean, (var / n).cwiseSqrt()};
}

// max_j |a_j - b_j| / band_j, where band combines the supplied SEs; a check
// passes when this z-score stays below 3.
inline double max_z(const Vec& a, const Vec& b, const Vec& se_a, const Vec& se_b) {
  double worst = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    const double band = std::sqrt(se_a[i] * se_a[i] + se_b[i] * se_b[i]);
    worst = std::max(worst, std::abs(a[i] - b[i]) / (band > 0.0 ? band : 1e-300));
  }
  return worst;
}

inline bool bitwise_equal(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) return false;
  for (int i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

inline std::vector<Vec> mc_grads(Method method, double lambda, const Generator& gen,
                                 const Target& target, const DiffusionSchedule& sched, int n,
                                 std::uint64_t seed) {
  RunRngs rngs(seed);
  const auto src = oracle_sources(target, gen);
  std::vector<Vec> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i)
    out.push_back(distill_grad_from_sample(method, lambda, draw_render_sample(gen, sched, rngs),
                                           src, sched));
  return out;
}

}  // namespace verify_detail

// --- schedule -----------------------------------------------------------

inline std::vector<CheckResult> verify_schedule() {
  using namespace verify_detail;
  std::vector<CheckResult> out;
  const auto sched = lab_schedule();
  RngStream rng(kSeed, Stream::kVerify);

  double worst_identity = 0.0;
  bool monotone = true;
  double prev_t = 0.0, prev_a = sched.alpha(0.0), prev_s = sched.sigma(0.0);
  std::vector<double> ts;
  for (int i = 0; i < 1000; ++i) ts.push_back(rng.uniform(0.0, sched.horizon()));
  std::sort(ts.begin(), ts.end());
  for (double t : ts) {
    const double a = sched.alpha(t), s = sched.sigma(t);
    worst_identity = std::max(worst_identity, std::abs(a * a + s * s - 1.0));
    if (t > prev_t && !(a < prev_a && s > prev_s)) monotone = false;
    prev_t = t;
    prev_a = a;
    prev_s = s;
  }
  out.push_back({"variance-preserving identity", worst_identity <= 1e-12, worst_identity, 1e-12});
  out.push_back({"alpha decreasing / sigma increasing", monotone, monotone ? 0.0 : 1.0, 0.0});

  bool in_range = true;
  double min_sigma = 1e300;
  for (int i = 0; i < 10000; ++i) {
    const double t = sched.sample_t(rng);
    in_range = in_range && t >= sched.t_min() && t <= sched.t_max();
    min_sigma = std::min(min_sigma, sched.sigma(t));
  }
  out.push_back({"sample_t stays in [t_min, t_max] with sigma > 0", in_range && min_sigma > 0.0,
                 min_sigma, 0.0});
  return out;
}

// --- target -------------------------------------------------------------

inline std::vector<CheckResult> verify_target() {
  using namespace verify_detail;
  std::vector<CheckResult> out;
  const auto sched = lab_schedule();
  RngStream rng(kSeed + 1, Stream::kVerify);

  const Target gauss(lab_target());
  std::vector<GaussianTarget> comps;
  {
    Vec m1(2), m2(2);
    m1 << -1.5, 0.5;
    m2 << 2.0, 1.0;
    Mat s1 = 0.5 * Mat::Identity(2, 2);
    Mat s2 = Mat::Identity(2, 2);
    s2(0, 1) = s2(1, 0) = 0.3;
    comps.emplace_back(m1, s1);
    comps.emplace_back(m2, s2);
  }
  Vec w(2);
  w << 0.3, 0.7;
  const Target mix(MixtureTarget(w, comps));

  double worst_rel = 0.0;
  for (const Target* tgt : {&gauss, &mix}) {
    for (int i = 0; i < 100; ++i) {
      const double t = rng.uniform(sched.t_min(), sched.t_max());
      const Vec x = 2.0 * rng.normal_vec(2);
      const Vec score = tgt->score(x, t, sched);
      const Vec fd = finite_diff(
          [&](const Vec& p) { return tgt->log_density_t(p, t, sched); }, x, 1e-5);
      worst_rel = std::max(worst_rel, (fd - score).norm() / std::max(score.norm(), 1e-12));
    }
  }
  out.push_back(
      {"grad log_density_t matches score_p (100 points)", worst_rel < 1e-5, worst_rel, 1e-5});

  // First-order moment of the prior score over perturbed-target samples.
  constexpr int kN = 100000;
  RngStream srng(kSeed + 2, Stream::kVerify);
  std::vector<Vec> scores;
  scores.reserve(kN);
  for (int i = 0; i < kN; ++i) {
    const double t = srng.uniform(sched.t_min(), sched.t_max());
    const Vec x0 = gauss.sample(srng, 1).row(0).transpose();
    const Vec x_t = sched.alpha(t) * x0 + sched.sigma(t) * srng.normal_vec(2);
    scores.push_back(gauss.score(x_t, t, sched));
  }
  const auto ms = mc_mean_se(scores);
  const double norm = ms.mean.norm();
  const double band = 3.0 * ms.se.norm();
  out.push_back({"zero first-order moment of score_p", norm < band, norm, band});
  return out;
}

// --- generator ----------------------------------------------------------

inline std::vector<CheckResult> verify_generator() {
  using namespace verify_detail;
  std::vector<CheckResult> out;
  const auto sched = lab_schedule();
  RngStream rng(kSeed + 3, Stream::kVerify);

  // Jacobian against central differences of v . g(theta, c).
  double worst_rel = 0.0;
  for (int i = 0; i < 100; ++i) {
    Generator gen;
    Camera cam;
    if (i % 2 == 0) {
      gen = LinearGaussianGenerator{rng.normal_vec(2), Mat::Random(2, 2)};
      cam = Camera(rng.normal_vec(2));
    } else {
      DiscreteViewGenerator d{Mat(3, 2)};
      for (int r = 0; r < 3; ++r) d.views.row(r) = rng.normal_vec(2).transpose();
      gen = d;
      cam = Camera(rng.uniform_int(3));
    }
    const Vec v = rng.normal_vec(2);
    const Vec grad = jacobian_apply(gen, cam, v);
    Generator probe = gen;
    const Vec fd = finite_diff(
        [&](const Vec& theta) {
          set_params(probe, theta);
          return v.dot(render(probe, cam));
        },
        flatten(gen), 1e-5);
    worst_rel = std::max(worst_rel, (fd - grad).norm() / std::max(grad.norm(), 1e-12));
  }
  out.push_back({"render jacobian matches finite differences", worst_rel < 1e-5, worst_rel, 1e-5});

  // Marginal score equals the camera-average of conditional scores weighted by
  // conditional densities (self-normalized importance estimate), at random
  // (x, t) drawn from the marginal itself.
  for (const bool discrete : {false, true}) {
    Generator gen;
    if (discrete)
      gen = two_view_generator();
    else
      gen = lab_generator();
    const int d = dim(gen);
    constexpr int kN = 20000;
    double worst_z = 0.0;
    for (int pt = 0; pt < 100; ++pt) {
      const double t = rng.uniform(sched.t_min(), sched.t_max());
      const double a = sched.alpha(t), s = sched.sigma(t);
      const Vec x = a * render(gen, sample_camera(gen, rng)) + s * rng.normal_vec(d);
      const Vec marg = score_q_marginal(gen, x, t, sched);
      std::vector<double> logw(kN);
      std::vector<Vec> conds(kN);
      double max_logw = -1e300;
      for (int i = 0; i < kN; ++i) {
        const Camera c = sample_camera(gen, rng);
        logw[i] = -(x - a * render(gen, c)).squaredNorm() / (2.0 * s * s);
        conds[i] = score_q_conditional(gen, x, t, c, sched);
        max_logw = std::max(max_logw, logw[i]);
      }
      double wsum = 0.0;
      Vec est = Vec::Zero(d);
      for (int i = 0; i < kN; ++i) {
        const double wi = std::exp(logw[i] - max_logw);
        wsum += wi;
        est += wi * conds[i];
      }
      est /= wsum;
      Vec se = Vec::Zero(d);
      for (int i = 0; i < kN; ++i) {
        const double wi = std::exp(logw[i] - max_logw);
        se += (wi * (conds[i] - est)).cwiseAbs2();
      }
      se = se.cwiseSqrt() / wsum;
      worst_z = std::max(worst_z, max_z(est, marg, se, Vec::Zero(d)));
    }
    out.push_back({std::string("marginal score = weighted conditional average (") +
                       (discrete ? "discrete" : "linear") + ")",
                   worst_z < 3.0, worst_z, 3.0});
  }
  return out;
}

// --- zero-mean score lemma ------------------------------------------------

inline std::vector<CheckResult> verify_zero_mean_score() {
  using namespace verify_detail;
  std::vector<CheckResult> out;
  const auto sched = lab_schedule();
  const Generator gen = lab_generator();
  const Target target(lab_target());
  constexpr int kN = 100000;

  {
    RunRngs rngs(kSeed + 4);
    std::vector<Vec> scores;
    scores.reserve(kN);
    for (int i = 0; i < kN; ++i) {
      const RenderSample s = draw_render_sample(gen, sched, rngs);
      scores.push_back(score_q_conditional(gen, s.x_t, s.t, s.c, sched));
    }
    const auto ms = mc_mean_se(scores);
    const double band = 3.0 * ms.se.norm();
    out.push_back(
        {"E[score_q_conditional] = 0 over own samples", ms.mean.norm() < band, ms.mean.norm(), band});
  }
  {
    RngStream rng(kSeed + 5, Stream::kVerify);
    std::vector<Vec> scores;
    scores.reserve(kN);
    for (int i = 0; i < kN; ++i) {
      const double t = rng.uniform(sched.t_min(), sched.t_max());
      const Vec x0 = target.sample(rng, 1).row(0).transpose();
      const Vec x_t = sched.alpha(t) * x0 + sched.sigma(t) * rng.normal_vec(2);
      scores.push_back(target.score(x_t, t, sched));
    }
    const auto ms = mc_mean_se(scores);
    const double band = 3.0 * ms.se.norm();
    out.push_back(
        {"E[score_p] = 0 over perturbed-target samples", ms.mean.norm() < band, ms.mean.norm(), band});
  }
  return out;
}

// --- objective ------------------------------------------------------------

inline std::vector<CheckResult> verify_objective() {
  using namespace verify_detail;
  std::vector<CheckResult> out;
  const auto sched = lab_schedule();
  const auto target = lab_target();
  const auto ts = t_grid(sched);
  RngStream rng(kSeed + 6, Stream::kVerify);

  // KL nonnegativity, zero exactly at equality.
  double most_negative = 0.0, worst_equal = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int d = 1 + rng.uniform_int(3);
    auto random_moments = [&]() {
      Mat m = Mat::Identity(d, d);
      for (int r = 0; r < d; ++r)
        for (int c = 0; c <= r; ++c) m(r, c) = m(c, r) = rng.normal();
      GaussianMoments g{rng.normal_vec(d), m * m.transpose() + 0.1 * Mat::Identity(d, d)};
      return g;
    };
    const auto q = random_moments(), p = random_moments();
    most_negative = std::min(most_negative, kl_gaussian(q, p));
    worst_equal = std::max(worst_equal, std::abs(kl_gaussian(q, q)));
  }
  out.push_back({"kl_gaussian >= 0 on random pairs", most_negative >= 0.0, most_negative, 0.0});
  out.push_back({"kl_gaussian(q, q) = 0", worst_equal < 1e-12, worst_equal, 1e-12});

  auto random_gen = [&]() {
    return LinearGaussianGenerator{rng.normal_vec(2), Mat(2, 2).setZero() + Mat::Random(2, 2)};
  };

  // Theta-differences of j_ent equal theta-differences of the lambda-weighted
  // KL combination (the additive constant cancels).
  double worst_t1 = 0.0;
  for (int i = 0; i < 10; ++i) {
    const auto g1 = random_gen(), g2 = random_gen();
    for (double lambda : {0.0, 0.3, 0.5, 0.7, 1.0}) {
      const double lhs = j_ent(g1, target, lambda, sched, ts) - j_ent(g2, target, lambda, sched, ts);
      const double rhs = kl_combination(g1, target, lambda, sched, ts) -
                         kl_combination(g2, target, lambda, sched, ts);
      worst_t1 = std::max(worst_t1, std::abs(lhs - rhs));
    }
  }
  out.push_back({"j_ent differences equal KL-combination differences", worst_t1 < 1e-8, worst_t1,
                 1e-8});

  // j_mle differences equal conditional-KL differences.
  double worst_mle = 0.0;
  for (int i = 0; i < 10; ++i) {
    const auto g1 = random_gen(), g2 = random_gen();
    const double lhs = j_mle(g1, target, sched, ts) - j_mle(g2, target, sched, ts);
    const double rhs =
        j_kl_conditional(g1, target, sched, ts) - j_kl_conditional(g2, target, sched, ts);
    worst_mle = std::max(worst_mle, std::abs(lhs - rhs));
  }
  out.push_back(
      {"j_mle differences equal conditional-KL differences", worst_mle < 1e-8, worst_mle, 1e-8});

  // Analytic gradient against central finite differences.
  double worst_rel = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto g = random_gen();
    for (double lambda : {0.0, 0.5, 1.0}) {
      const Vec analytic = grad_j_ent_analytic(g, target, lambda, sched, ts);
      LinearGaussianGenerator probe = g;
      const Vec fd = finite_diff(
          [&](const Vec& theta) {
            Generator tmp = probe;
            set_params(tmp, theta);
            return j_ent(std::get<LinearGaussianGenerator>(tmp), target, lambda, sched, ts);
          },
          flatten(g), 1e-5);
      worst_rel = std::max(worst_rel, (fd - analytic).norm() / std::max(analytic.norm(), 1e-12));
    }
  }
  out.push_back({"grad_j_ent_analytic matches finite differences", worst_rel < 1e-5, worst_rel,
                 1e-5});

  // Monotone effect of lambda at fixed theta with positive entropy term.
  const auto g = lab_generator();
  const double ent = marginal_entropy_term(g, sched, ts);
  const double j0 = j_ent(g, target, 0.2, sched, ts);
  const double j1 = j_ent(g, target, 0.8, sched, ts);
  out.push_back({"larger lambda lowers j_ent when entropy term positive", ent > 0.0 && j1 < j0,
                 j1 - j0, 0.0});
  return out;
}

// --- score model ------------------------------------------------------------

inline std::vector<CheckResult> verify_score_model() {
  using namespace verify_detail;
  std::vector<CheckResult> out;
  const auto sched = lab_schedule();
  RngStream rng(kSeed + 7, Stream::kVerify);

  // Branch isolation under prediction and training.
  {
    AffineScoreModel m(2, 2, sched);
    const Vec x = rng.normal_vec(2);
    const Vec e = rng.normal_vec(2);
    const Vec null_before = m.predict_eps(x, 1.0, nullptr, sched);
    for (int f = 0; f < AffineScoreModel::kFeatureCount; ++f) {
      m.conditional().w_x[f].setRandom();
      m.conditional().w_c[f].setRandom();
      m.conditional().bias[f].setRandom();
    }
    const Vec null_after = m.predict_eps(x, 1.0, nullptr, sched);
    const bool iso_pred = bitwise_equal(null_before, null_after);
    const auto cond_snapshot = m.conditional();
    m.dsm_step(x, 1.0, e, nullptr, 0.01, sched);
    bool iso_train = true;
    for (int f = 0; f < AffineScoreModel::kFeatureCount; ++f)
      iso_train = iso_train && bitwise_equal(cond_snapshot.bias[f], m.conditional().bias[f]) &&
                  cond_snapshot.w_x[f] == m.conditional().w_x[f] &&
                  cond_snapshot.w_c[f] == m.conditional().w_c[f];
    out.push_back({"branch isolation (predict + dsm)", iso_pred && iso_train,
                   iso_pred && iso_train ? 0.0 : 1.0, 0.0});
  }

  // dsm gradient against finite differences of the quadratic loss.
  {
    double worst_rel = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      AffineScoreModel m(2, 2, sched);
      for (int f = 0; f < AffineScoreModel::kFeatureCount; ++f) {
        m.conditional().w_x[f] = 0.3 * Mat::Random(2, 2);
        m.conditional().w_c[f] = 0.3 * Mat::Random(2, 2);
        m.conditional().bias[f] = 0.3 * rng.normal_vec(2);
      }
      const Vec x = rng.normal_vec(2);
      const Vec e = rng.normal_vec(2);
      const Vec emb = rng.normal_vec(2);
      const double t = rng.uniform(sched.t_min(), sched.t_max());
      const double omega = sched.weight(t).omega;

      // analytic step with lr 1 recovers the gradient as (old - new)
      AffineScoreModel stepped = m;
      stepped.dsm_step(x, t, e, &emb, 1.0, sched);

      auto loss = [&](AffineScoreModel& model) {
        const Vec r = model.predict_eps(x, t, &emb, sched) - e;
        return omega * r.squaredNorm();
      };
      double max_rel = 0.0;
      constexpr double kH = 1e-6;
      for (int f = 0; f < AffineScoreModel::kFeatureCount; ++f) {
        for (int r = 0; r < 2; ++r) {
          for (int c = 0; c < 2; ++c) {
            AffineScoreModel up = m, down = m;
            up.conditional().w_x[f](r, c) += kH;
            down.conditional().w_x[f](r, c) -= kH;
            const double fd = (loss(up) - loss(down)) / (2.0 * kH);
            const double an = m.conditional().w_x[f](r, c) - stepped.conditional().w_x[f](r, c);
            max_rel = std::max(max_rel, std::abs(fd - an) / std::max(std::abs(fd), 1e-8));
          }
          AffineScoreModel up = m, down = m;
          up.conditional().bias[f][r] += kH;
          down.conditional().bias[f][r] -= kH;
          const double fd = (loss(up) - loss(down)) / (2.0 * kH);
          const double an = m.conditional().bias[f][r] - stepped.conditional().bias[f][r];
          max_rel = std::max(max_rel, std::abs(fd - an) / std::max(std::abs(fd), 1e-8));
        }
      }
      worst_rel = std::max(worst_rel, max_rel);
    }
    out.push_back({"dsm gradient matches finite differences", worst_rel < 1e-5, worst_rel, 1e-5});
  }

  // Convergence to the oracle scores with theta frozen.
  {
    const Generator gen = LinearGaussianGenerator{Vec::Zero(2), Mat::Identity(2, 2)};
    AffineScoreModel m(2, 2, sched);
    RunRngs rngs(kSeed + 8);
    for (int i = 0; i < 50000; ++i) {
      const RenderSample s = draw_render_sample(gen, sched, rngs);
      m.dsm_step(s, gen, /*use_null=*/false, 1e-2, sched);
      m.dsm_step(s, gen, /*use_null=*/true, 1e-2, sched);
    }
    RngStream eval(kSeed + 9, Stream::kVerify);
    double mse_cond = 0.0, mse_null = 0.0;
    constexpr int kEval = 1000;
    RunRngs eval_rngs(kSeed + 10);
    for (int i = 0; i < kEval; ++i) {
      const RenderSample s = draw_render_sample(gen, sched, eval_rngs);
      const Vec e = embed_camera(gen, s.c);
      const Vec learned_cond = score_from_eps(m.predict_eps(s.x_t, s.t, &e, sched), s.t, sched);
      const Vec learned_null = score_from_eps(m.predict_eps(s.x_t, s.t, nullptr, sched), s.t, sched);
      mse_cond += (learned_cond - score_q_conditional(gen, s.x_t, s.t, s.c, sched)).squaredNorm();
      mse_null += (learned_null - score_q_marginal(gen, s.x_t, s.t, sched)).squaredNorm();
    }
    mse_cond /= kEval * dim(gen);
    mse_null /= kEval * dim(gen);
    out.push_back({"conditional branch converges to oracle score", mse_cond < 5e-2, mse_cond, 5e-2});
    out.push_back({"null branch converges to marginal score", mse_null < 5e-2, mse_null, 5e-2});
    (void)eval;
  }
  return out;
}

// --- distillation reductions -------------------------------------------------

inline std::vector<CheckResult> verify_distill_reductions() {
  using namespace verify_detail;
  std::vector<CheckResult> out;
  const auto sched = lab_schedule();
  const Generator gen = lab_generator();
  const Target target(lab_target());
  const auto src = oracle_sources(target, gen);

  {
    bool equal1 = true;
    double worst_sds_vsd = 0.0;
    RunRngs rngs(kSeed + 11);
    for (int i = 0; i < 1000; ++i) {
      const RenderSample s = draw_render_sample(gen, sched, rngs);
      const Vec cfg1 = distill_grad_from_sample(Method::kEsdCfg, 1.0, s, src, sched);
      const Vec exact1 = distill_grad_from_sample(Method::kEsdExact, 1.0, s, src, sched);
      equal1 = equal1 && bitwise_equal(cfg1, exact1);
      const Vec sds = distill_grad_from_sample(Method::kSds, 0.0, s, src, sched);
      const Vec vsd = distill_grad_from_sample(Method::kVsd, 0.0, s, src, sched);
      worst_sds_vsd = std::max(worst_sds_vsd, (sds - vsd).cwiseAbs().maxCoeff());
    }
    out.push_back({"esd_cfg(lambda=1) bitwise equals esd_exact(lambda=1)", equal1,
                   equal1 ? 0.0 : 1.0, 0.0});
    out.push_back({"vsd with oracle conditional equals sds sample-wise", worst_sds_vsd < 1e-12,
                   worst_sds_vsd, 1e-12});
  }
  return out;
}

// lambda = 0 reductions, both per-sample and over whole learned trajectories.
inline std::vector<CheckResult> verify_lambda0_reduction() {
  using namespace verify_detail;
  std::vector<CheckResult> out;
  const auto sched = lab_schedule();
  const Generator gen = lab_generator();
  const Target target(lab_target());
  const auto src = oracle_sources(target, gen);

  bool equal = true;
  RunRngs rngs(kSeed + 12);
  for (int i = 0; i < 1000; ++i) {
    const RenderSample s = draw_render_sample(gen, sched, rngs);
    equal = equal && bitwise_equal(distill_grad_from_sample(Method::kEsdCfg, 0.0, s, src, sched),
                                   distill_grad_from_sample(Method::kVsd, 0.0, s, src, sched));
  }
  out.push_back({"esd_cfg(lambda=0) bitwise equals vsd_grad", equal, equal ? 0.0 : 1.0, 0.0});

  DistillConfig base;
  base.method = Method::kEsdCfg;
  base.lambda = 0.0;
  base.p_null = 0.0;
  base.steps = 300;
  base.warmup = 50;
  base.log_every = 50;
  base.seed = kSeed + 13;
  base.score_source = ScoreSource::kLearned;

  AffineScoreModel m1(2, 2, sched);
  const Trajectory t_cfg = run_distillation(base, target, gen, &m1, sched);
  DistillConfig vsd_cfg = base;
  vsd_cfg.method = Method::kVsd;
  AffineScoreModel m2(2, 2, sched);
  const Trajectory t_vsd = run_distillation(vsd_cfg, target, gen, &m2, sched);
  const bool traj_equal =
      serialize_trajectory_csv(t_cfg) == serialize_trajectory_csv(t_vsd);
  out.push_back({"learned esd_cfg(lambda=0, p_null=0) trajectory bitwise equals vsd", traj_equal,
                 traj_equal ? 0.0 : 1.0, 0.0});
  return out;
}

// --- expectation equivalences -----------------------------------------------

inline std::vector<CheckResult> verify_distill_expectation() {
  using namespace verify_detail;
  std::vector<CheckResult> out;
  const auto sched = lab_schedule();
  const auto lin = lab_generator();
  const Generator gen = lin;
  const Target target(lab_target());
  const auto dense = t_grid(sched, 4096);
  constexpr int kN = 100000;

  const Vec analytic0 = grad_j_ent_analytic(lin, lab_target(), 0.0, sched, dense);
  int idx = 0;
  for (Method m : {Method::kSds, Method::kVsd, Method::kEsdCfg}) {
    const auto grads = mc_grads(m, 0.0, gen, target, sched, kN, kSeed + 14 + idx++);
    const auto ms = mc_mean_se(grads);
    const double z = max_z(ms.mean, analytic0, ms.se, Vec::Zero(analytic0.size()));
    out.push_back({"E[" + to_string(m) + " at lambda=0] = analytic grad", z < 3.0, z, 3.0});
  }
  const Vec analytic_half = grad_j_ent_analytic(lin, lab_target(), 0.5, sched, dense);
  for (Method m : {Method::kEsdExact, Method::kEsdCfg}) {
    const auto grads = mc_grads(m, 0.5, gen, target, sched, kN, kSeed + 17 + idx++);
    const auto ms = mc_mean_se(grads);
    const double z = max_z(ms.mean, analytic_half, ms.se, Vec::Zero(analytic_half.size()));
    out.push_back({"E[" + to_string(m) + " at lambda=0.5] = analytic grad", z < 3.0, z, 3.0});
  }
  return out;
}

// --- CFG-trick identity -------------------------------------------------------

inline std::vector<CheckResult> verify_theorem1() {
  using namespace verify_detail;
  std::vector<CheckResult> out;
  const auto sched = lab_schedule();
  constexpr int kN = 100000;

  // Discrete two-view generator: exact marginal score, matched draws.
  {
    const Generator gen = two_view_generator();
    const Target target(scalar_target());
    double worst = 0.0;
    int i = 0;
    for (double lambda : {0.25, 0.5, 0.75}) {
      const auto a = mc_grads(Method::kEsdCfg, lambda, gen, target, sched, kN, kSeed + 20 + i);
      const auto b = mc_grads(Method::kEsdExact, lambda, gen, target, sched, kN, kSeed + 20 + i);
      const auto ma = mc_mean_se(a), mb = mc_mean_se(b);
      worst = std::max(worst, max_z(ma.mean, mb.mean, ma.se, mb.se));
      ++i;
    }
    out.push_back({"discrete: E[esd_cfg] = E[esd_exact] (lambda in {.25,.5,.75})", worst < 3.0,
                   worst, 3.0});
  }

  // Linear generator: both estimators against the closed-form gradient.
  {
    const auto lin = lab_generator();
    const Generator gen = lin;
    const Target target(lab_target());
    const auto dense = t_grid(sched, 4096);
    double worst = 0.0;
    int i = 0;
    for (double lambda : {0.25, 0.5, 0.75}) {
      const Vec analytic = grad_j_ent_analytic(lin, lab_target(), lambda, sched, dense);
      for (Method m : {Method::kEsdCfg, Method::kEsdExact}) {
        const auto grads = mc_grads(m, lambda, gen, target, sched, kN, kSeed + 30 + i++);
        const auto ms = mc_mean_se(grads);
        worst = std::max(worst, max_z(ms.mean, analytic, ms.se, Vec::Zero(analytic.size())));
      }
    }
    out.push_back({"linear: E[esd_cfg], E[esd_exact] = analytic grad", worst < 3.0, worst, 3.0});
  }
  return out;
}

// --- training loop -------------------------------------------------------------

inline std::vector<CheckResult> verify_run_loop() {
  using namespace verify_detail;
  std::vector<CheckResult> out;
  const auto sched = lab_schedule();
  const Target target(lab_target());
  const Generator gen =
      LinearGaussianGenerator{Vec::Zero(2), Mat::Identity(2, 2)};

  // Determinism: identical (config, seed, initial state) => identical bytes.
  DistillConfig cfg;
  cfg.method = Method::kEsdExact;
  cfg.lambda = 1.0;
  cfg.steps = 400;
  cfg.warmup = 100;
  cfg.seed = kSeed + 40;
  cfg.score_source = ScoreSource::kOracle;
  const auto t1 = run_distillation(cfg, target, gen, nullptr, sched);
  const auto t2 = run_distillation(cfg, target, gen, nullptr, sched);
  const bool det = serialize_trajectory_csv(t1) == serialize_trajectory_csv(t2);
  out.push_back({"identical seed gives byte-identical trajectory", det, det ? 0.0 : 1.0, 0.0});
  DistillConfig other = cfg;
  other.seed = kSeed + 41;
  const auto t3 = run_distillation(other, target, gen, nullptr, sched);
  const bool diff = serialize_trajectory_csv(t1) != serialize_trajectory_csv(t3);
  out.push_back({"different seed changes the trajectory", diff, diff ? 0.0 : 1.0, 0.0});

  // Warmup: replay the loop manually and confirm lr(step) = eta1 * step/warmup.
  {
    DistillConfig wcfg = cfg;
    wcfg.steps = 6;
    wcfg.warmup = 4;
    wcfg.log_every = 1;
    const auto traj = run_distillation(wcfg, target, gen, nullptr, sched);
    RunRngs rngs(wcfg.seed);
    Generator replay = gen;
    const auto src = oracle_sources(target, replay);
    Vec theta = flatten(replay);
    bool match = bitwise_equal(traj.points[0].theta, theta);
    for (int step = 0; step < wcfg.steps; ++step) {
      const double lr = step < wcfg.warmup ? wcfg.eta1 * step / wcfg.warmup : wcfg.eta1;
      const RenderSample s = draw_render_sample(replay, sched, rngs);
      theta -= lr * distill_grad_from_sample(wcfg.method, wcfg.lambda, s, src, sched);
      set_params(replay, theta);
      match = match && bitwise_equal(traj.points[static_cast<size_t>(step + 1)].theta, theta);
    }
    out.push_back({"linear warmup schedule applied exactly", match, match ? 0.0 : 1.0, 0.0});
  }

  // Collapse direction: analytic sign plus short SDS runs at b = mu*.
  {
    const auto target_g = lab_target();
    LinearGaussianGenerator at_mode{target_g.mu, 0.6 * Mat::Identity(2, 2)};
    const Vec grad =
        grad_j_ent_analytic(at_mode, target_g, 0.0, sched, t_grid(sched));
    double inner = 0.0;
    int at = 2;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) inner += grad[at++] * at_mode.A(i, j);
    bool shrinks = inner > 0.0;  // descent direction reduces trace(A A^T)

    int decreased = 0;
    for (int seed = 0; seed < 5; ++seed) {
      DistillConfig scfg;
      scfg.method = Method::kSds;
      scfg.steps = 400;
      scfg.warmup = 0;
      scfg.seed = kSeed + 50 + seed;
      const Trajectory traj = run_distillation(scfg, target, at_mode, nullptr, sched);
      LinearGaussianGenerator fin = at_mode;
      Generator tmp = fin;
      set_params(tmp, traj.final_theta);
      fin = std::get<LinearGaussianGenerator>(tmp);
      if ((fin.A * fin.A.transpose()).trace() < (at_mode.A * at_mode.A.transpose()).trace())
        ++decreased;
    }
    out.push_back({"sds shrinks trace(A A^T) at b = mu*", shrinks && decreased >= 4,
                   static_cast<double>(decreased), 4.0});
  }

  // p_null = 1 leaves the conditional branch untouched over a full run.
  {
    DistillConfig lcfg;
    lcfg.method = Method::kEsdCfg;
    lcfg.lambda = 0.5;
    lcfg.p_null = 1.0;
    lcfg.steps = 300;
    lcfg.warmup = 50;
    lcfg.seed = kSeed + 60;
    lcfg.score_source = ScoreSource::kLearned;
    AffineScoreModel model(2, 2, sched);
    run_distillation(lcfg, target, gen, &model, sched);
    bool cond_zero = true;
    bool null_changed = false;
    for (int f = 0; f < AffineScoreModel::kFeatureCount; ++f) {
      cond_zero = cond_zero && model.conditional().w_x[f].isZero(0.0) &&
                  model.conditional().w_c[f].isZero(0.0) && model.conditional().bias[f].isZero(0.0);
      null_changed = null_changed || !model.unconditional().w_x[f].isZero(0.0);
    }
    out.push_back({"p_null = 1 keeps conditional branch bitwise unchanged", cond_zero && null_changed,
                   cond_zero && null_changed ? 0.0 : 1.0, 0.0});
  }
  return out;
}

// --- metrics ---------------------------------------------------------------

inline std::vector<CheckResult> verify_metrics() {
  using namespace verify_detail;
  std::vector<CheckResult> out;
  RngStream rng(kSeed + 70, Stream::kVerify);

  // Jensen: IV >= IQ on random generator/classifier/view-set draws.
  double worst_gap = -1e300;
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + rng.uniform_int(2);
    std::vector<GaussianTarget> comps;
    Vec w(k);
    for (int i = 0; i < k; ++i) {
      w[i] = 0.2 + rng.uniform();
      Mat m = 0.4 * Mat::Random(2, 2);
      comps.emplace_back(2.0 * rng.normal_vec(2), m * m.transpose() + 0.2 * Mat::Identity(2, 2));
    }
    w /= w.sum();
    const SyntheticClassifier clf(MixtureTarget(w, comps), 0.5 + rng.uniform());
    const Generator gen = LinearGaussianGenerator{rng.normal_vec(2), Mat::Random(2, 2)};
    const Mat post = view_posteriors(gen, clf, 1 + rng.uniform_int(40), rng);
    worst_gap = std::max(worst_gap, inception_quality_from(post) - inception_variety_from(post));
    double worst_norm = std::abs(post.row(0).sum() - 1.0);
    if (worst_norm > 1e-10) {
      out.push_back({"classifier posterior rows normalized", false, worst_norm, 1e-10});
      return out;
    }
  }
  out.push_back({"IV >= IQ - 1e-10 (Jensen) on random trials", worst_gap <= 1e-10, worst_gap, 1e-10});

  // Frechet distance: symmetry, nonnegativity, consistency in n.
  {
    double worst_asym = 0.0, most_negative = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const Mat a = gaussian_sample(rng.normal_vec(2), Mat::Identity(2, 2), rng, 500);
      const Mat b = gaussian_sample(rng.normal_vec(2), 2.0 * Mat::Identity(2, 2), rng, 500);
      const double ab = frechet_distance(a, b);
      worst_asym = std::max(worst_asym, std::abs(ab - frechet_distance(b, a)));
      most_negative = std::min(most_negative, ab);
    }
    out.push_back({"frechet_distance symmetric", worst_asym < 1e-9, worst_asym, 1e-9});
    out.push_back({"frechet_distance nonnegative", most_negative >= 0.0, most_negative, 0.0});

    const Vec mu = Vec::Zero(2);
    const Mat cov = Mat::Identity(2, 2);
    bool monotone = true;
    double prev_median = 1e300;
    for (int n : {200, 2000, 20000}) {
      std::vector<double> d;
      for (int s = 0; s < 5; ++s)
        d.push_back(frechet_distance(gaussian_sample(mu, cov, rng, n),
                                     gaussian_sample(mu, cov, rng, n)));
      std::sort(d.begin(), d.end());
      monotone = monotone && d[2] < prev_median;
      prev_median = d[2];
    }
    out.push_back({"frechet_distance median decreases with n", monotone, prev_median, 0.0});
  }
  return out;
}

inline const std::map<std::string, std::function<std::vector<CheckResult>()>>& verify_suites() {
  static const std::map<std::string, std::function<std::vector<CheckResult>()>> suites = {
      {"schedule", verify_schedule},
      {"target", verify_target},
      {"generator", verify_generator},
      {"zero-mean-score", verify_zero_mean_score},
      {"objective", verify_objective},
      {"score-model", verify_score_model},
      {"distill-reductions", verify_distill_reductions},
      {"lambda0-reduction", verify_lambda0_reduction},
      {"distill-expectation", verify_distill_expectation},
      {"theorem1", verify_theorem1},
      {"run-loop", verify_run_loop},
      {"metrics", verify_metrics},
  };
  return suites;
}

}  // namespace sdlab
