// Copyright (c) 2026 sdlab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Core>

namespace sdlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Stream ids, one per random-variable consumer. Streams derived from the same
// master seed are independent and advance independently, so two runs that
// consume different amounts of one stream still see identical draws on the
// others.
enum class Stream : std::uint64_t {
  kCamera = 1,
  kTimestep = 2,
  kNoise = 3,
  kNullCoin = 4,
  kScoreModelInit = 5,
  kGeneratorInit = 6,
  kMetrics = 7,
  kPlot = 8,
  kVerify = 9,
};

namespace detail {

inline constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Counter-based generator (SplitMix64 output function): the i-th output is a
// pure function of (key, i), which makes replay and per-stream isolation
// trivial.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, Stream stream)
      : key_(detail::mix64(master_seed + detail::kGamma *
                                             (static_cast<std::uint64_t>(stream) + 1))) {}

  std::uint64_t next_u64() {
    counter_ += 1;
    return detail::mix64(key_ + counter_ * detail::kGamma);
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

  // Uniform on {0, ..., n-1}.
  int uniform_int(int n) {
    const int v = static_cast<int>(uniform() * n);
    return v < n ? v : n - 1;
  }

  // Standard normal via Box-Muller. Draws two uniforms per call and keeps only
  // the cosine leg; one call always consumes exactly two counter steps.
  double normal() {
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Vec normal_vec(int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace sdlab
