#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "qsk/ball.hpp"
#include "qsk/kernel.hpp"
#include "qsk/operators.hpp"
#include "qsk/parallel.hpp"

namespace qsk {

/// Sup over the first half of the samples and over all of them.
struct RunningSup {
  double half = 0.0;
  double full = 0.0;
  std::size_t samples = 0;

  /// Relative growth when the sample count doubles.
  double change() const { return half > 0.0 ? full / half - 1.0 : std::numeric_limits<double>::infinity(); }
};

/// Unit-sphere point with the polar angle uniform; the sup of a continuous
/// function does not depend on the sampling density, and this one reaches
/// the pure-y pole, where the kernel peaks, far more often than the cone
/// measure does.
inline GroupPoint scan_sphere_point(GroupDims d, Rng& rng) {
  const PolarMap& pm = polar_map(d);
  double u[4 + kMaxHorizontal];
  for (int k = 0; k < pm.coordinates(); ++k) u[k] = (static_cast<double>(rng.next() >> 11) + 0.5) * 0x1.0p-53;
  GroupPoint v;
  pm.sphere_point(u, v);
  return v;
}

namespace detail {

/// Running sup of value(rng) over `samples` draws in fixed chunks with their
/// own streams, so the result does not depend on the thread count.
template <typename Value>
RunningSup running_sup(std::size_t samples, std::uint64_t seed, Value&& value) {
  if (samples < 2) throw std::invalid_argument("running_sup: need at least two samples");
  constexpr std::size_t half_chunks = 8;
  const std::size_t half = samples / 2;
  std::vector<std::size_t> bounds;
  for (std::size_t c = 0; c <= half_chunks; ++c) bounds.push_back(half * c / half_chunks);
  for (std::size_t c = 1; c <= half_chunks; ++c) bounds.push_back(half + (samples - half) * c / half_chunks);
  std::vector<double> best(2 * half_chunks, 0.0);
  parallel_for(best.size(), [&](std::size_t c) {
    Rng rng(substream(seed, c));
    double m = 0.0;
    for (std::size_t i = bounds[c]; i < bounds[c + 1]; ++i) m = std::max(m, value(rng));
    best[c] = m;
  });
  RunningSup out;
  out.samples = samples;
  out.half = *std::max_element(best.begin(), best.begin() + half_chunks);
  out.full = std::max(out.half, *std::max_element(best.begin() + half_chunks, best.end()));
  return out;
}

}  // namespace detail

/// sup |K(g)| ||g||^Q over sphere samples.
inline RunningSup kernel_size_scan(const KernelEvaluator& ke, std::size_t samples, std::uint64_t seed) {
  const GroupDims d = ke.dims();
  return detail::running_sup(samples, seed, [&](Rng& rng) {
    const GroupPoint g = scan_sphere_point(d, rng);
    return abs(eval_K(ke, g)) * std::pow(hnorm(g), d.Q());
  });
}

/// sup_j |Y_j K(g)| ||g||^{Q+1} over sphere samples.
inline RunningSup kernel_gradient_scan(const KernelEvaluator& ke, std::size_t samples, std::uint64_t seed) {
  const GroupDims d = ke.dims();
  return detail::running_sup(samples, seed, [&](Rng& rng) {
    const GroupPoint g = scan_sphere_point(d, rng);
    double m = 0.0;
    for (const Quat& q : horizontal_gradient_K(ke, g)) m = std::max(m, abs(q));
    return m * std::pow(hnorm(g), d.Q() + 1);
  });
}

/// sup of |K(g, h) - K(g0, h)| rho(g0, h)^{Q+1} / rho(g, g0) over rho(g0, h) >= c rho(g, g0).
/// Left invariance and homogeneity reduce every triple to h = 0, ||g0|| = 1,
/// g = g0 delta_s(v) with ||v|| = 1 and s uniform in (0, 1/c].
inline RunningSup kernel_holder_scan(const KernelEvaluator& ke, std::size_t samples, double c, std::uint64_t seed) {
  if (!(c > 1.0)) throw std::invalid_argument("kernel_holder_scan: separation must exceed 1");
  const GroupDims d = ke.dims();
  return detail::running_sup(samples, seed, [&](Rng& rng) {
    const GroupPoint g0 = scan_sphere_point(d, rng);
    const GroupPoint v = scan_sphere_point(d, rng);
    const double s = (1.0 - rng.uniform()) / c;
    const GroupPoint g = gmul(g0, dilate(s, v));
    return abs(eval_K(ke, g) - eval_K(ke, g0)) * std::pow(hnorm(g0), d.Q() + 1) / rho(g, g0);
  });
}

/// Companion-ball search parameters.
struct CompanionScanCfg {
  double A1 = 3.0;
  double A2 = 10.0;
  int directions = 64;  ///< candidate companion centers
  int pairs = 256;      ///< sampled (g, h) pairs per candidate, centers included
};

/// A ball B(h0, r) at rho-distance in [A1 r, A2 r] from B(g0, r) on which one
/// component K_i(g, h) keeps its sign over all sampled pairs.
struct CompanionBall {
  bool found = false;
  Ball ball;
  int component = -1;            ///< 0..3 for the real, i, j, k parts
  double constant = 0.0;         ///< min over pairs of |K_i(g, h)| rho(g, h)^Q
  double distance = 0.0;         ///< rho(g0, h0) / r
  double direction_fraction = 0.0;  ///< share of candidates with some sign-constant component
};

/// Tries cfg.directions candidates and keeps the one with the largest constant.
inline CompanionBall companion_ball(const KernelEvaluator& ke, const Ball& b, const CompanionScanCfg& cfg,
                                    std::uint64_t seed) {
  if (!(cfg.A1 >= 1.0 && cfg.A2 >= cfg.A1)) throw std::invalid_argument("CompanionScanCfg: need 1 <= A1 <= A2");
  if (cfg.directions < 1 || cfg.pairs < 1) throw std::invalid_argument("CompanionScanCfg: counts must be positive");
  const GroupDims d = b.dims();
  const int Q = d.Q();
  Rng rng(seed);
  CompanionBall out;
  out.ball = b;
  int good = 0;
  for (int k = 0; k < cfg.directions; ++k) {
    const double s = rng.uniform(cfg.A1, cfg.A2);
    const GroupPoint h0 = gmul(b.center, dilate(s * b.radius, sample_unit_sphere(d, rng)));
    const Ball other(h0, b.radius);
    std::array<int, 4> sign{};
    std::array<bool, 4> constant{true, true, true, true};
    std::array<double, 4> low;
    low.fill(std::numeric_limits<double>::infinity());
    for (int p = 0; p < cfg.pairs; ++p) {
      const GroupPoint g = p == 0 ? b.center : sample_in_ball(b, rng);
      const GroupPoint h = p == 0 ? h0 : sample_in_ball(other, rng);
      const Quat K = eval_K(ke, g, h);
      const double scale = std::pow(rho(g, h), Q);
      const std::array<double, 4> c{K.x1, K.x2, K.x3, K.x4};
      for (int i = 0; i < 4; ++i) {
        const int sg = (c[i] > 0.0) - (c[i] < 0.0);
        if (p == 0) sign[i] = sg;
        if (sg == 0 || sg != sign[i]) constant[i] = false;
        low[i] = std::min(low[i], std::abs(c[i]) * scale);
      }
    }
    bool any = false;
    for (int i = 0; i < 4; ++i) {
      if (!constant[i]) continue;
      any = true;
      if (low[i] > out.constant) {
        out.found = true;
        out.ball = other;
        out.component = i;
        out.constant = low[i];
        out.distance = s;
      }
    }
    if (any) ++good;
  }
  out.direction_fraction = static_cast<double>(good) / cfg.directions;
  return out;
}

struct LowerBoundScan {
  std::vector<GroupPoint> base_points;
  std::vector<CompanionBall> rows;
  double global_c = 0.0;     ///< min constant over the base points where a companion was found
  double success_rate = 0.0;  ///< share of base points with a companion achieving global_c
  double mean_direction_fraction = 0.0;
};

/// Companion-ball scan at `count` base points on the unit sphere, balls of radius r.
inline LowerBoundScan lower_bound_scan(const KernelEvaluator& ke, int count, double r, const CompanionScanCfg& cfg,
                                       std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("lower_bound_scan: count must be positive");
  if (!(r > 0.0)) throw std::invalid_argument("lower_bound_scan: radius must be positive");
  LowerBoundScan out;
  Rng rng(seed);
  for (int i = 0; i < count; ++i) out.base_points.push_back(sample_unit_sphere(ke.dims(), rng));
  out.rows.resize(count);
  parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
    out.rows[i] = companion_ball(ke, Ball(out.base_points[i], r), cfg, substream(seed, i + 1));
  });
  double c = std::numeric_limits<double>::infinity();
  int found = 0;
  for (const auto& row : out.rows) {
    out.mean_direction_fraction += row.direction_fraction / count;
    if (!row.found) continue;
    ++found;
    c = std::min(c, row.constant);
  }
  out.global_c = found > 0 ? c : 0.0;
  out.success_rate = static_cast<double>(found) / count;
  return out;
}

}  // namespace qsk
