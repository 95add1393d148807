#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qsk/heisenberg.hpp"
#include "qsk/parallel.hpp"
#include "qsk/random.hpp"

namespace qsk {

struct VolumeEstimate {
  double volume = 0.0;      ///< estimate of |B(0,1)|
  double std_error = 0.0;
  double acceptance = 0.0;  ///< accepted / drawn
  double box_volume = 0.0;  ///< volume of {|t_j| <= 1, |y_i| <= 1}
  std::uint64_t samples = 0;
};

/// Draws one point uniformly (Lebesgue = Haar) from B(0,1) by rejection from
/// the box {|t_j| <= 1, |y_i| <= 1}. The y block is drawn first and the t block
/// only if |y| < 1; both are rejection from the same box.
inline GroupPoint sample_unit_ball_box(GroupDims d, Rng& rng) {
  GroupPoint g = GroupPoint::identity(d);
  const int m = d.horizontal();
  for (;;) {
    double y2 = 0.0;
    for (int i = 0; i < m; ++i) {
      g.y[i] = rng.symmetric();
      y2 += g.y[i] * g.y[i];
    }
    if (y2 >= 1.0) continue;
    double t2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      g.t[a] = rng.symmetric();
      t2 += g.t[a] * g.t[a];
    }
    if (y2 * y2 + t2 < 1.0) return g;
  }
}

/// Same law as sample_unit_ball_box: y uniform in the Euclidean unit ball,
/// kept with probability (1 - |y|^4)^{3/2}, then t uniform in the 3-ball of
/// radius sqrt(1 - |y|^4).
inline GroupPoint sample_unit_ball_radial(GroupDims d, Rng& rng) {
  GroupPoint g = GroupPoint::identity(d);
  const int m = d.horizontal();
  for (;;) {
    double n2 = 0.0;
    for (int i = 0; i < m; i += 2) {
      // Box-Muller pairs
      const double u = 1.0 - rng.uniform(), v = rng.uniform();
      const double r = std::sqrt(-2.0 * std::log(u));
      g.y[i] = r * std::cos(2.0 * M_PI * v);
      g.y[i + 1] = r * std::sin(2.0 * M_PI * v);
      n2 += g.y[i] * g.y[i] + g.y[i + 1] * g.y[i + 1];
    }
    const double s = std::pow(rng.uniform(), 1.0 / m);
    const double k = s / std::sqrt(n2);
    for (int i = 0; i < m; ++i) g.y[i] *= k;
    const double room = 1.0 - s * s * s * s;
    if (rng.uniform() >= room * std::sqrt(room)) continue;
    const double rt = std::sqrt(room);
    for (;;) {
      double t2 = 0.0;
      for (int a = 0; a < 3; ++a) {
        g.t[a] = rng.symmetric();
        t2 += g.t[a] * g.t[a];
      }
      if (t2 < 1.0) break;
    }
    for (int a = 0; a < 3; ++a) g.t[a] *= rt;
    return g;
  }
}

/// Uniform point of B(0,1). Box rejection for n = 2; for larger n its
/// acceptance falls below 1e-3 and the radial sampler takes over.
inline GroupPoint sample_unit_ball(GroupDims d, Rng& rng) {
  return d.n() == 2 ? sample_unit_ball_box(d, rng) : sample_unit_ball_radial(d, rng);
}

/// A point with ||theta|| = 1 distributed by the normalized polar (cone)
/// measure: if v is uniform in B(0,1) then delta_{1/||v||} v has this law
/// and ||v|| has density Q r^{Q-1}.
inline GroupPoint sample_unit_sphere(GroupDims d, Rng& rng) {
  for (;;) {
    const GroupPoint v = sample_unit_ball(d, rng);
    const double r = hnorm(v);
    if (r > 1e-6) return dilate(1.0 / r, v);
  }
}

/// Monte-Carlo estimate of |B(0,1)|.
inline VolumeEstimate unit_ball_volume(GroupDims d, std::uint64_t sample_count, std::uint64_t seed) {
  if (sample_count == 0) throw std::invalid_argument("unit_ball_volume: sample_count must be positive");
  Rng rng(seed);
  const int m = d.horizontal();
  std::uint64_t hits = 0;
  for (std::uint64_t s = 0; s < sample_count; ++s) {
    double y2 = 0.0;
    for (int i = 0; i < m; ++i) {
      const double v = rng.symmetric();
      y2 += v * v;
    }
    double t2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double v = rng.symmetric();
      t2 += v * v;
    }
    if (y2 * y2 + t2 < 1.0) ++hits;
  }
  VolumeEstimate est;
  est.box_volume = std::ldexp(1.0, d.ambient());
  est.samples = sample_count;
  est.acceptance = static_cast<double>(hits) / static_cast<double>(sample_count);
  est.volume = est.box_volume * est.acceptance;
  est.std_error = est.box_volume *
                  std::sqrt(est.acceptance * (1.0 - est.acceptance) / static_cast<double>(sample_count));
  return est;
}

/// Conditional Monte-Carlo estimate of |B(0,1)|: with y uniform in the
/// Euclidean unit ball, |B(0,1)| = V_m (4 pi / 3) E[(1 - |y|^4)^{3/2}].
/// Only |y| matters, and |y|^m is uniform.
inline VolumeEstimate unit_ball_volume_radial(GroupDims d, std::uint64_t sample_count, std::uint64_t seed) {
  if (sample_count == 0) throw std::invalid_argument("unit_ball_volume_radial: sample_count must be positive");
  Rng rng(seed);
  const int m = d.horizontal();
  double s1 = 0.0, s2 = 0.0;
  for (std::uint64_t k = 0; k < sample_count; ++k) {
    const double s = std::pow(rng.uniform(), 1.0 / m);
    const double room = 1.0 - s * s * s * s;
    const double v = room * std::sqrt(room);
    s1 += v;
    s2 += v * v;
  }
  const double N = static_cast<double>(sample_count);
  const double mean = s1 / N;
  const double var = std::max(0.0, s2 / N - mean * mean);
  const double factor = std::pow(M_PI, m / 2.0) / std::tgamma(m / 2.0 + 1.0) * 4.0 * M_PI / 3.0;
  VolumeEstimate est;
  est.box_volume = std::ldexp(1.0, d.ambient());
  est.samples = sample_count;
  est.volume = factor * mean;
  est.acceptance = est.volume / est.box_volume;
  est.std_error = factor * std::sqrt(var / N);
  return est;
}

inline constexpr std::uint64_t kOmegaSamples = 8'000'000;
inline constexpr std::uint64_t kOmegaSeed = 0x51a9e60ULL;

/// omega_Q = |B(0,1)|, estimated once per n and reused by every volume.
/// Box rejection for n = 2, the conditional estimator for larger n (box
/// acceptance 2e-3 at n = 3, 3e-5 at n = 4).
inline const VolumeEstimate& unit_ball_volume_cached(GroupDims d) {
  static std::mutex mutex;
  static std::map<int, VolumeEstimate> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(d.n());
  if (it == cache.end()) {
    const std::uint64_t seed = kOmegaSeed + d.n();
    it = cache.emplace(d.n(), d.n() == 2 ? unit_ball_volume(d, kOmegaSamples, seed)
                                         : unit_ball_volume_radial(d, kOmegaSamples, seed)).first;
  }
  return it->second;
}

/// rho-ball B(center, radius) = {h : rho(h, center) < radius}.
struct Ball {
  GroupPoint center;
  double radius = 1.0;

  Ball() = default;
  Ball(GroupPoint c, double r) : center(c), radius(r) {
    if (!(r > 0.0)) throw std::invalid_argument("Ball: radius must be positive");
  }

  GroupDims dims() const { return center.dims(); }
  /// |B| = omega_Q r^Q, exact scaling in r.
  double volume() const { return unit_ball_volume_cached(dims()).volume * std::pow(radius, dims().Q()); }
  bool contains(const GroupPoint& p) const { return rho(p, center) < radius; }
  Ball scaled(double lambda) const { return Ball(center, lambda * radius); }

  /// Stable identity used to derive per-ball random streams.
  std::uint64_t key() const {
    std::uint64_t h = hash_double(radius);
    for (int a = 0; a < 3; ++a) h = mix64(h ^ hash_double(center.t[a]));
    for (int i = 0; i < center.ydim; ++i) h = mix64(h ^ hash_double(center.y[i]));
    return h;
  }
};

/// Point of B(center, radius): left translate of a dilated unit-ball sample.
inline GroupPoint sample_in_ball(const Ball& b, Rng& rng) {
  return gmul(b.center, dilate(b.radius, sample_unit_ball(b.dims(), rng)));
}

inline std::vector<GroupPoint> sample_ball(const Ball& b, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw std::invalid_argument("sample_ball: count must be positive");
  Rng rng(seed);
  std::vector<GroupPoint> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample_in_ball(b, rng));
  return out;
}

/// Uniform points of {r_in <= rho(., g) < r_out}. Rejects draws of B(g, r_out)
/// that fall inside B(g, r_in); gives up after max_attempts draws.
inline std::vector<GroupPoint> sample_annulus(const GroupPoint& g, double r_in, double r_out,
                                              std::size_t count, std::uint64_t seed,
                                              std::size_t max_attempts = 50'000'000) {
  if (!(r_in >= 0.0) || !(r_out > r_in)) {
    throw std::invalid_argument("sample_annulus: need 0 <= r_in < r_out");
  }
  if (count == 0) throw std::invalid_argument("sample_annulus: count must be positive");
  Rng rng(seed);
  const double ratio = r_in / r_out;
  std::vector<GroupPoint> out;
  out.reserve(count);
  std::size_t attempts = 0;
  while (out.size() < count) {
    if (++attempts > max_attempts) {
      throw std::runtime_error("sample_annulus: annulus empty after max rejection attempts");
    }
    const GroupPoint v = sample_unit_ball(g.dims(), rng);
    if (ratio > 0.0 && hnorm(v) < ratio) continue;
    out.push_back(gmul(g, dilate(r_out, v)));
  }
  return out;
}

/// Empirical sup over sampled triples of rho(h,g) / (rho(h,w) + rho(w,g)).
/// The degenerate triple w = g contributes exactly 1.
inline double quasi_triangle_constant(GroupDims d, std::uint64_t sample_count, std::uint64_t seed) {
  if (sample_count == 0) throw std::invalid_argument("quasi_triangle_constant: sample_count must be positive");
  Rng rng(seed);
  double best = 1.0;
  auto draw = [&] {
    const double scale = std::exp(rng.uniform(std::log(1e-2), std::log(1e2)));
    return dilate(scale, sample_unit_ball(d, rng));
  };
  for (std::uint64_t s = 0; s < sample_count; ++s) {
    const GroupPoint h = draw();
    const GroupPoint g = draw();
    // w near the geodesic-ish region between h and g is where the ratio peaks
    const GroupPoint w = rng.uniform() < 0.5 ? gmul(g, dilate(rng.uniform() * rho(h, g) + 1e-300, sample_unit_ball(d, rng)))
                                             : draw();
    const double denom = rho(h, w) + rho(w, g);
    if (denom > 0.0) best = std::max(best, rho(h, g) / denom);
  }
  return best;
}

/// Weighted nodes for integrals over one ball: int_B F ~ sum_i weight_i F(node_i).
/// Nodes are grouped in strata; draws_per_stratum counts all draws of a
/// stratum, including rejected ones (zero contributions), for error estimates.
struct BallRule {
  Ball ball;
  std::vector<GroupPoint> nodes;
  std::vector<double> weights;
  std::vector<int> stratum;
  std::vector<std::size_t> draws_per_stratum;
  bool polar = false;

  std::size_t size() const { return nodes.size(); }
  double weight_sum() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }
};

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Integral of the per-node values v (same order as rule.nodes), with the
/// stratified standard error.
inline Estimate integrate(const BallRule& rule, const std::vector<double>& v) {
  const std::size_t strata = rule.draws_per_stratum.size();
  std::vector<double> s1(strata, 0.0), s2(strata, 0.0);
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double x = rule.weights[i] * v[i];
    s1[rule.stratum[i]] += x;
    s2[rule.stratum[i]] += x * x;
  }
  Estimate e;
  double var = 0.0;
  for (std::size_t k = 0; k < strata; ++k) {
    e.value += s1[k];
    const double m = static_cast<double>(rule.draws_per_stratum[k]);
    if (m > 1.0) var += m * std::max(0.0, s2[k] - s1[k] * s1[k] / m) / (m - 1.0);
  }
  e.std_error = std::sqrt(var);
  return e;
}

/// Self-normalized average sum w v / sum w; exact for constant v.
inline Estimate average(const BallRule& rule, const std::vector<double>& v) {
  const double ws = rule.weight_sum();
  Estimate e = integrate(rule, v);
  if (v.empty()) return e;
  // shifted by v[0] so that a constant v averages to itself bit-exactly
  double num = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) num += rule.weights[i] * (v[i] - v[0]);
  e.value = v[0] + num / ws;
  e.std_error /= ws;
  return e;
}

inline BallRule uniform_rule(const Ball& b, std::size_t count, std::uint64_t seed) {
  BallRule rule;
  rule.ball = b;
  rule.nodes = sample_ball(b, count, seed);
  rule.weights.assign(count, b.volume() / static_cast<double>(count));
  rule.stratum.assign(count, 0);
  rule.draws_per_stratum = {count};
  return rule;
}

/// Uniform point of the shell {r_lo <= rho(., s) < r_hi}: radius drawn with
/// density proportional to r^{Q-1}, direction from the cone measure.
inline GroupPoint sample_shell(const GroupPoint& s, double r_lo, double r_hi, Rng& rng) {
  const int Q = s.dims().Q();
  const double lo = std::pow(r_lo, Q), hi = std::pow(r_hi, Q);
  const double r = std::pow(lo + (hi - lo) * rng.uniform(), 1.0 / Q);
  return gmul(s, dilate(r, sample_unit_sphere(s.dims(), rng)));
}

/// Uniform rule stratified into `strata` equal-volume shells about the center.
inline BallRule stratified_rule(const Ball& b, std::size_t count, int strata, std::uint64_t seed) {
  if (strata < 1) throw std::invalid_argument("stratified_rule: strata must be positive");
  if (count < static_cast<std::size_t>(strata)) throw std::invalid_argument("stratified_rule: fewer samples than strata");
  const int Q = b.dims().Q();
  Rng rng(seed);
  BallRule rule;
  rule.ball = b;
  const double shell_volume = b.volume() / strata;
  for (int k = 0; k < strata; ++k) {
    const std::size_t m = count / strata + (static_cast<std::size_t>(k) < count % strata ? 1 : 0);
    const double lo = b.radius * std::pow(static_cast<double>(k) / strata, 1.0 / Q);
    const double hi = b.radius * std::pow(static_cast<double>(k + 1) / strata, 1.0 / Q);
    for (std::size_t i = 0; i < m; ++i) {
      rule.nodes.push_back(sample_shell(b.center, lo, hi, rng));
      rule.weights.push_back(shell_volume / static_cast<double>(m));
      rule.stratum.push_back(k);
    }
    rule.draws_per_stratum.push_back(m);
  }
  return rule;
}

/// Rule for a ball containing a singular point s.
///
/// The core B(s, eps), eps = radius - rho(s, center), lies inside the ball and
/// is split into log-spaced shells down to eps * 10^-depth; the innermost
/// B(s, eps * 10^-depth) is left out. Each shell is sampled uniformly, so its
/// weight is exact. The remainder B \ B(s, eps) is sampled uniformly, either by
/// rejection from the ball or, when the core fills most of it, from shells
/// around s clipped to the ball.
inline BallRule polar_rule(const Ball& b, const GroupPoint& s, std::size_t count, int depth,
                           int strata_per_decade, std::uint64_t seed) {
  if (count == 0) throw std::invalid_argument("polar_rule: count must be positive");
  if (depth < 1 || strata_per_decade < 1) throw std::invalid_argument("polar_rule: depth and strata must be positive");
  const double dist = rho(s, b.center);
  if (!(dist < b.radius)) throw std::invalid_argument("polar_rule: singular point must lie inside the ball");
  const GroupDims d = b.dims();
  const int Q = d.Q();
  const double omega = unit_ball_volume_cached(d).volume;
  const double eps = b.radius - dist;
  const double vol_ball = b.volume();
  const double vol_rest = std::max(0.0, vol_ball - omega * std::pow(eps, Q));
  const double rest_share = vol_rest / vol_ball;

  const std::size_t n_rest = rest_share > 1e-12
                                 ? std::max<std::size_t>(2, static_cast<std::size_t>(count * std::clamp(rest_share, 0.2, 0.8)))
                                 : 0;
  const std::size_t n_core = std::max<std::size_t>(2 * static_cast<std::size_t>(depth), count - std::min(count, n_rest));
  const int strata = depth * strata_per_decade;
  const double step = std::log(10.0) / strata_per_decade;

  BallRule rule;
  rule.ball = b;
  rule.polar = true;
  Rng rng(seed);

  // shell k spans [eps e^{-(k+1) step}, eps e^{-k step}); volume fraction of the core ~ e^{-kQ step}
  std::vector<double> frac(strata);
  double total = 0.0;
  for (int k = 0; k < strata; ++k) total += frac[k] = std::exp(-k * Q * step) * (1.0 - std::exp(-Q * step));
  for (int k = 0; k < strata; ++k) {
    const double r_hi = eps * std::exp(-k * step), r_lo = eps * std::exp(-(k + 1) * step);
    const double share = 0.5 / strata + 0.5 * frac[k] / total;
    const std::size_t m = std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(n_core * share)));
    const double w = omega * (std::pow(r_hi, Q) - std::pow(r_lo, Q)) / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
      rule.nodes.push_back(sample_shell(s, r_lo, r_hi, rng));
      rule.weights.push_back(w);
      rule.stratum.push_back(k);
    }
    rule.draws_per_stratum.push_back(m);
  }

  if (n_rest > 0) {
    const int k = strata;
    const double accept_uniform = rest_share;
    const double r_out = dist + b.radius;
    const double accept_shell = vol_rest / (omega * (std::pow(r_out, Q) - std::pow(eps, Q)));
    if (accept_uniform >= accept_shell) {
      const double w = vol_rest / static_cast<double>(n_rest);
      std::size_t got = 0;
      while (got < n_rest) {
        const GroupPoint p = sample_in_ball(b, rng);
        if (rho(p, s) < eps) continue;
        rule.nodes.push_back(p);
        rule.weights.push_back(w);
        rule.stratum.push_back(k);
        ++got;
      }
      rule.draws_per_stratum.push_back(n_rest);
    } else {
      const double w = omega * (std::pow(r_out, Q) - std::pow(eps, Q)) / static_cast<double>(n_rest);
      for (std::size_t i = 0; i < n_rest; ++i) {
        const GroupPoint p = sample_shell(s, eps, r_out, rng);
        if (!b.contains(p)) continue;
        rule.nodes.push_back(p);
        rule.weights.push_back(w);
        rule.stratum.push_back(k);
      }
      rule.draws_per_stratum.push_back(n_rest);
    }
  }
  return rule;
}

/// How a family integrates over its balls.
struct RuleConfig {
  std::size_t samples_per_ball = 2048;
  std::optional<GroupPoint> singular = std::nullopt;  ///< integrands may blow up here
  int singular_depth = 6;                             ///< decades of core shells
  int strata_per_decade = 4;
  int radial_strata = 1;  ///< equal-volume shells about the center for non-singular balls
  bool equivariant = false;  ///< non-singular balls reuse one unit-ball node set, translated and dilated
};

inline RuleConfig uniform_config(std::size_t samples_per_ball) {
  RuleConfig c;
  c.samples_per_ball = samples_per_ball;
  return c;
}

/// Polar rule when the singular point lies in the ball; otherwise uniform,
/// radially stratified on request. Equivariant rules are the image of one
/// unit-ball rule under u -> c delta_r(u), so their seed must not depend on
/// the ball.
inline BallRule make_rule(const Ball& b, const RuleConfig& cfg, std::uint64_t seed) {
  if (cfg.singular && rho(*cfg.singular, b.center) < b.radius) {
    return polar_rule(b, *cfg.singular, cfg.samples_per_ball, cfg.singular_depth, cfg.strata_per_decade,
                      substream(seed, 0x706f6c6172ULL));
  }
  if (cfg.equivariant) {
    RuleConfig unit = cfg;
    unit.equivariant = false;
    unit.singular.reset();
    BallRule rule = make_rule(Ball(GroupPoint::identity(b.dims()), 1.0), unit, seed);
    const double scale = std::pow(b.radius, b.dims().Q());
    for (auto& u : rule.nodes) u = gmul(b.center, dilate(b.radius, u));
    for (auto& w : rule.weights) w *= scale;
    rule.ball = b;
    return rule;
  }
  if (cfg.radial_strata > 1) return stratified_rule(b, cfg.samples_per_ball, cfg.radial_strata, seed);
  return uniform_rule(b, cfg.samples_per_ball, seed);
}

/// Sampled balls that drive every sup-over-balls estimator. Interior nodes
/// are generated once per ball from a stream keyed by the ball itself, so a
/// ball shared by two families gets identical nodes in both.
class BallFamily {
 public:
  BallFamily(std::vector<Ball> balls, RuleConfig cfg, std::uint64_t seed)
      : balls_(std::move(balls)), cfg_(std::move(cfg)), seed_(seed) {
    if (cfg_.samples_per_ball == 0) throw std::invalid_argument("BallFamily: samples_per_ball must be positive");
    rules_.resize(balls_.size());
    parallel_for(balls_.size(), [&](std::size_t i) { rules_[i] = make_rule(balls_[i], cfg_, ball_seed(balls_[i])); });
  }
  BallFamily(std::vector<Ball> balls, std::size_t samples_per_ball, std::uint64_t seed)
      : BallFamily(std::move(balls), uniform_config(samples_per_ball), seed) {}

  std::size_t size() const { return balls_.size(); }
  bool empty() const { return balls_.empty(); }
  const Ball& ball(std::size_t i) const { return balls_[i]; }
  const std::vector<Ball>& balls() const { return balls_; }
  const BallRule& rule(std::size_t i) const { return rules_[i]; }
  const std::vector<GroupPoint>& points(std::size_t i) const { return rules_[i].nodes; }
  std::size_t samples_per_ball() const { return cfg_.samples_per_ball; }
  const RuleConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t ball_seed(const Ball& b) const { return cfg_.equivariant ? seed_ : substream(seed_, b.key()); }

 private:
  std::vector<Ball> balls_;
  RuleConfig cfg_;
  std::uint64_t seed_;
  std::vector<BallRule> rules_;
};

/// count values log-spaced on [lo, hi] (count == 1 gives lo).
inline std::vector<double> log_spaced(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi >= lo) || count < 1) throw std::invalid_argument("log_spaced: bad range");
  std::vector<double> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double f = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    out.push_back(lo * std::pow(hi / lo, f));
  }
  return out;
}

/// Cartesian product of centers and radii.
inline std::vector<Ball> balls_from(const std::vector<GroupPoint>& centers, const std::vector<double>& radii) {
  std::vector<Ball> out;
  out.reserve(centers.size() * radii.size());
  for (const auto& c : centers)
    for (double r : radii) out.emplace_back(c, r);
  return out;
}

/// Deterministic spread of centers: points delta_{s}(theta) with theta on the
/// unit sphere and ||center|| = s log-spaced in [lo, hi].
inline std::vector<GroupPoint> spread_centers(GroupDims d, int count, double lo, double hi, std::uint64_t seed) {
  std::vector<GroupPoint> out;
  Rng rng(seed);
  const auto norms = log_spaced(lo, hi, count);
  for (double s : norms) out.push_back(dilate(s, sample_unit_sphere(d, rng)));
  return out;
}

}  // namespace qsk
