#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <limits>
#include <map>
#include <mutex>
#include <memory>
#include <shared_mutex>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include <boost/random/sobol.hpp>

#include "qsk/ball.hpp"
#include "qsk/fields.hpp"
#include "qsk/function_analysis.hpp"
#include "qsk/kernel.hpp"
#include "qsk/parallel.hpp"

namespace qsk {

/// Source quadrature around one target.
struct QuadratureCfg {
  std::size_t sources = 2048;  ///< source nodes per target
  std::size_t replicates = 8;  ///< independent digital shifts of the near-field point set
  double far_factor = 3.0;     ///< targets beyond far_factor * support radius use uniform sources
  std::uint64_t seed = 1;
  bool error_estimate = true;  ///< report standard errors (replicates are kept either way)
  std::size_t moment_nodes = 1 << 16;  ///< Sobol nodes for the far-field moments of f; 0 disables them
};

/// Quaternion-valued integral: the mean of independent replicate estimates.
struct QuatEstimate {
  Quat value{};
  double std_error = 0.0;        ///< modulus standard error of the mean
  std::vector<Quat> replicates;  ///< per-replicate totals

  /// Unbiased estimate of |value|^2: mean of <r_i, r_j> over pairs i != j.
  double unbiased_norm2() const { return unbiased_norm2_of(replicates, {}); }

  /// Unbiased estimate of |a - b|^2 for estimates on the same nodes.
  static double unbiased_distance2(const QuatEstimate& a, const QuatEstimate& b) {
    return unbiased_norm2_of(a.replicates, b.replicates);
  }

 private:
  static double unbiased_norm2_of(const std::vector<Quat>& a, const std::vector<Quat>& b) {
    // an empty replicate list stands for an estimate that is exactly zero
    const std::size_t R = std::max(a.size(), b.size());
    if (R < 2) return 0.0;
    if ((!a.empty() && a.size() != R) || (!b.empty() && b.size() != R))
      throw std::invalid_argument("QuatEstimate: replicate counts differ");
    Quat sum{};
    double sq = 0.0;
    for (std::size_t i = 0; i < R; ++i) {
      const Quat d = (a.empty() ? Quat{} : a[i]) - (b.empty() ? Quat{} : b[i]);
      sum += d;
      sq += norm2(d);
    }
    return (norm2(sum) - sq) / static_cast<double>(R * (R - 1));
  }
};

inline std::uint64_t point_key(const GroupPoint& g) {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(g.ydim));
  for (int a = 0; a < 3; ++a) h = mix64(h ^ hash_double(g.t[a]));
  for (int i = 0; i < g.ydim; ++i) h = mix64(h ^ hash_double(g.y[i]));
  return h;
}

/// Polar coordinates v = (rho^2 sin(theta) omega, rho sqrt(cos(theta)) e) with
/// omega on S^2 and e on S^{m-1}, m = 4(n-1). Haar measure splits as
/// Q |B(0,1)| rho^{Q-1} drho times p(theta) dtheta dS^2 dS^{m-1} (both spheres
/// normalized), p(theta) proportional to cos^{(m-2)/2}(theta) sin^2(theta).
struct PolarMap {
  GroupDims dims;
  double omega;       ///< |B(0,1)|
  double theta_norm;  ///< int_0^{pi/2} cos^k sin^2

  explicit PolarMap(GroupDims d)
      : dims(d), omega(unit_ball_volume_cached(d).volume),
        theta_norm(0.5 * std::beta(0.25 * d.horizontal(), 1.5)) {}

  int coordinates() const { return 4 + dims.horizontal(); }

  /// Maps u[1..] to a point of the unit sphere with theta uniform on [0, pi/2];
  /// returns p(theta) for that theta. The y direction comes from Box-Muller
  /// normals.
  double sphere_point(const double* u, GroupPoint& v) const {
    const int m = dims.horizontal();
    const double theta = 0.5 * std::numbers::pi * u[1];
    const double z = 2.0 * u[2] - 1.0, phi = 2.0 * std::numbers::pi * u[3];
    const double sz = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double ct = std::cos(theta), st = std::sin(theta);
    double density = st * st / theta_norm;
    for (int j = 0; j < m / 2 - 1; ++j) density *= ct;
    v = GroupPoint::identity(dims);
    v.t[0] = st * sz * std::cos(phi);
    v.t[1] = st * sz * std::sin(phi);
    v.t[2] = st * z;
    double e2 = 0.0;
    for (int j = 0; j < m; j += 2) {
      const double rad = std::sqrt(-2.0 * std::log(u[4 + j]));
      const double ang = 2.0 * std::numbers::pi * u[5 + j];
      v.y[j] = rad * std::cos(ang);
      v.y[j + 1] = rad * std::sin(ang);
      e2 += rad * rad;
    }
    const double scale = std::sqrt(ct / e2);
    for (int j = 0; j < m; ++j) v.y[j] *= scale;
    return density;
  }

  /// Maps u in [0,1)^coordinates() to a point with log-uniform radius in [a, b];
  /// returns the Haar weight of one such draw.
  double map(const double* u, double a, double b, GroupPoint& v, double& r_out) const {
    const int Q = dims.Q();
    const double log_ratio = std::log(b / a);
    const double log_r = std::log(a) + u[0] * log_ratio;
    const double r = std::exp(log_r);
    r_out = r;
    const double density = sphere_point(u, v);
    v = dilate(r, v);
    return Q * omega * std::exp(Q * log_r) * log_ratio * 0.5 * std::numbers::pi * density;
  }
};

/// First `count` points of the Sobol sequence in `dim` dimensions, row-major.
inline const std::vector<std::uint64_t>& sobol_points(int dim, std::size_t count) {
  static std::mutex mutex;
  static std::map<std::pair<int, std::size_t>, std::vector<std::uint64_t>> cache;
  std::lock_guard lock(mutex);
  auto& pts = cache[{dim, count}];
  if (pts.empty()) {
    boost::random::sobol qrng(static_cast<std::size_t>(dim));
    pts.resize(count * static_cast<std::size_t>(dim));
    for (auto& x : pts) x = qrng();
  }
  return pts;
}

inline const PolarMap& polar_map(GroupDims d) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<PolarMap>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[d.n()];
  if (!slot) slot = std::make_unique<PolarMap>(d);
  return *slot;
}

/// Rule for the shell r_lo <= rho(center, .) < r_hi with log-uniform radii,
/// for integrands that decay away from the center.
inline BallRule log_shell_rule(const GroupPoint& center, double r_lo, double r_hi, std::size_t count,
                               std::uint64_t seed) {
  if (!(r_lo > 0.0 && r_hi > r_lo)) throw std::invalid_argument("log_shell_rule: need 0 < r_lo < r_hi");
  if (count == 0) throw std::invalid_argument("log_shell_rule: count must be positive");
  const PolarMap& pm = polar_map(center.dims());
  Rng rng(seed);
  std::vector<double> u(pm.coordinates());
  BallRule rule;
  rule.ball = Ball(center, r_hi);
  rule.nodes.reserve(count);
  rule.weights.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (double& x : u) x = (static_cast<double>(rng.next() >> 11) + 0.5) * 0x1.0p-53;
    GroupPoint v;
    double r = 0.0;
    const double w = pm.map(u.data(), r_lo, r_hi, v, r);
    rule.nodes.push_back(gmul(center, v));
    rule.weights.push_back(w / static_cast<double>(count));
  }
  rule.stratum.assign(count, 0);
  rule.draws_per_stratum = {count};
  return rule;
}

/// Source nodes for one target g, split into independent replicates.
///
/// Near targets get a complete log-radius region around g, covered by a
/// Sobol point set under independent random digital shifts (one shift per
/// replicate). Nodes come in pairs g(t, y), g(t, -y), on which the kernel
/// takes the same value. Region nodes are not clipped to the support, so
/// integrands may subtract f(g) K, which integrates to zero over every
/// shell. Far targets get uniform nodes on the support.
struct SourceRule {
  GroupPoint target;
  std::vector<GroupPoint> nodes;          ///< u
  std::vector<GroupPoint> rel;            ///< g^{-1} u, so K(u^{-1} g) = K(rel^{-1})
  std::vector<double> radius;             ///< rho(g, u)
  std::vector<double> weights;            ///< per node
  std::vector<std::uint32_t> replicate;   ///< replicate index per node
  std::vector<bool> same_kernel_as_next;  ///< node i + 1 has the same kernel value
  std::vector<bool> complete_shell;       ///< node lies in a complete shell around the target
  std::size_t replicates = 0;
  bool far = false;                       ///< uniform nodes on the whole support

  void push(const GroupPoint& u, const GroupPoint& v, double r, double w, std::size_t rep, bool shared,
            bool complete) {
    nodes.push_back(u);
    rel.push_back(v);
    radius.push_back(r);
    weights.push_back(w);
    replicate.push_back(static_cast<std::uint32_t>(rep));
    same_kernel_as_next.push_back(shared);
    complete_shell.push_back(complete);
  }

  void reserve(std::size_t n) {
    nodes.reserve(n);
    rel.reserve(n);
    radius.reserve(n);
    weights.reserve(n);
    replicate.reserve(n);
    same_kernel_as_next.reserve(n);
    complete_shell.reserve(n);
  }

  std::size_t size() const { return nodes.size(); }
};

/// Nodes for integrals over supp f restricted to r_in <= rho(g, u) < r_out.
/// No node is ever placed with rho(g, u) < r_in.
inline SourceRule source_rule(const GroupPoint& g, const Ball& support, double r_in, double r_out,
                              const QuadratureCfg& cfg) {
  if (cfg.sources < 2) throw std::invalid_argument("QuadratureCfg: sources must be at least 2");
  if (cfg.replicates < 2) throw std::invalid_argument("QuadratureCfg: replicates must be at least 2");
  const GroupDims d = support.dims();
  const double dist = rho(g, support.center);
  const double lo = std::max(r_in, dist - support.radius);
  const double hi = std::min(r_out, dist + support.radius);

  SourceRule rule;
  rule.target = g;
  rule.replicates = cfg.replicates;
  if (!(hi > lo)) return rule;  // nothing of the support in range

  Rng rng(substream(cfg.seed, point_key(g)));
  rule.reserve(cfg.sources);
  if (dist >= cfg.far_factor * support.radius) {
    rule.far = true;
    const std::size_t per = std::max<std::size_t>(1, cfg.sources / cfg.replicates);
    const double w = support.volume() / static_cast<double>(per);
    const GroupPoint ginv_ = ginv(g);
    for (std::size_t rep = 0; rep < cfg.replicates; ++rep) {
      for (std::size_t i = 0; i < per; ++i) {
        const GroupPoint u = sample_in_ball(support, rng);
        const GroupPoint v = gmul(ginv_, u);
        const double r = hnorm(v);
        if (r < lo || r >= hi) continue;
        rule.push(u, v, r, w, rep, false, false);
      }
    }
    return rule;
  }

  const PolarMap& pm = polar_map(d);
  const int D = pm.coordinates();
  const std::size_t per = std::max<std::size_t>(1, cfg.sources / (2 * cfg.replicates));
  const auto& raw = sobol_points(D, per);
  std::vector<double> u(D);
  for (std::size_t rep = 0; rep < cfg.replicates; ++rep) {
    std::vector<std::uint64_t> shift(D);
    for (auto& s : shift) s = rng.next();
    for (std::size_t i = 0; i < per; ++i) {
      for (int k = 0; k < D; ++k) u[k] = (static_cast<double>((raw[i * D + k] ^ shift[k]) >> 11) + 0.5) * 0x1.0p-53;
      GroupPoint v;
      double r = 0.0;
      const double w = 0.5 * pm.map(u.data(), lo, hi, v, r) / static_cast<double>(per);
      GroupPoint vr = v;
      for (int j = 0; j < vr.ydim; ++j) vr.y[j] = -vr.y[j];
      rule.push(gmul(g, v), v, r, w, rep, true, true);
      rule.push(gmul(g, vr), vr, r, w, rep, false, true);
    }
  }
  return rule;
}

/// int f and int b f over the support of f, from a Sobol rule in polar
/// coordinates about the support center.
struct SupportMoments {
  double mass = 0.0;
  double b_mass = 0.0;  ///< with b.base, so constant shifts of b leave it unchanged
};

/// Deterministic rule for a ball: Sobol points in polar coordinates about its
/// center, volume-uniform in the radius.
inline BallRule qmc_ball_rule(const Ball& ball, std::size_t count) {
  if (count == 0) throw std::invalid_argument("qmc_ball_rule: count must be positive");
  const GroupDims d = ball.dims();
  const PolarMap& pm = polar_map(d);
  const int D = pm.coordinates();
  const auto& raw = sobol_points(D, count);
  const double base_weight = pm.omega * std::pow(ball.radius, d.Q()) * 0.5 * std::numbers::pi / count;
  std::vector<double> u(D);
  BallRule rule;
  rule.ball = ball;
  rule.nodes.reserve(count);
  rule.weights.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (int k = 0; k < D; ++k) u[k] = (static_cast<double>(raw[i * D + k] >> 11) + 0.5) * 0x1.0p-53;
    GroupPoint v;
    rule.weights.push_back(base_weight * pm.sphere_point(u.data(), v));
    rule.nodes.push_back(gmul(ball.center, dilate(ball.radius * std::pow(u[0], 1.0 / d.Q()), v)));
  }
  rule.stratum.assign(count, 0);
  rule.draws_per_stratum = {count};
  return rule;
}

inline SupportMoments support_moments(const ScalarField* b, const ScalarField& f, std::size_t count) {
  if (!f.support) throw std::invalid_argument("support_moments: f must declare a compact support");
  const BallRule rule = qmc_ball_rule(*f.support, count);
  SupportMoments m;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double fx = f(rule.nodes[i]);
    if (fx == 0.0) continue;
    m.mass += rule.weights[i] * fx;
    if (b) m.b_mass += rule.weights[i] * b->base(rule.nodes[i]) * fx;
  }
  return m;
}

namespace detail {

inline void require_support(const ScalarField& f, const char* op) {
  if (!f.support) throw std::invalid_argument(std::string(op) + ": f must declare a compact support");
}

inline void require_eta(double eta, const char* op) {
  if (!(eta > 0.0)) throw std::invalid_argument(std::string(op) + ": eta must be positive");
}

/// Mean over replicates of offset + sum_i weights_i * radial(r_i) * (K(rel_i^{-1}) - anchor) * scalar(i).
/// The kernel is evaluated only where radial * scalar is nonzero, once per
/// pair of nodes that share it.
template <typename Radial, typename Scalar>
QuatEstimate integrate_kernel(const KernelEvaluator& ke, const SourceRule& rule, bool error_estimate,
                              const Quat& anchor, const Quat& offset, Radial&& radial, Scalar&& scalar) {
  QuatEstimate out;
  out.replicates.assign(rule.replicates, offset);
  Quat k{};
  bool have_k = false;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double c = scalar(i);
    const double rad = c == 0.0 ? 0.0 : radial(rule.radius[i]);
    if (rad != 0.0) {
      if (!have_k) k = eval_K(ke, ginv(rule.rel[i])) - anchor;
      out.replicates[rule.replicate[i]] += k * (rad * c * rule.weights[i]);
      have_k = true;
    }
    if (!rule.same_kernel_as_next[i]) have_k = false;
  }
  const double R = static_cast<double>(rule.replicates);
  Quat sum{};
  double sq = 0.0;
  for (const Quat& r : out.replicates) {
    sum += r;
    sq += norm2(r);
  }
  out.value = sum * (1.0 / R);
  if (error_estimate) out.std_error = std::sqrt(std::max(0.0, sq / R - norm2(out.value)) / (R - 1.0));
  return out;
}

/// No anchor, no offset.
template <typename Radial, typename Scalar>
QuatEstimate integrate_kernel(const KernelEvaluator& ke, const SourceRule& rule, bool error_estimate, Radial&& radial,
                              Scalar&& scalar) {
  return integrate_kernel(ke, rule, error_estimate, Quat{}, Quat{}, radial, scalar);
}

/// Far targets whose cutoff is identically 1 on supp f integrate against
/// K(u^{-1} g) - K(c^{-1} g), c the support center; the moments supply the rest.
inline bool anchored(const SourceRule& rule, const Ball& support, double eta, const SupportMoments* m) {
  return m && rule.far && rho(rule.target, support.center) - support.radius >= eta * SmoothCutoff::outer;
}

inline auto cutoff_weight(double eta) {
  return [eta](double r) {
    const double x = r / eta;
    if (x <= SmoothCutoff::inner) return 0.0;
    if (x >= SmoothCutoff::outer) return 1.0;
    return SmoothCutoff{}(x);
  };
}

}  // namespace detail

/// C_eta f(g) = int K_eta(g, u) f(u) du. f is real, so the product order is
/// immaterial. Shell nodes integrate (f(u) - f(g)) K_eta instead.
inline QuatEstimate apply_C_eta(const KernelEvaluator& ke, const ScalarField& f, double eta, const GroupPoint& g,
                                const QuadratureCfg& cfg, const SupportMoments* moments = nullptr) {
  detail::require_support(f, "apply_C_eta");
  detail::require_eta(eta, "apply_C_eta");
  const SourceRule rule = source_rule(g, *f.support, 0.5 * eta, std::numeric_limits<double>::infinity(), cfg);
  const double fg = f(g);
  Quat anchor{}, offset{};
  if (detail::anchored(rule, *f.support, eta, moments)) {
    anchor = eval_K(ke, g, f.support->center);
    offset = anchor * moments->mass;
  }
  return detail::integrate_kernel(ke, rule, cfg.error_estimate, anchor, offset, detail::cutoff_weight(eta),
                                  [&](std::size_t i) {
                                    const double fu = f(rule.nodes[i]);
                                    return rule.complete_shell[i] ? fu - fg : fu;
                                  });
}

/// [b, C_eta] f(g) = int (b(g) - b(u)) K_eta(g, u) f(u) du on the same nodes as apply_C_eta.
inline QuatEstimate apply_commutator(const KernelEvaluator& ke, const ScalarField& b, const ScalarField& f, double eta,
                                     const GroupPoint& g, const QuadratureCfg& cfg,
                                     const SupportMoments* moments = nullptr) {
  detail::require_support(f, "apply_commutator");
  detail::require_eta(eta, "apply_commutator");
  const SourceRule rule = source_rule(g, *f.support, 0.5 * eta, std::numeric_limits<double>::infinity(), cfg);
  const double bg = b.base(g);
  Quat anchor{}, offset{};
  if (detail::anchored(rule, *f.support, eta, moments)) {
    anchor = eval_K(ke, g, f.support->center);
    offset = anchor * (bg * moments->mass - moments->b_mass);
  }
  return detail::integrate_kernel(ke, rule, cfg.error_estimate, anchor, offset, detail::cutoff_weight(eta),
                                  [&](std::size_t i) {
                                    const double fu = f(rule.nodes[i]);
                                    return fu == 0.0 ? 0.0 : (bg - b.base(rule.nodes[i])) * fu;
                                  });
}

/// [b, C_eta1] f(g) - [b, C_eta2] f(g) as one integral over eta1/2 <= rho < eta2,
/// where the two cutoffs differ.
inline QuatEstimate commutator_truncation_difference(const KernelEvaluator& ke, const ScalarField& b,
                                                     const ScalarField& f, double eta1, double eta2,
                                                     const GroupPoint& g, const QuadratureCfg& cfg) {
  detail::require_support(f, "commutator_truncation_difference");
  detail::require_eta(eta1, "commutator_truncation_difference");
  detail::require_eta(eta2, "commutator_truncation_difference");
  if (eta1 == eta2) {
    QuatEstimate zero;
    zero.replicates.assign(cfg.replicates, Quat{});
    return zero;
  }
  const double lo = std::min(eta1, eta2), hi = std::max(eta1, eta2);
  const double sign = eta1 < eta2 ? 1.0 : -1.0;
  const SourceRule rule = source_rule(g, *f.support, 0.5 * lo, hi, cfg);
  const auto phi_lo = detail::cutoff_weight(lo), phi_hi = detail::cutoff_weight(hi);
  const double bg = b.base(g);
  return detail::integrate_kernel(
      ke, rule, cfg.error_estimate, [&](double r) { return sign * (phi_lo(r) - phi_hi(r)); },
      [&](std::size_t i) {
        const double fu = f(rule.nodes[i]);
        return fu == 0.0 ? 0.0 : (bg - b.base(rule.nodes[i])) * fu;
      });
}

/// max over the eta grid of |C_eta f(g)|; a lower bound for C_* f(g).
inline double maximal_C_star(const KernelEvaluator& ke, const ScalarField& f, const std::vector<double>& etas,
                             const GroupPoint& g, const QuadratureCfg& cfg) {
  if (etas.empty()) throw std::invalid_argument("maximal_C_star: empty eta grid");
  double best = 0.0;
  for (double eta : etas) best = std::max(best, abs(apply_C_eta(ke, f, eta, g, cfg).value));
  return best;
}

/// Centered Hardy-Littlewood maximal function over a radius grid. When f has
/// a support smaller than B(g, r), the integral of |f| over B(g, r) is sampled
/// on the support instead.
inline double hl_maximal(const ScalarField& f, const GroupPoint& g, const std::vector<double>& radii,
                         const SamplingCfg& cfg) {
  if (radii.empty()) throw std::invalid_argument("hl_maximal: empty radius grid");
  double best = 0.0;
  for (double r : radii) {
    const Ball ball(g, r);
    if (f.support && f.support->volume() < ball.volume()) {
      if (rho(g, f.support->center) >= r + f.support->radius) continue;  // disjoint
      const BallRule rule = rule_for(*f.support, cfg);
      std::vector<double> v(rule.size());
      for (std::size_t i = 0; i < rule.size(); ++i) v[i] = ball.contains(rule.nodes[i]) ? std::abs(f(rule.nodes[i])) : 0.0;
      best = std::max(best, integrate(rule, v).value / ball.volume());
      continue;
    }
    const BallRule rule = rule_for(ball, cfg);
    auto v = values_at(f, rule);
    for (double& x : v) x = std::abs(x);
    best = std::max(best, average(rule, v).value);
  }
  return best;
}

/// g -> [b, C_eta] f(g), evaluated lazily and memoized per target.
class CommutatorImage {
 public:
  CommutatorImage(std::shared_ptr<const KernelEvaluator> ke, ScalarField b, ScalarField f, double eta,
                  QuadratureCfg cfg)
      : ke_(std::move(ke)), b_(std::move(b)), f_(std::move(f)), eta_(eta), cfg_(cfg) {
    detail::require_support(f_, "CommutatorImage");
    detail::require_eta(eta_, "CommutatorImage");
    if (cfg_.moment_nodes > 0 && !b_.is_constant()) moments_ = support_moments(&b_, f_, cfg_.moment_nodes);
  }

  const ScalarField& b() const { return b_; }
  const ScalarField& f() const { return f_; }
  double eta() const { return eta_; }
  const QuadratureCfg& config() const { return cfg_; }

  QuatEstimate evaluate(const GroupPoint& g) const {
    const std::uint64_t key = point_key(g);
    {
      std::shared_lock lock(mutex_);
      if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    }
    QuatEstimate v;
    if (b_.is_constant()) {
      v.replicates.assign(cfg_.replicates, Quat{});
    } else {
      v = apply_commutator(*ke_, b_, f_, eta_, g, cfg_, moments_ ? &*moments_ : nullptr);
    }
    std::unique_lock lock(mutex_);
    memo_.emplace(key, v);  // idempotent: equal keys carry equal values
    return v;
  }

  Quat operator()(const GroupPoint& g) const { return evaluate(g).value; }

  /// Estimates at every node, targets in parallel.
  std::vector<QuatEstimate> evaluate_all(const std::vector<GroupPoint>& targets) const {
    std::vector<QuatEstimate> out(targets.size());
    parallel_for(targets.size(), [&](std::size_t i) { out[i] = evaluate(targets[i]); });
    return out;
  }

  /// Estimates of |image|^p at every node; unbiased when p = 2.
  std::vector<double> powers(const std::vector<GroupPoint>& targets, double p) const {
    const auto est = evaluate_all(targets);
    std::vector<double> out(est.size());
    for (std::size_t i = 0; i < est.size(); ++i)
      out[i] = p == 2.0 ? est[i].unbiased_norm2() : std::pow(abs(est[i].value), p);
    return out;
  }

  std::size_t cached() const {
    std::shared_lock lock(mutex_);
    return memo_.size();
  }

 private:
  std::shared_ptr<const KernelEvaluator> ke_;
  ScalarField b_;
  ScalarField f_;
  double eta_;
  QuadratureCfg cfg_;
  std::optional<SupportMoments> moments_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<std::uint64_t, QuatEstimate> memo_;
};

/// Morrey norm of a function known through per-node estimates of |.|^p.
template <typename PowersAt>
SupEstimate morrey_norm_of(PowersAt&& powers_at, const Weight& w, const MorreyParams& mp, const BallFamily& family) {
  mp.validate();
  if (family.empty()) throw std::invalid_argument("morrey_norm_of: empty family");
  SupEstimate out;
  for (std::size_t i = 0; i < family.size(); ++i) {
    const BallRule& r = family.rule(i);
    const Estimate e = morrey_ball_value_from_powers(powers_at(r.nodes), w, mp, r);
    out.per_ball.push_back(e.value);
    out.per_ball_se.push_back(e.std_error);
    if (i == 0 || e.value > out.value) {
      out.value = e.value;
      out.std_error = e.std_error;
      out.argmax = i;
    }
  }
  return out;
}

inline SupEstimate morrey_norm(const CommutatorImage& h, const Weight& w, const MorreyParams& mp,
                               const BallFamily& family) {
  return morrey_norm_of([&](const std::vector<GroupPoint>& nodes) { return h.powers(nodes, mp.p); }, w, mp, family);
}

/// Morrey norm of h1 - h2; unbiased per node when p = 2.
inline SupEstimate morrey_distance(const CommutatorImage& h1, const CommutatorImage& h2, const Weight& w,
                                   const MorreyParams& mp, const BallFamily& family) {
  return morrey_norm_of(
      [&](const std::vector<GroupPoint>& nodes) {
        const auto a = h1.evaluate_all(nodes), b = h2.evaluate_all(nodes);
        std::vector<double> out(nodes.size());
        for (std::size_t i = 0; i < nodes.size(); ++i)
          out[i] = mp.p == 2.0 ? QuatEstimate::unbiased_distance2(a[i], b[i])
                               : std::pow(abs(a[i].value - b[i].value), mp.p);
        return out;
      },
      w, mp, family);
}

struct MorreyRatio {
  double ratio = 0.0;
  double std_error = 0.0;
  SupEstimate image;
  SupEstimate input;
};

/// ||[b, C_eta] f|| / ||f|| in L_w^{p,kappa}, both sups over the same family.
inline MorreyRatio morrey_operator_ratio(const CommutatorImage& h, const Weight& w, const MorreyParams& mp,
                                         const BallFamily& family) {
  MorreyRatio out;
  out.input = morrey_norm(h.f(), w, mp, family);
  if (!(out.input.value > 0.0)) throw std::domain_error("morrey_operator_ratio: f has zero Morrey norm on the family");
  out.image = morrey_norm(h, w, mp, family);
  out.ratio = out.image.value / out.input.value;
  out.std_error = out.image.std_error / out.input.value;
  return out;
}

inline MorreyRatio morrey_operator_ratio(std::shared_ptr<const KernelEvaluator> ke, const ScalarField& b,
                                         const ScalarField& f, const Weight& w, const MorreyParams& mp, double eta,
                                         const BallFamily& family, const QuadratureCfg& cfg) {
  return morrey_operator_ratio(CommutatorImage(std::move(ke), b, f, eta, cfg), w, mp, family);
}

struct TruncationGapRow {
  GroupPoint target;
  QuatEstimate gap;
  double maximal = 0.0;  ///< Mf(g)
  double bound = 0.0;    ///< eta2 * sup|grad_H b| * Mf(g)
  double ratio = 0.0;    ///< |gap| / bound
};

struct TruncationGapTable {
  double eta1 = 0.0;
  double eta2 = 0.0;
  std::vector<TruncationGapRow> rows;
  double fitted_constant = 0.0;  ///< max ratio
};

/// |[b, C_eta1] f - [b, C_eta2] f| against eta2 * sup|grad_H b| * Mf per target.
inline TruncationGapTable truncation_gap(const KernelEvaluator& ke, const ScalarField& b, const ScalarField& f,
                                         double eta1, double eta2, const std::vector<GroupPoint>& targets,
                                         const std::vector<double>& maximal_radii, const QuadratureCfg& cfg,
                                         const SamplingCfg& maximal_cfg) {
  if (!(eta1 <= eta2)) throw std::invalid_argument("truncation_gap: need eta1 <= eta2");
  if (!b.grad_bound) throw std::invalid_argument("truncation_gap: b needs a horizontal-gradient bound");
  TruncationGapTable t;
  t.eta1 = eta1;
  t.eta2 = eta2;
  t.rows.resize(targets.size());
  parallel_for(targets.size(), [&](std::size_t i) {
    TruncationGapRow row;
    row.target = targets[i];
    row.gap = commutator_truncation_difference(ke, b, f, eta1, eta2, targets[i], cfg);
    row.maximal = hl_maximal(f, targets[i], maximal_radii, maximal_cfg);
    row.bound = eta2 * *b.grad_bound * row.maximal;
    row.ratio = row.bound > 0.0 ? abs(row.gap.value) / row.bound : 0.0;
    t.rows[i] = row;
  });
  for (const auto& r : t.rows) t.fitted_constant = std::max(t.fitted_constant, r.ratio);
  return t;
}

}  // namespace qsk
