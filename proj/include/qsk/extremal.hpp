#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsk/ball.hpp"
#include "qsk/fields.hpp"
#include "qsk/function_analysis.hpp"
#include "qsk/kernel_scans.hpp"
#include "qsk/operators.hpp"

namespace qsk {

/// Constants and budgets shared by the extremal-function experiments.
struct ExtremalCfg {
  double A2 = 10.0;
  int K0 = 1;
  int K1 = 2;                  ///< C1 = A2^K1
  double delta = 1e-3;         ///< required mean oscillation M(b; B)
  std::size_t level_set_nodes = 1 << 16;  ///< Sobol nodes for the level-set measures of f0
  double eta_fraction = 1e-3;  ///< eta = eta_fraction * smallest ball radius
  std::size_t targets = 1024;  ///< target nodes per region
  RuleConfig target_rule = [] {
    RuleConfig r = uniform_config(256);
    r.equivariant = true;
    r.radial_strata = 32;
    return r;
  }();
  SamplingCfg sampling;       ///< nodes for medians, level sets and w(B)
  QuadratureCfg quadrature;
  CompanionScanCfg companion;

  double C1() const { return std::pow(A2, K1); }
};

/// The median-split test function of one ball.
struct F0 {
  ScalarField field;
  Ball ball;
  double alpha = 0.0;   ///< lower median of b on the ball
  double above = 0.0;   ///< |{b > alpha}| / |B0|
  double below = 0.0;   ///< |{b < alpha}| / |B0|
  double a0 = 0.0;      ///< above - below, so that f0 has mean zero
  double scale = 0.0;   ///< [w(B0)]^{(kappa - 1)/p}
  Estimate oscillation; ///< M(b; B0)
  bool degenerate = false;  ///< b sits at its median on at least half of B0
};

/// f0 = [w(B0)]^{(kappa-1)/p} (chi_{b > alpha} - chi_{b < alpha} - a0) chi_{B0}.
/// alpha and the level-set measures behind a0 come from one node set, a Sobol
/// rule with level_set_nodes points (0: the sampled rule), so the median bounds
/// hold exactly on it and f0 has mean zero to quadrature accuracy.
inline F0 build_f0(const ScalarField& b, const Ball& B0, const Weight& w, const MorreyParams& mp,
                   const SamplingCfg& cfg, std::size_t level_set_nodes = 1 << 16) {
  mp.validate();
  const BallRule rule = rule_for(B0, cfg);
  const BallRule split_rule = level_set_nodes > 0 ? qmc_ball_rule(B0, level_set_nodes) : rule;
  const auto v = values_at(b, split_rule);
  F0 out;
  out.ball = B0;
  out.alpha = weighted_lower_median(v, split_rule.weights);
  const MedianSplit split = median_split(v, split_rule.weights, out.alpha);
  out.above = split.above;
  out.below = split.below;
  out.a0 = split.above - split.below;
  if (std::abs(out.a0) > 0.5 + 1e-12) throw std::logic_error("build_f0: |a0| > 1/2 contradicts the median split");
  out.scale = std::pow(weighted_measure(w, rule).value, (mp.kappa - 1.0) / mp.p);
  out.oscillation = mean_oscillation(b, rule);
  out.degenerate = split.above + split.below < 0.5;

  ScalarField f;
  f.name = "f0";
  f.base = [b, B0, alpha = out.alpha, a0 = out.a0, scale = out.scale](const GroupPoint& g) {
    if (!B0.contains(g)) return 0.0;
    const double x = b(g);
    return scale * (static_cast<double>(x > alpha) - static_cast<double>(x < alpha) - a0);
  };
  f.support = B0;
  f.smoothness = "measurable";
  out.field = std::move(f);
  return out;
}

struct F0BoundRow {
  int k = 0;
  CompanionBall companion;  ///< companion of A2^{k-1} B0
  Estimate lower;           ///< int over the companion of |[b, C] f0|^p w
  Estimate upper;           ///< int over A2^{k+1} B0 \ A2^k B0 of the same
  double normalizer = 0.0;  ///< A2^{-kpQ} [w(B0)]^{kappa-1} w(A2^k B0)
  double lower_value = 0.0;
  double lower_se = 0.0;
  double upper_value = 0.0;
  double upper_se = 0.0;
};

struct F0BoundTable {
  F0 f0;
  double eta = 0.0;
  std::vector<F0BoundRow> rows;
  double floor = 0.0;        ///< min lower value over rows with a companion
  double cap = 0.0;          ///< max upper value
  double cap_spread = 0.0;   ///< max / min upper value across k
  double ratio = 0.0;        ///< cap / floor
  bool all_companions = false;
};

/// Lower and upper image integrals of f0 at scales A2^k, normalized so that
/// both stay bounded away from 0 and infinity uniformly in k.
inline F0BoundTable f0_bound_check(std::shared_ptr<const KernelEvaluator> ke, const ScalarField& b, const Ball& B0,
                                   const Weight& w, const MorreyParams& mp, const std::vector<int>& ks,
                                   const ExtremalCfg& cfg) {
  if (ks.empty()) throw std::invalid_argument("f0_bound_check: empty k range");
  for (int k : ks)
    if (k < 1) throw std::invalid_argument("f0_bound_check: k must be at least 1");
  F0BoundTable t;
  t.f0 = build_f0(b, B0, w, mp, cfg.sampling, cfg.level_set_nodes);
  if (!(t.f0.oscillation.value > cfg.delta))
    throw std::domain_error("f0_bound_check: M(b; B0) does not exceed delta");
  t.eta = cfg.eta_fraction * B0.radius;
  const CommutatorImage h(ke, b, t.f0.field, t.eta, cfg.quadrature);
  const int Q = B0.dims().Q();
  const double wB0 = std::pow(t.f0.scale, mp.p);  // [w(B0)]^{kappa - 1}
  const std::uint64_t seed = cfg.quadrature.seed;

  const auto integral = [&](const BallRule& rule) {
    auto v = h.powers(rule.nodes, mp.p);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] *= w(rule.nodes[i]);
    return integrate(rule, v);
  };

  t.floor = std::numeric_limits<double>::infinity();
  double upper_min = std::numeric_limits<double>::infinity();
  t.all_companions = true;
  for (int k : ks) {
    F0BoundRow row;
    row.k = k;
    const double scale_k = std::pow(cfg.A2, k);
    row.normalizer = std::pow(scale_k, -mp.p * Q) * wB0 * weighted_measure(w, B0.scaled(scale_k), cfg.sampling).value;

    row.companion = companion_ball(*ke, B0.scaled(scale_k / cfg.A2), cfg.companion, substream(seed, 0x636f6dULL + k));
    if (row.companion.found) {
      RuleConfig rc = cfg.target_rule;
      rc.samples_per_ball = cfg.targets;
      row.lower = integral(make_rule(row.companion.ball, rc, substream(seed, 0x6c6fULL + k)));
      row.lower_value = row.lower.value / row.normalizer;
      row.lower_se = row.lower.std_error / row.normalizer;
      t.floor = std::min(t.floor, row.lower_value);
    } else {
      t.all_companions = false;
    }

    row.upper = integral(log_shell_rule(B0.center, scale_k * B0.radius, cfg.A2 * scale_k * B0.radius, cfg.targets,
                                        substream(seed, 0x7570ULL + k)));
    row.upper_value = row.upper.value / row.normalizer;
    row.upper_se = row.upper.std_error / row.normalizer;
    t.cap = std::max(t.cap, row.upper_value);
    upper_min = std::min(upper_min, row.upper_value);
    t.rows.push_back(row);
  }
  if (!std::isfinite(t.floor)) t.floor = 0.0;
  t.cap_spread = upper_min > 0.0 ? t.cap / upper_min : std::numeric_limits<double>::infinity();
  t.ratio = t.floor > 0.0 ? t.cap / t.floor : std::numeric_limits<double>::infinity();
  return t;
}

/// Grids and budgets for the Kolmogorov-Riesz conditions.
struct KrCfg {
  std::vector<double> tail_M{2.0, 4.0, 8.0, 16.0};
  std::vector<double> tail_ball_factors{1.5, 2.0, 4.0, 8.0};  ///< tail balls B(0, factor * M)
  std::vector<double> xi_norms{0.0, 0.05, 0.1, 0.2};
  int xi_directions = 4;
  std::size_t tail_targets = 1024;
  SamplingCfg sampling;  ///< for w(B) of the tail balls
  std::uint64_t seed = 1;
};

struct KrReport {
  SupEstimate bound;                 ///< (i) sup over images of the Morrey norm
  std::vector<double> tail;          ///< (ii) per M
  std::vector<double> tail_se;
  double tail_exponent = 0.0;        ///< -slope of log tail against log M
  std::vector<double> translation;   ///< (iii) per xi norm
  std::vector<double> translation_se;
};

/// (i) uniform Morrey bound, (ii) tails ||h chi_{||.|| > M}||, (iii) right
/// translations ||h(. xi) - h||, each a sup over the images.
inline KrReport kr_conditions(const std::vector<std::shared_ptr<const CommutatorImage>>& images, const Weight& w,
                              const MorreyParams& mp, const BallFamily& family, const KrCfg& cfg) {
  mp.validate();
  if (images.empty()) throw std::invalid_argument("kr_conditions: empty image family");
  if (family.empty()) throw std::invalid_argument("kr_conditions: empty ball family");
  KrReport out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const SupEstimate s = morrey_norm(*images[i], w, mp, family);
    if (i == 0 || s.value > out.bound.value) out.bound = s;
  }

  const GroupDims d = family.ball(0).dims();
  const GroupPoint o = GroupPoint::identity(d);
  for (double M : cfg.tail_M) {
    if (!(M > 0.0)) throw std::invalid_argument("kr_conditions: tail radii must be positive");
    double best = 0.0, best_se = 0.0;
    for (double factor : cfg.tail_ball_factors) {
      if (!(factor > 1.0)) throw std::invalid_argument("kr_conditions: tail ball factors must exceed 1");
      const BallRule rule = log_shell_rule(o, M, factor * M, cfg.tail_targets, cfg.seed);
      const double wB = weighted_measure(w, Ball(o, factor * M), cfg.sampling).value;
      for (const auto& h : images) {
        auto v = h->powers(rule.nodes, mp.p);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] *= w(rule.nodes[i]);
        const Estimate e = integrate(rule, v);
        const double inner = std::max(0.0, e.value) / std::pow(wB, mp.kappa);
        const double val = std::pow(inner, 1.0 / mp.p);
        if (val > best) {
          best = val;
          best_se = inner > 0.0 ? val / (mp.p * inner) * e.std_error / std::pow(wB, mp.kappa) : 0.0;
        }
      }
    }
    out.tail.push_back(best);
    out.tail_se.push_back(best_se);
  }
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < out.tail.size(); ++i) {
    if (!(out.tail[i] > 0.0)) continue;
    lx.push_back(std::log(cfg.tail_M[i]));
    ly.push_back(std::log(out.tail[i]));
  }
  if (lx.size() >= 2) out.tail_exponent = -fit_line(lx, ly).slope;

  Rng rng(substream(cfg.seed, 0x7869ULL));
  for (double norm : cfg.xi_norms) {
    if (!(norm >= 0.0)) throw std::invalid_argument("kr_conditions: xi norms must be nonnegative");
    double best = 0.0, best_se = 0.0;
    const int dirs = norm == 0.0 ? 1 : cfg.xi_directions;
    for (int k = 0; k < dirs; ++k) {
      const GroupPoint xi = norm == 0.0 ? o : dilate(norm, sample_unit_sphere(d, rng));
      for (const auto& h : images) {
        const SupEstimate s = morrey_norm_of(
            [&](const std::vector<GroupPoint>& nodes) {
              std::vector<double> v(nodes.size(), 0.0);
              if (norm == 0.0) return v;
              std::vector<GroupPoint> moved(nodes.size());
              for (std::size_t i = 0; i < nodes.size(); ++i) moved[i] = gmul(nodes[i], xi);
              const auto a = h->evaluate_all(moved), b = h->evaluate_all(nodes);
              for (std::size_t i = 0; i < nodes.size(); ++i)
                v[i] = mp.p == 2.0 ? QuatEstimate::unbiased_distance2(a[i], b[i])
                                   : std::pow(abs(a[i].value - b[i].value), mp.p);
              return v;
            },
            w, mp, family);
        if (s.value > best || (best == 0.0 && s.value == 0.0)) {
          best = s.value;
          best_se = s.std_error;
        }
      }
    }
    out.translation.push_back(best);
    out.translation_se.push_back(best_se);
  }
  return out;
}

struct SeparationResult {
  std::vector<F0> f0;
  std::vector<std::vector<double>> distance;  ///< Morrey distances of the images
  std::vector<std::vector<double>> distance_se;
  std::vector<double> nearest;                ///< per ball, min distance to the others
  double min_offdiag = 0.0;
  double eta = 0.0;
  std::vector<std::string> violations;        ///< precondition failures, per pair or ball
};

/// Pairwise Morrey distances of [b, C_eta] f_j for the median-split functions
/// f_j of a ball sequence. Distances are sups over the balls lambda B_j,
/// lambda in eval_scales, with equivariant target rules.
inline SeparationResult separation_probe(std::shared_ptr<const KernelEvaluator> ke, const ScalarField& b,
                                         const std::vector<Ball>& balls, const Weight& w, const MorreyParams& mp,
                                         const ExtremalCfg& cfg, const std::vector<double>& eval_scales = {1.0, 2.0, 4.0}) {
  if (balls.empty()) throw std::invalid_argument("separation_probe: empty ball sequence");
  if (eval_scales.empty()) throw std::invalid_argument("separation_probe: empty evaluation scales");
  SeparationResult out;
  const std::size_t J = balls.size();
  const double reach = cfg.A2 * cfg.C1();
  for (std::size_t l = 0; l < J; ++l)
    for (std::size_t m = l + 1; m < J; ++m)
      if (rho(balls[l].center, balls[m].center) < reach * (balls[l].radius + balls[m].radius))
        out.violations.push_back("balls " + std::to_string(l) + "," + std::to_string(m) +
                                 ": A2 C1 dilates intersect");

  double r_min = balls[0].radius;
  for (const auto& ball : balls) r_min = std::min(r_min, ball.radius);
  out.eta = cfg.eta_fraction * r_min;

  std::vector<std::shared_ptr<const CommutatorImage>> images;
  for (std::size_t j = 0; j < J; ++j) {
    out.f0.push_back(build_f0(b, balls[j], w, mp, cfg.sampling, cfg.level_set_nodes));
    if (!(out.f0.back().oscillation.value > cfg.delta))
      out.violations.push_back("ball " + std::to_string(j) + ": M(b; B) does not exceed delta");
    images.push_back(std::make_shared<const CommutatorImage>(ke, b, out.f0.back().field, out.eta, cfg.quadrature));
  }

  std::vector<Ball> eval;
  for (const auto& ball : balls)
    for (double lambda : eval_scales) eval.push_back(ball.scaled(lambda));
  const BallFamily family(eval, cfg.target_rule, cfg.quadrature.seed);

  out.distance.assign(J, std::vector<double>(J, 0.0));
  out.distance_se.assign(J, std::vector<double>(J, 0.0));
  for (std::size_t l = 0; l < J; ++l)
    for (std::size_t m = l + 1; m < J; ++m) {
      const SupEstimate s = morrey_distance(*images[l], *images[m], w, mp, family);
      out.distance[l][m] = out.distance[m][l] = s.value;
      out.distance_se[l][m] = out.distance_se[m][l] = s.std_error;
    }
  out.nearest.assign(J, 0.0);
  out.min_offdiag = J > 1 ? std::numeric_limits<double>::infinity() : 0.0;
  for (std::size_t l = 0; l < J && J > 1; ++l) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < J; ++k)
      if (k != l) m = std::min(m, out.distance[l][k]);
    out.nearest[l] = m;
    out.min_offdiag = std::min(out.min_offdiag, m);
  }
  return out;
}

}  // namespace qsk
