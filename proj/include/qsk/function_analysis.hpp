#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsk/ball.hpp"
#include "qsk/fields.hpp"
#include "qsk/parallel.hpp"

namespace qsk {

/// Exponents of L_w^{p,kappa}.
struct MorreyParams {
  double p = 2.0;
  double kappa = 0.5;

  void validate() const {
    if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("MorreyParams: p must lie in (1, inf)");
    if (!(kappa > 0.0 && kappa < 1.0)) throw std::invalid_argument("MorreyParams: kappa must lie in (0, 1)");
  }
};

/// Rule settings and seed for single-ball estimators.
struct SamplingCfg {
  RuleConfig rule;
  std::uint64_t seed = 1;
};

/// Same seed derivation as BallFamily, so a ball gets the same nodes either way.
inline BallRule rule_for(const Ball& b, const SamplingCfg& cfg) {
  return make_rule(b, cfg.rule, substream(cfg.seed, b.key()));
}

inline std::vector<double> values_at(const ScalarField& f, const BallRule& rule) {
  std::vector<double> v(rule.size());
  for (std::size_t i = 0; i < rule.size(); ++i) v[i] = f(rule.nodes[i]);
  return v;
}

/// A sampled sup over a ball family: lower bound for the true sup.
struct SupEstimate {
  double value = 0.0;
  double std_error = 0.0;      ///< of the maximizing ball's estimate
  std::size_t argmax = 0;
  std::vector<double> per_ball;
  std::vector<double> per_ball_se;
};

namespace detail {

template <typename PerBall>
SupEstimate family_sup(const BallFamily& family, PerBall&& per_ball) {
  if (family.empty()) throw std::invalid_argument("empty ball family");
  SupEstimate out;
  out.per_ball.resize(family.size());
  out.per_ball_se.resize(family.size());
  parallel_for(family.size(), [&](std::size_t i) {
    const Estimate e = per_ball(family.rule(i));
    out.per_ball[i] = e.value;
    out.per_ball_se[i] = e.std_error;
  });
  for (std::size_t i = 0; i < family.size(); ++i) {
    if (i == 0 || out.per_ball[i] > out.value) {
      out.value = out.per_ball[i];
      out.std_error = out.per_ball_se[i];
      out.argmax = i;
    }
  }
  return out;
}

}  // namespace detail

/// Weighted lower median: min{v : W(f <= v) >= W/2}. At most half the weight
/// lies strictly above and at most half strictly below.
inline double weighted_lower_median(const std::vector<double>& v, const std::vector<double>& w) {
  if (v.empty() || v.size() != w.size()) throw std::invalid_argument("median: need matching nonempty samples");
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  double acc = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    acc += w[order[k]];
    // ties: advance to the last equal value before testing
    if (k + 1 < order.size() && v[order[k + 1]] == v[order[k]]) continue;
    if (2.0 * acc >= total) return v[order[k]];
  }
  return v[order.back()];
}

/// Weight fractions strictly above and strictly below alpha.
struct MedianSplit {
  double above = 0.0;
  double below = 0.0;
};

inline MedianSplit median_split(const std::vector<double>& v, const std::vector<double>& w, double alpha) {
  double total = 0.0, above = 0.0, below = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    total += w[i];
    if (v[i] > alpha) above += w[i];
    if (v[i] < alpha) below += w[i];
  }
  return {above / total, below / total};
}

/// w(B) = int_B w, self-normalized so that w == 1 gives |B| exactly.
inline Estimate weighted_measure(const Weight& w, const BallRule& rule) {
  const Estimate avg = average(rule, values_at(w.field, rule));
  const double vol = rule.ball.volume();
  return {vol * avg.value, vol * avg.std_error};
}

inline Estimate weighted_measure(const Weight& w, const Ball& b, const SamplingCfg& cfg) {
  return weighted_measure(w, rule_for(b, cfg));
}

inline double median(const ScalarField& f, const BallRule& rule) {
  return weighted_lower_median(values_at(f, rule), rule.weights);
}

inline double median(const ScalarField& f, const Ball& b, const SamplingCfg& cfg) {
  return median(f, rule_for(b, cfg));
}

/// M(f; B) = |B|^{-1} int_B |f - f_B|.
inline Estimate mean_oscillation(const ScalarField& f, const BallRule& rule) {
  auto v = values_at(f, rule);
  const double mean = average(rule, v).value;
  for (double& x : v) x = std::abs(x - mean);
  return average(rule, v);
}

inline Estimate mean_oscillation(const ScalarField& f, const Ball& b, const SamplingCfg& cfg) {
  return mean_oscillation(f, rule_for(b, cfg));
}

/// (|B|^{-1} int_B |f - f_B|^p)^{1/p}; p == 1 is mean_oscillation.
inline Estimate mean_oscillation_p(const ScalarField& f, const BallRule& rule, double p) {
  if (p == 1.0) return mean_oscillation(f, rule);
  auto v = values_at(f, rule);
  const double mean = average(rule, v).value;
  for (double& x : v) x = std::pow(std::abs(x - mean), p);
  const Estimate m = average(rule, v);
  const double val = std::pow(m.value, 1.0 / p);
  // delta method
  const double se = m.value > 0.0 ? val / (p * m.value) * m.std_error : 0.0;
  return {val, se};
}

inline SupEstimate bmo_norm(const ScalarField& b, const BallFamily& family) {
  return detail::family_sup(family, [&](const BallRule& r) { return mean_oscillation(b, r); });
}

inline SupEstimate bmo_p_norm(const ScalarField& b, const BallFamily& family, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("bmo_p_norm: p must be >= 1");
  return detail::family_sup(family, [&](const BallRule& r) { return mean_oscillation_p(b, r, p); });
}

/// avg(w) / sampled essential inf of w, per ball.
inline SupEstimate a1_characteristic(const Weight& w, const BallFamily& family) {
  return detail::family_sup(family, [&](const BallRule& r) {
    const auto v = values_at(w.field, r);
    const Estimate avg = average(r, v);
    const double inf = *std::min_element(v.begin(), v.end());
    if (!(inf > 0.0)) throw std::domain_error("a1_characteristic: weight is not positive");
    return Estimate{avg.value / inf, avg.std_error / inf};
  });
}

/// sup_B avg_B(w) * avg_B(w^{-1/(p-1)})^{p-1}; p <= 1 is routed to A_1.
inline SupEstimate ap_characteristic(const Weight& w, double p, const BallFamily& family) {
  if (!(p > 1.0)) return a1_characteristic(w, family);
  return detail::family_sup(family, [&](const BallRule& r) {
    const auto v = values_at(w.field, r);
    std::vector<double> dual(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!(v[i] > 0.0)) throw std::domain_error("ap_characteristic: weight is not positive");
      dual[i] = std::pow(v[i], -1.0 / (p - 1.0));
    }
    const Estimate a = average(r, v), b = average(r, dual);
    const double val = a.value * std::pow(b.value, p - 1.0);
    const double rel = std::hypot(a.std_error / a.value, (p - 1.0) * b.std_error / b.value);
    return Estimate{val, val * rel};
  });
}

struct DoublingTable {
  std::vector<double> lambdas;
  std::vector<double> ratios;  ///< w(lambda B) / (lambda^{Qp} w(B))
  std::vector<double> std_errors;
  double fitted_constant = 0.0;  ///< max ratio
};

inline DoublingTable doubling_check(const Weight& w, double p, const Ball& b, const std::vector<double>& lambdas,
                                    const SamplingCfg& cfg) {
  const int Q = b.dims().Q();
  const Estimate base = weighted_measure(w, b, cfg);
  DoublingTable t;
  for (double lam : lambdas) {
    if (!(lam >= 1.0)) throw std::invalid_argument("doubling_check: lambdas must be >= 1");
    const Estimate big = weighted_measure(w, b.scaled(lam), cfg);
    const double scale = std::pow(lam, Q * p);
    const double ratio = big.value / (scale * base.value);
    t.lambdas.push_back(lam);
    t.ratios.push_back(ratio);
    t.std_errors.push_back(ratio * std::hypot(big.std_error / big.value, base.std_error / base.value));
    t.fitted_constant = std::max(t.fitted_constant, ratio);
  }
  return t;
}

/// ([w(B)]^{-kappa} int_B P w)^{1/p} for one ball, where P estimates |f|^p at
/// each node. P may be an unbiased estimate that is negative at single nodes;
/// the integral is clamped at zero.
inline Estimate morrey_ball_value_from_powers(const std::vector<double>& powers, const Weight& w,
                                              const MorreyParams& mp, const BallRule& r) {
  const auto wv = values_at(w.field, r);
  std::vector<double> integrand(wv.size());
  for (std::size_t i = 0; i < wv.size(); ++i) integrand[i] = powers[i] * wv[i];
  const Estimate wb = weighted_measure(w, r);
  const Estimate num = integrate(r, integrand);
  // int_B P w, normalized by the same nodes' weight sum
  const double scale = r.ball.volume() / r.weight_sum();
  const double inner = std::max(0.0, scale * num.value / std::pow(wb.value, mp.kappa));
  const double val = std::pow(inner, 1.0 / mp.p);
  const double se = inner > 0.0 ? val / mp.p * (scale * num.std_error / std::pow(wb.value, mp.kappa)) / inner : 0.0;
  return {val, se};
}

/// ([w(B)]^{-kappa} int_B |f|^p w)^{1/p} for one ball.
inline Estimate morrey_ball_value(const std::vector<double>& fvals, const Weight& w, const MorreyParams& mp,
                                  const BallRule& r) {
  std::vector<double> powers(fvals.size());
  for (std::size_t i = 0; i < fvals.size(); ++i) powers[i] = std::pow(std::abs(fvals[i]), mp.p);
  return morrey_ball_value_from_powers(powers, w, mp, r);
}

inline SupEstimate morrey_norm(const ScalarField& f, const Weight& w, const MorreyParams& mp,
                               const BallFamily& family) {
  mp.validate();
  return detail::family_sup(family, [&](const BallRule& r) { return morrey_ball_value(values_at(f, r), w, mp, r); });
}

/// Per-ball statistics of a field against a weight.
struct BallStats {
  std::size_t id = 0;
  Ball ball;
  std::size_t samples = 0;
  Estimate average;        ///< f_B
  Estimate weighted_measure;
  Estimate weighted_mean;  ///< b_{B,w}
  Estimate oscillation;    ///< M(f; B)
  double median = 0.0;
};

inline std::vector<BallStats> ball_stats(const ScalarField& f, const Weight& w, const BallFamily& family) {
  std::vector<BallStats> out(family.size());
  parallel_for(family.size(), [&](std::size_t i) {
    const BallRule& r = family.rule(i);
    const auto fv = values_at(f, r);
    const auto wv = values_at(w.field, r);
    std::vector<double> fw(fv.size());
    for (std::size_t k = 0; k < fv.size(); ++k) fw[k] = fv[k] * wv[k];
    BallStats s;
    s.id = i;
    s.ball = r.ball;
    s.samples = r.size();
    s.average = average(r, fv);
    s.weighted_measure = weighted_measure(w, r);
    const Estimate fwavg = average(r, fw), wavg = average(r, wv);
    s.weighted_mean = {fwavg.value / wavg.value, fwavg.std_error / wavg.value};
    s.oscillation = mean_oscillation(f, r);
    s.median = weighted_lower_median(fv, r.weights);
    out[i] = s;
  });
  return out;
}

inline constexpr const char* kBallStatsSchema = "# schema: qsk.ball_stats/1";

inline void write_ball_stats_csv(std::ostream& os, const std::vector<BallStats>& stats) {
  os << kBallStatsSchema << '\n';
  os << "ball_id,radius";
  for (int k = 0; k < 3; ++k) os << ",center_t" << k + 1;
  const int ydim = stats.empty() ? 4 : stats.front().ball.center.ydim;
  for (int k = 0; k < ydim; ++k) os << ",center_y" << k + 1;
  os << ",samples,average,average_se,weighted_measure,weighted_measure_se,weighted_mean,weighted_mean_se,"
        "oscillation,oscillation_se,median\n";
  os.precision(17);
  for (const auto& s : stats) {
    os << s.id << ',' << s.ball.radius;
    for (int k = 0; k < 3; ++k) os << ',' << s.ball.center.t[k];
    for (int k = 0; k < ydim; ++k) os << ',' << s.ball.center.y[k];
    os << ',' << s.samples << ',' << s.average.value << ',' << s.average.std_error << ','
       << s.weighted_measure.value << ',' << s.weighted_measure.std_error << ',' << s.weighted_mean.value << ','
       << s.weighted_mean.std_error << ',' << s.oscillation.value << ',' << s.oscillation.std_error << ','
       << s.median << '\n';
  }
}

/// Least-squares line y = a + b x with coefficient of determination.
struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  LinearFit fit;
  fit.points = x.size();
  if (x.size() < 2) return fit;
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return fit;
}

/// Settings for the three vanishing-oscillation curves.
struct VmoCfg {
  GroupDims dims{2};
  std::vector<double> small_radii;  ///< curve (i), decreasing
  std::vector<double> large_radii;  ///< curve (ii), increasing
  std::vector<double> far_radii;    ///< curve (iii): r for the excluded ball B(0, r)
  int centers = 12;                 ///< sampled centers per radius
  double center_spread = 2.0;       ///< curves (i)/(ii): centers with norm up to this
  RuleConfig rule;
  std::uint64_t seed = 1;

  static VmoCfg defaults(GroupDims d) {
    VmoCfg c;
    c.dims = d;
    c.small_radii = log_spaced(1e-4, 1.0, 9);
    std::reverse(c.small_radii.begin(), c.small_radii.end());
    c.large_radii = log_spaced(1.0, 1e4, 9);
    c.far_radii = log_spaced(0.1, 1e3, 9);
    c.rule.samples_per_ball = 1024;
    return c;
  }
};

struct VmoCurve {
  std::vector<double> parameter;
  std::vector<double> sup_oscillation;
  LinearFit tail;  ///< log-log fit over the last half of the curve
};

struct VmoDiagnostics {
  VmoCurve small_balls;  ///< (i)
  VmoCurve large_balls;  ///< (ii)
  VmoCurve far_balls;    ///< (iii)
};

namespace detail {

/// Sampled centers for curve (i)/(ii): the identity plus points of norm up to `spread`.
inline std::vector<GroupPoint> vmo_centers(const VmoCfg& cfg, double spread, std::uint64_t seed) {
  std::vector<GroupPoint> out{GroupPoint::identity(cfg.dims)};
  if (cfg.centers > 1) {
    auto more = spread_centers(cfg.dims, cfg.centers - 1, spread * 1e-3, spread, seed);
    out.insert(out.end(), more.begin(), more.end());
  }
  return out;
}

inline void fit_tail(VmoCurve& c) {
  std::vector<double> x, y;
  for (std::size_t i = c.parameter.size() / 2; i < c.parameter.size(); ++i) {
    if (c.sup_oscillation[i] > 0.0) {
      x.push_back(std::log(c.parameter[i]));
      y.push_back(std::log(c.sup_oscillation[i]));
    }
  }
  c.tail = fit_line(x, y);
}

}  // namespace detail

/// Curves of sup M(b; B) over sampled balls: (i) radius a -> 0, (ii) radius
/// a -> infinity, (iii) balls outside B(0, r) as r -> infinity.
inline VmoDiagnostics vmo_diagnostics(const ScalarField& b, const VmoCfg& cfg) {
  VmoDiagnostics out;
  auto curve = [&](const std::vector<double>& params, auto&& balls_for) {
    VmoCurve c;
    for (std::size_t k = 0; k < params.size(); ++k) {
      const BallFamily fam(balls_for(params[k], k), cfg.rule, substream(cfg.seed, k));
      c.parameter.push_back(params[k]);
      c.sup_oscillation.push_back(bmo_norm(b, fam).value);
    }
    detail::fit_tail(c);
    return c;
  };
  const auto centers = detail::vmo_centers(cfg, cfg.center_spread, substream(cfg.seed, 101));
  out.small_balls = curve(cfg.small_radii, [&](double a, std::size_t) { return balls_from(centers, {a}); });
  out.large_balls = curve(cfg.large_radii, [&](double a, std::size_t) { return balls_from(centers, {a}); });
  out.far_balls = curve(cfg.far_radii, [&](double r, std::size_t k) {
    // balls B(c, s) with ||c|| >= r + s lie outside B(0, r)
    std::vector<Ball> balls;
    Rng rng(substream(cfg.seed, 202 + k));
    for (int i = 0; i < cfg.centers; ++i) {
      const double s = r * std::pow(2.0, -(i % 4));
      const double norm = (r + s) * (1.0 + rng.uniform());
      balls.emplace_back(dilate(norm, sample_unit_sphere(cfg.dims, rng)), s);
    }
    return balls;
  });
  return out;
}

struct LevelSetTable {
  std::vector<double> alphas;
  std::vector<double> fractions;  ///< |{g in B : |b - b_B| > alpha}| / |B|
  LinearFit fit;                   ///< log fraction against alpha, over positive fractions
};

inline LevelSetTable jn_levelset_decay(const ScalarField& b, const Ball& ball, const std::vector<double>& alphas,
                                       const SamplingCfg& cfg) {
  const BallRule r = rule_for(ball, cfg);
  const auto v = values_at(b, r);
  const double mean = average(r, v).value;
  LevelSetTable t;
  std::vector<double> x, y;
  for (double a : alphas) {
    std::vector<double> ind(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) ind[i] = std::abs(v[i] - mean) > a ? 1.0 : 0.0;
    const double frac = average(r, ind).value;
    t.alphas.push_back(a);
    t.fractions.push_back(frac);
    if (frac > 0.0) {
      x.push_back(a);
      y.push_back(std::log(frac));
    }
  }
  t.fit = fit_line(x, y);
  return t;
}

}  // namespace qsk
