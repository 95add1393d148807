#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "qsk/function_analysis.hpp"

using namespace qsk;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const GroupDims d2(2);

GroupPoint origin() { return GroupPoint::identity(d2); }

ScalarField half_space_indicator() {
  ScalarField f;
  f.name = "y1>0";
  f.base = [](const GroupPoint& g) { return g.y[0] > 0.0 ? 1.0 : 0.0; };
  return f;
}

SamplingCfg cfg_with(std::size_t n, std::uint64_t seed, bool singular = false) {
  SamplingCfg c;
  c.rule.samples_per_ball = n;
  if (singular) c.rule.singular = origin();
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("weighted measure", "[function_analysis]") {
  const Ball b(origin(), 1.3);
  const auto one = weighted_measure(weights::unit(), b, cfg_with(4000, 1));
  CHECK_THAT(one.value, WithinRel(b.volume(), 1e-12));
  const auto two = weighted_measure(weights::scaled(weights::unit(), 2.0), b, cfg_with(4000, 1));
  CHECK_THAT(two.value, WithinRel(2.0 * b.volume(), 1e-12));

  // power weight a = 1 on B(0,1): exact value Q omega / (Q + 1)
  const Ball unit(origin(), 1.0);
  const auto w1 = weights::power(d2, 1.0);
  const double exact = 10.0 / 11.0 * unit.volume();
  for (bool singular : {false, true}) {
    const auto a = weighted_measure(w1, unit, cfg_with(40000, 2, singular));
    const auto c = weighted_measure(w1, unit, cfg_with(40000, 3, singular));
    CHECK_THAT(a.value, WithinRel(c.value, 0.01));
    CHECK_THAT(a.value, WithinRel(exact, 0.01));
    CHECK(a.std_error > 0.0);
  }
}

TEST_CASE("polar rule integrates power weights across the singularity", "[function_analysis]") {
  // int_{B(0,1)} ||g||^a = Q omega / (Q + a) for a > -Q
  const Ball unit(origin(), 1.0);
  for (double a : {-9.0, -4.0, 2.0}) {
    const auto w = weights::power(d2, a);
    const BallRule r = polar_rule(unit, origin(), 20000, 12, 4, 7);
    const auto v = values_at(w.field, r);
    const Estimate e = integrate(r, v);
    const double exact = 10.0 / (10.0 + a) * unit.volume();
    CHECK(std::abs(e.value - exact) <= 4.0 * e.std_error);
    if (a > -5.0) CHECK_THAT(e.value, WithinRel(exact, 0.02));
  }
  // off-center singular point, still in the ball
  GroupPoint c = origin();
  c.y[1] = 0.4;
  const Ball shifted(c, 1.0);
  const BallRule r = polar_rule(shifted, origin(), 40000, 8, 2, 9);
  std::vector<double> ones(r.size(), 1.0);
  const Estimate vol = integrate(r, ones);
  CHECK(std::abs(vol.value - shifted.volume()) <= 4.0 * vol.std_error);
}

TEST_CASE("median and its split conditions", "[function_analysis]") {
  const Ball unit(origin(), 1.0);
  const auto cfg = cfg_with(2001, 4);
  CHECK(median(fields::constant(5.0), unit, cfg) == 5.0);
  CHECK(weighted_lower_median({-1, 1, -1, 1}, {1, 1, 1, 1}) == -1.0);
  CHECK(weighted_lower_median({3, 1, 2}, {1, 1, 1}) == 2.0);
  CHECK(weighted_lower_median({0, 0, 1, 1}, {1, 1, 1, 1}) == 0.0);

  // indicator of a sub-ball with a quarter of the measure: median 0
  GroupPoint c = origin();
  const Ball quarter(c, std::pow(0.25, 0.1));
  CHECK(median(fields::ball_indicator(quarter), unit, cfg) == 0.0);

  // split conditions hold exactly for every sample set, ties included
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.next() % 50;
    std::vector<double> v(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = static_cast<double>(rng.next() % 5);
      w[i] = trial % 2 ? 1.0 : 0.1 + rng.uniform();
    }
    const double a = weighted_lower_median(v, w);
    const auto split = median_split(v, w, a);
    REQUIRE(split.above <= 0.5 + 1e-12);
    REQUIRE(split.below <= 0.5 + 1e-12);
  }
  const auto r = rule_for(unit, cfg);
  const auto hv = values_at(half_space_indicator(), r);
  const double a = weighted_lower_median(hv, r.weights);
  const auto split = median_split(hv, r.weights, a);
  CHECK(split.above <= 0.5);
  CHECK(split.below <= 0.5);
}

TEST_CASE("mean oscillation", "[function_analysis]") {
  const Ball unit(origin(), 1.0);
  const auto cfg = cfg_with(20000, 6);
  CHECK(mean_oscillation(fields::constant(3.0), unit, cfg).value == 0.0);
  const auto m = mean_oscillation(half_space_indicator(), unit, cfg);
  CHECK_THAT(m.value, WithinAbs(0.5, 0.005));

  // M(f;B) <= 2 mean |f - alpha_B|
  const auto f = fields::log_hnorm(d2);
  const auto r = rule_for(unit, cfg);
  auto v = values_at(f, r);
  const double alpha = weighted_lower_median(v, r.weights);
  for (double& x : v) x = std::abs(x - alpha);
  CHECK(mean_oscillation(f, r).value <= 2.0 * average(r, v).value);
}

TEST_CASE("BMO estimators", "[function_analysis]") {
  RuleConfig rc;
  rc.samples_per_ball = 2048;
  rc.singular = origin();
  const auto centers = spread_centers(d2, 6, 0.01, 10.0, 3);
  std::vector<GroupPoint> with_origin{origin()};
  with_origin.insert(with_origin.end(), centers.begin(), centers.end());
  const auto balls = balls_from(with_origin, log_spaced(1e-3, 1e3, 7));
  const BallFamily fam_a(balls, rc, 11), fam_b(balls, rc, 12);

  CHECK(bmo_norm(fields::constant(2.0), fam_a).value == 0.0);
  CHECK_THROWS_AS(bmo_norm(fields::constant(1.0), BallFamily({}, rc, 1)), std::invalid_argument);

  const auto logf = fields::log_hnorm(d2);
  const auto a = bmo_norm(logf, fam_a), b = bmo_norm(logf, fam_b);
  CHECK(std::isfinite(a.value));
  CHECK(a.value > 0.0);
  CHECK_THAT(a.value, WithinRel(b.value, 0.05));

  CHECK(bmo_p_norm(logf, fam_a, 1.0).value == a.value);
  const double ratio = bmo_p_norm(logf, fam_a, 2.0).value / a.value;
  CHECK(ratio >= 1.0);
  CHECK(ratio <= 10.0);
  CHECK_THROWS_AS(bmo_p_norm(logf, fam_a, 0.5), std::invalid_argument);

  // ||g|| is not in BMO: the estimator grows with each radius decade
  const auto nrm = fields::power_hnorm(d2, 1.0);
  double prev = 0.0;
  for (double top : {1.0, 10.0, 100.0, 1000.0}) {
    const BallFamily fam(balls_from({origin()}, log_spaced(1e-3, top, 4)), rc, 13);
    const double v = bmo_norm(nrm, fam).value;
    if (prev > 0.0) CHECK(v >= 2.0 * prev);
    prev = v;
  }
}

TEST_CASE("sup estimators are monotone in the family", "[function_analysis]") {
  RuleConfig rc;
  rc.samples_per_ball = 512;
  rc.singular = origin();
  const auto balls = balls_from(spread_centers(d2, 4, 0.1, 5.0, 8), log_spaced(0.1, 10.0, 3));
  const std::vector<Ball> fewer(balls.begin(), balls.begin() + 6);
  const BallFamily big(balls, rc, 5), small(fewer, rc, 5);
  const auto f = fields::log_hnorm(d2);
  CHECK(bmo_norm(f, big).value >= bmo_norm(f, small).value);
  const auto w = weights::power(d2, 2.0);
  CHECK(ap_characteristic(w, 2.0, big).value >= ap_characteristic(w, 2.0, small).value);
}

TEST_CASE("A_p and A_1 characteristics", "[function_analysis]") {
  RuleConfig rc;
  rc.samples_per_ball = 2048;
  rc.singular = origin();
  const auto centers = spread_centers(d2, 5, 0.01, 3.0, 4);
  std::vector<GroupPoint> cs{origin()};
  cs.insert(cs.end(), centers.begin(), centers.end());
  const BallFamily fam(balls_from(cs, log_spaced(0.01, 10.0, 4)), rc, 21);

  CHECK_THAT(ap_characteristic(weights::unit(), 2.0, fam).value, WithinAbs(1.0, 1e-12));
  CHECK_THAT(a1_characteristic(weights::unit(), fam).value, WithinAbs(1.0, 1e-12));
  // p <= 1 is the A_1 variant
  CHECK(ap_characteristic(weights::unit(), 1.0, fam).value == a1_characteristic(weights::unit(), fam).value);

  const auto w = weights::power(d2, 2.0);
  const double ap = ap_characteristic(w, 2.0, fam).value;
  CHECK(ap >= 1.0);
  CHECK(std::isfinite(ap));
  const double ap_scaled = ap_characteristic(weights::scaled(w, 7.5), 2.0, fam).value;
  CHECK_THAT(ap_scaled, WithinRel(ap, 0.01));

  const double a1 = a1_characteristic(weights::power(d2, -3.0), fam).value;
  CHECK(std::isfinite(a1));
  CHECK(a1 >= 1.0);
}

TEST_CASE("doubling check", "[function_analysis]") {
  const Ball b(origin(), 0.5);
  auto cfg = cfg_with(4096, 9, true);
  const auto unit = doubling_check(weights::unit(), 2.0, b, {1.0, 2.0, 4.0}, cfg);
  CHECK_THAT(unit.ratios[0], WithinRel(1.0, 1e-12));
  CHECK_THAT(unit.ratios[1], WithinRel(std::pow(2.0, 10.0 - 20.0), 1e-12));
  const auto pw = doubling_check(weights::power(d2, 2.0), 2.0, b, {2.0, 4.0, 8.0}, cfg);
  for (double r : pw.ratios) CHECK(r <= pw.fitted_constant);
  CHECK(pw.fitted_constant < 1.0);
}

TEST_CASE("Morrey norm", "[function_analysis]") {
  const MorreyParams mp{2.0, 0.5};
  const Ball unit(origin(), 1.0);
  RuleConfig rc;
  rc.samples_per_ball = 4096;
  const BallFamily single({unit}, rc, 3);
  CHECK(morrey_norm(fields::constant(0.0), weights::unit(), mp, single).value == 0.0);
  const auto ind = fields::ball_indicator(unit);
  const double omega = unit_ball_volume_cached(d2).volume;
  CHECK_THAT(morrey_norm(ind, weights::unit(), mp, single).value, WithinRel(std::pow(omega, 0.25), 1e-12));
  const auto fam = BallFamily(balls_from({origin()}, log_spaced(0.5, 4.0, 4)), rc, 4);
  const double base = morrey_norm(ind, weights::power(d2, 2.0), mp, fam).value;
  CHECK_THAT(morrey_norm(ind.scaled(-3.0), weights::power(d2, 2.0), mp, fam).value, WithinRel(3.0 * base, 1e-12));

  // kappa -> 0 on a single ball is the plain L^p integral
  const MorreyParams tiny{2.0, 1e-9};
  const auto bump = fields::smooth_bump(origin(), 1.0);
  const auto r = single.rule(0);
  auto v = values_at(bump, r);
  for (double& x : v) x *= x;
  const double lp = std::sqrt(unit.volume() * average(r, v).value);
  CHECK_THAT(morrey_norm(bump, weights::unit(), tiny, single).value, WithinRel(lp, 0.01));

  CHECK_THROWS_AS((MorreyParams{1.0, 0.5}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((MorreyParams{2.0, 1.0}.validate()), std::invalid_argument);
}

TEST_CASE("John-Nirenberg level sets of log norm", "[function_analysis]") {
  const Ball unit(origin(), 1.0);
  auto cfg = cfg_with(20000, 14, true);
  cfg.rule.singular_depth = 10;
  const auto logf = fields::log_hnorm(d2);
  std::vector<double> alphas;
  for (int k = 0; k <= 12; ++k) alphas.push_back(0.2 + 0.1 * k);
  const auto t = jn_levelset_decay(logf, unit, alphas, cfg);
  CHECK(t.fit.r2 >= 0.95);
  // exact decay rate is Q
  CHECK_THAT(t.fit.slope, WithinRel(-10.0, 0.05));
  const auto zero = jn_levelset_decay(logf, unit, {0.0}, cfg);
  CHECK(zero.fractions[0] <= 1.0);
  const auto flat = jn_levelset_decay(fields::constant(1.0), unit, {0.1, 0.5}, cfg);
  CHECK(flat.fractions[0] == 0.0);
}

TEST_CASE("VMO diagnostics", "[function_analysis]") {
  auto cfg = VmoCfg::defaults(d2);
  cfg.rule.samples_per_ball = 512;
  cfg.centers = 8;
  cfg.center_spread = 1.0;
  const auto bump = vmo_diagnostics(fields::smooth_bump(origin(), 1.0), cfg);
  for (const auto* c : {&bump.small_balls, &bump.large_balls, &bump.far_balls}) {
    REQUIRE(c->sup_oscillation.front() > 0.0);
    CHECK(c->sup_oscillation.back() < 0.1 * c->sup_oscillation.front());
  }
  auto lcfg = cfg;
  lcfg.rule.singular = origin();
  const auto lg = vmo_diagnostics(fields::log_hnorm(d2), lcfg);
  const auto& c1 = lg.small_balls.sup_oscillation;
  CHECK(*std::min_element(c1.begin(), c1.end()) > 0.5 * c1.front());
  const auto flat = vmo_diagnostics(fields::constant(4.0), cfg);
  for (double v : flat.small_balls.sup_oscillation) CHECK(v == 0.0);
  for (double v : flat.far_balls.sup_oscillation) CHECK(v == 0.0);
}

TEST_CASE("ball statistics CSV", "[function_analysis]") {
  RuleConfig rc;
  rc.samples_per_ball = 256;
  const BallFamily fam(balls_from({origin()}, {0.5, 1.0}), rc, 3);
  const auto stats = ball_stats(fields::smooth_bump(origin(), 1.0), weights::power(d2, 1.0), fam);
  REQUIRE(stats.size() == 2);
  for (const auto& s : stats) {
    CHECK(s.oscillation.value >= 0.0);
    CHECK(s.weighted_measure.value > 0.0);
  }
  std::ostringstream os;
  write_ball_stats_csv(os, stats);
  const std::string csv = os.str();
  CHECK(csv.rfind(kBallStatsSchema, 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}
