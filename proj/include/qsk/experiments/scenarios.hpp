#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "qsk/experiments/config.hpp"
#include "qsk/experiments/report.hpp"
#include "qsk/extremal.hpp"
#include "qsk/kernel_scans.hpp"

namespace qsk::experiments {

namespace detail {

/// Scenario state: the config, its group, the lazily built kernel and the report.
class Run {
 public:
  explicit Run(const RunConfig& c) : c(c), d(c.dims()) { report.config = c; }

  const RunConfig& c;
  GroupDims d;
  RunReport report;

  std::shared_ptr<const KernelEvaluator> kernel() {
    if (!ke_) ke_ = std::make_shared<const KernelEvaluator>(build_kernel(d, c.kernel_c));
    return ke_;
  }
  std::uint64_t seed(std::uint64_t key) const { return substream(c.seed, key); }
  double option(const char* key) const { return c.options.at(key).get<double>(); }
  int option_int(const char* key) const { return c.options.at(key).get<int>(); }
  std::vector<double> option_list(const char* key) const { return c.options.at(key).get<std::vector<double>>(); }

  void check(std::string id, std::string description, std::string operation, double value, double se,
             std::string relation, double tolerance) {
    report.checks.push_back(make_check(std::move(id), std::move(description), std::move(operation), value, se,
                                       std::move(relation), tolerance));
  }
  void constant(std::string name, double value, double se, std::string operation) {
    report.constants.push_back({std::move(name), value, se, std::move(operation)});
  }
  Table& table(std::string name, std::string schema, std::vector<std::string> columns) {
    report.tables.emplace_back(std::move(name), std::move(schema), std::move(columns));
    return report.tables.back();
  }

  /// Worst value of an exact identity over instances, as a check and a table row.
  void identity(Table& t, const std::string& id, const std::string& description, const std::string& operation,
                std::size_t instances, double worst, double tolerance) {
    check(id, description, operation, worst, 0.0, "<=", tolerance);
    t.add({cell(id), cell(instances), cell(worst), cell(tolerance), cell(std::string(worst <= tolerance ? "PASS" : "FAIL"))});
  }

 private:
  std::shared_ptr<const KernelEvaluator> ke_;
};

inline GroupPoint random_point(GroupDims d, Rng& rng) {
  GroupPoint g = GroupPoint::identity(d);
  for (int a = 0; a < 3; ++a) g.t[a] = rng.symmetric();
  for (int i = 0; i < g.ydim; ++i) g.y[i] = rng.symmetric();
  return g;
}

inline Quat random_quat(Rng& rng) { return {rng.symmetric(), rng.symmetric(), rng.symmetric(), rng.symmetric()}; }

inline double point_distance(const GroupPoint& a, const GroupPoint& b) {
  double m = 0.0;
  for (int k = 0; k < 3; ++k) m = std::max(m, std::abs(a.t[k] - b.t[k]));
  for (int i = 0; i < a.ydim; ++i) m = std::max(m, std::abs(a.y[i] - b.y[i]));
  return m;
}

inline std::vector<std::string> identity_columns() { return {"identity", "instances", "max_error", "tolerance", "status"}; }

inline double growth_min(const std::vector<double>& v) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < v.size(); ++i) m = std::min(m, v[i] / v[i - 1]);
  return m;
}

inline double growth_max(const std::vector<double>& v) {
  double m = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) m = std::max(m, v[i] / v[i - 1]);
  return m;
}

}  // namespace detail

// group-geometry: exact quaternion and group identities on random instances.
inline RunReport run_group_geometry(const RunConfig& c) {
  detail::Run run(c);
  const GroupDims d = run.d;
  const std::size_t N = c.budget("samples");
  const int L = d.horizontal() / 4;
  constexpr double tol = 1e-12;
  Table& t = run.table("identities", "qsk.identities/1", detail::identity_columns());

  Rng rng(run.seed(1));
  double assoc = 0, anti = 0, modulus = 0, bilinear = 0;
  std::vector<Quat> y(L), yp(L);
  for (std::size_t s = 0; s < N; ++s) {
    const Quat x = detail::random_quat(rng), u = detail::random_quat(rng), v = detail::random_quat(rng);
    assoc = std::max(assoc, abs((x * u) * v - x * (u * v)));
    anti = std::max(anti, abs(conj(x * u) - conj(u) * conj(x)));
    modulus = std::max(modulus, std::abs(abs(x * u) - abs(x) * abs(u)));
    for (int l = 0; l < L; ++l) {
      y[l] = detail::random_quat(rng);
      yp[l] = detail::random_quat(rng);
    }
    const auto a = im_bilinear<double>(std::span<const Quat>(y), std::span<const Quat>(yp));
    const auto b = im_bilinear_structure<double>(std::span<const Quat>(y), std::span<const Quat>(yp));
    for (int k = 0; k < 3; ++k) bilinear = std::max(bilinear, std::abs(a[k] - b[k]));
  }
  run.identity(t, "quaternion.associativity", "(xy)z = x(yz)", "qmul", N, assoc, tol);
  run.identity(t, "quaternion.conjugation", "conj(xy) = conj(y) conj(x)", "conj, qmul", N, anti, tol);
  run.identity(t, "quaternion.modulus", "|xy| = |x||y|", "abs, qmul", N, modulus, tol);
  run.identity(t, "quaternion.im_bilinear", "Im<y, y'> equals its b^alpha expansion", "im_bilinear vs im_bilinear_structure", N,
               bilinear, tol);

  double gassoc = 0, ginverse = 0, structure = 0, dil = 0, invariance = 0, symmetry = 0, homog = 0;
  const GroupPoint e = GroupPoint::identity(d);
  for (std::size_t s = 0; s < N; ++s) {
    const GroupPoint g = detail::random_point(d, rng), h = detail::random_point(d, rng), k = detail::random_point(d, rng);
    const double r = std::exp(rng.uniform(std::log(0.5), std::log(2.0)));
    gassoc = std::max(gassoc, detail::point_distance(gmul(gmul(g, h), k), gmul(g, gmul(h, k))));
    ginverse = std::max({ginverse, detail::point_distance(gmul(g, ginv(g)), e), detail::point_distance(gmul(ginv(g), g), e)});
    structure = std::max(structure, detail::point_distance(gmul(g, h), gmul_structure(g, h)));
    dil = std::max(dil, detail::point_distance(dilate(r, gmul(g, h)), gmul(dilate(r, g), dilate(r, h))));
    invariance = std::max(invariance, std::abs(rho(gmul(k, g), gmul(k, h)) - rho(g, h)));
    symmetry = std::max(symmetry, std::abs(rho(g, h) - rho(h, g)));
    homog = std::max(homog, std::abs(hnorm(dilate(r, g)) - r * hnorm(g)));
  }
  run.identity(t, "group.associativity", "(gh)k = g(hk)", "gmul", N, gassoc, tol);
  run.identity(t, "group.inverse", "g g^-1 = g^-1 g = e", "gmul, ginv", N, ginverse, tol);
  run.identity(t, "group.structure_form", "quaternion group law equals the real b^alpha form", "gmul vs gmul_structure", N,
               structure, tol);
  run.identity(t, "group.dilation", "delta_r(gh) = delta_r(g) delta_r(h)", "dilate, gmul", N, dil, tol);
  run.identity(t, "group.left_invariance", "rho(kg, kh) = rho(g, h)", "rho, gmul", N, invariance, tol);
  run.identity(t, "group.symmetry", "rho(g, h) = rho(h, g)", "rho", N, symmetry, tol);
  run.identity(t, "group.norm_homogeneity", "||delta_r g|| = r ||g||", "hnorm, dilate", N, homog, tol);

  const double C = quasi_triangle_constant(d, N, run.seed(2));
  run.constant("quasi_triangle_constant", C, 0.0, "quasi_triangle_constant (sampled sup; lower bound)");
  run.check("group.quasi_triangle", "sampled rho(h,g) / (rho(h,w) + rho(w,g)) stays at most 1", "quasi_triangle_constant",
            C, 0.0, "<=", 1.0 + tol);
  const VolumeEstimate& vol = unit_ball_volume_cached(d);
  run.constant("unit_ball_volume", vol.volume, vol.std_error, "unit_ball_volume");
  return run.report;
}

// kernel-identities: closed forms, homogeneity, symmetry and gradient checks.
inline RunReport run_kernel_identities(const RunConfig& c) {
  detail::Run run(c);
  const GroupDims d = run.d;
  const auto& ke = *run.kernel();
  const int Q = d.Q();
  const std::size_t N = std::max<std::size_t>(2, c.budget("samples") / 10);
  Table& t = run.table("identities", "qsk.identities/1", detail::identity_columns());
  Rng rng(run.seed(1));

  if (d.n() == 2) {
    // component 1 by hand: c (-12 x1 r^-6 + 24 x1^3 r^-8), and by a second difference of c x1 / r^4 in x1
    const auto hand = [&](const std::array<double, 4>& x) {
      const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
      return c.kernel_c * (-12.0 * x[0] / (r2 * r2 * r2) + 24.0 * x[0] * x[0] * x[0] / (r2 * r2 * r2 * r2));
    };
    const auto seed_part = [](std::array<double, 4> x, double dx) {
      x[0] += dx;
      const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
      return x[0] / (r2 * r2);
    };
    double closed = 0.0, fd = 0.0;
    for (std::size_t s = 0; s < N; ++s) {
      std::array<double, 4> x{rng.symmetric(), rng.symmetric(), rng.symmetric(), rng.symmetric()};
      const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3]);
      const double scale = c.kernel_c * std::pow(r, -5.0);  // |s| is homogeneous of degree -5
      const double v = ke.eval_s(x).x1;
      closed = std::max(closed, std::abs(v - hand(x)) / scale);
      const double h = 1e-4 * r;
      const double second = (seed_part(x, h) - 2.0 * seed_part(x, 0.0) + seed_part(x, -h)) / (h * h);
      fd = std::max(fd, std::abs(v - c.kernel_c * second) / scale);
    }
    run.identity(t, "kernel.component1_closed_form", "s_1 matches the hand expansion (relative to |sigma|^-5)",
                 "KernelEvaluator::eval_s", N, closed, 1e-12);
    run.identity(t, "kernel.component1_second_difference", "s_1 matches a second difference of x1 / |sigma|^4",
                 "KernelEvaluator::eval_s", N, fd, 1e-5);
    const double s1 = std::abs(ke.eval_s({1, 0, 0, 0}).x1 - 12.0 * c.kernel_c);
    const double s2 = std::abs(ke.eval_s({2, 0, 0, 0}).x1 - 0.375 * c.kernel_c);
    run.identity(t, "kernel.s_at_1", "s(1) = 12 c", "KernelEvaluator::eval_s", 1, s1, 1e-12);
    run.identity(t, "kernel.s_at_2", "s(2) = 0.375 c", "KernelEvaluator::eval_s", 1, s2, 1e-12);
  }

  double homog = 0.0, grad_homog = 0.0, herm = 0.0, grad_fd = 0.0;
  for (std::size_t s = 0; s < N; ++s) {
    const GroupPoint g = detail::random_point(d, rng);
    const double r = std::exp(rng.uniform(-2.0, 2.0));
    const GroupPoint gr = dilate(r, g);
    const Quat k = eval_K(ke, g);
    homog = std::max(homog, abs(eval_K(ke, gr) - k * std::pow(r, -Q)) / (abs(k) * std::pow(r, -Q)));
    herm = std::max(herm, abs(eval_K(ke, ginv(g)) - conj(k)) / abs(k));
    const auto y0 = horizontal_gradient_K(ke, g), y1 = horizontal_gradient_K(ke, gr);
    double top = 0.0;
    for (const auto& q : y0) top = std::max(top, abs(q));
    const double f = std::pow(r, -Q - 1);
    for (std::size_t j = 0; j < y0.size(); ++j)
      grad_homog = std::max(grad_homog, std::abs(abs(y1[j]) - f * abs(y0[j])) / (f * top));
    // central difference along the flow of Y_j
    const GroupPoint u = dilate(1.0 / hnorm(g), g);
    const auto yu = horizontal_gradient_K(ke, u);
    double top_u = 0.0;
    for (const auto& q : yu) top_u = std::max(top_u, abs(q));
    const double h = 1e-5;
    for (std::size_t j = 0; j < yu.size(); ++j) {
      const Quat diff = (eval_K(ke, horizontal_flow(u, static_cast<int>(j), h)) -
                         eval_K(ke, horizontal_flow(u, static_cast<int>(j), -h))) * (0.5 / h);
      grad_fd = std::max(grad_fd, abs(diff - yu[j]) / top_u);
    }
  }
  run.identity(t, "kernel.homogeneity", "K(delta_r g) = r^-Q K(g), relative", "eval_K", N, homog, 1e-10);
  run.identity(t, "kernel.gradient_homogeneity", "|Y_j K(delta_r g)| = r^-(Q+1) |Y_j K(g)|, relative",
               "horizontal_gradient_K", N, grad_homog, 1e-10);
  run.identity(t, "kernel.hermitian", "K(g^-1) = conj K(g), relative", "eval_K", N, herm, 1e-10);
  run.identity(t, "kernel.gradient_flow_difference", "Y_j K matches a central difference along its flow",
               "horizontal_gradient_K", N, grad_fd, 1e-6);
  return run.report;
}

// kernel-bounds: running sups of the size, gradient and Holder quotients, and
// the companion-ball scan for the lower bound.
inline RunReport run_kernel_bounds(const RunConfig& c) {
  detail::Run run(c);
  const auto& ke = *run.kernel();
  const std::size_t S = c.budget("scan_samples", 16);
  const double sep = run.option("holder_separation");

  const RunningSup size = kernel_size_scan(ke, S, run.seed(1));
  const RunningSup grad = kernel_gradient_scan(ke, S, run.seed(2));
  const RunningSup holder = kernel_holder_scan(ke, S, sep, run.seed(3));
  Table& t = run.table("running_sups", "qsk.running_sups/1",
                       {"quantity", "samples_half", "sup_half", "samples_full", "sup_full", "change", "tolerance"});
  const auto row = [&](const std::string& id, const std::string& desc, const std::string& op, const RunningSup& r,
                       double tol) {
    t.add({cell(id), cell(r.samples / 2), cell(r.half), cell(r.samples), cell(r.full), cell(r.change()), cell(tol)});
    run.constant(id + ".sup", r.full, 0.0, op + " (sampled sup; lower bound)");
    run.check(id + ".stable", desc, op, r.change(), 0.0, "<", tol);
  };
  row("size", "sup |K| ||g||^Q grows < 5% when samples double", "kernel_size_scan", size, 0.05);
  row("gradient", "sup |Y_j K| ||g||^(Q+1) grows < 5% when samples double", "kernel_gradient_scan", grad, 0.05);
  row("holder", "sup of the Holder quotient grows < 10% when samples double", "kernel_holder_scan", holder, 0.10);

  CompanionScanCfg cc;
  cc.A1 = run.option("A1");
  cc.A2 = run.option("A2");
  cc.directions = run.option_int("directions");
  cc.pairs = run.option_int("pairs");
  const int count = static_cast<int>(c.budget("base_points", 1));
  const LowerBoundScan scan = lower_bound_scan(ke, count, run.option("companion_radius"), cc, run.seed(4));
  Table& ct = run.table("companions", "qsk.companions/1",
                        {"base", "found", "component", "constant", "distance", "direction_fraction"});
  for (std::size_t i = 0; i < scan.rows.size(); ++i) {
    const auto& r = scan.rows[i];
    ct.add({cell(i), cell(r.found ? 1 : 0), cell(r.component), cell(r.constant), cell(r.distance),
            cell(r.direction_fraction)});
  }
  run.constant("lower_bound.c", scan.global_c, 0.0, "lower_bound_scan (min over base points)");
  run.check("lower_bound.success", "share of base points with a sign-constant companion", "lower_bound_scan",
            scan.success_rate, 0.0, ">=", 0.95);
  run.check("lower_bound.c_positive", "one global constant c > 0 serves every found companion", "lower_bound_scan",
            scan.global_c, 0.0, ">", 0.0);
  return run.report;
}

// weights-and-norms: A_p characteristics under refinement, doubling, and
// weighted measures and Morrey norms against closed forms.
inline RunReport run_weights_and_norms(const RunConfig& c) {
  detail::Run run(c);
  const GroupDims d = run.d;
  const int Q = d.Q();
  const double p = c.morrey.p;
  const GroupPoint o = GroupPoint::identity(d);
  const int refinements = std::max(2, run.option_int("refinements"));
  const int base_depth = std::max(1, run.option_int("base_depth"));
  const std::size_t base = c.budget("ball_samples", 64);

  std::vector<GroupPoint> centers{o};
  const auto more = spread_centers(d, 5, 0.01, 3.0, run.seed(1));
  centers.insert(centers.end(), more.begin(), more.end());
  const auto balls = balls_from(centers, log_spaced(0.01, 10.0, 4));
  const auto family_at = [&](int level, double a) {
    RuleConfig rc;
    rc.samples_per_ball = base << level;
    rc.singular = o;
    rc.singular_depth = base_depth + level;
    // hnorm^-a varies by at most 100x inside one shell
    rc.strata_per_decade = std::max(4, static_cast<int>(std::ceil(std::abs(a) / 2.0)));
    return BallFamily(balls, rc, run.seed(2));
  };

  Table& wt = run.table("characteristics", "qsk.characteristics/1",
                        {"weight", "a", "level", "singular_depth", "strata_per_decade", "samples_per_ball", "characteristic", "std_error"});
  const auto refine = [&](const std::string& name, const Weight& w, double a) {
    std::vector<double> v;
    for (int L = 0; L < refinements; ++L) {
      const SupEstimate s = ap_characteristic(w, p, family_at(L, a));
      wt.add({cell(name), cell(a), cell(L), cell(base_depth + L), cell(std::max(4, static_cast<int>(std::ceil(std::abs(a) / 2.0)))),
              cell(base << L), cell(s.value), cell(s.std_error)});
      v.push_back(s.value);
      if (L + 1 == refinements) run.constant(name + ".characteristic", s.value, s.std_error, "ap_characteristic");
    }
    return v;
  };

  const auto unit = refine("unit", weights::unit(), 0.0);
  run.check("ap.unit", "[1]_{A_p} = 1 within 0.5%", "ap_characteristic", std::abs(unit.back() - 1.0), 0.0, "<=", 0.005);

  const Weight w = c.weight.build(d);
  const double a = c.weight.kind == "unit" ? 0.0 : c.weight.a;
  const bool admissible = a > -Q && a < Q * (p - 1.0);
  if (c.weight.kind == "power") {
    const auto pw = refine("power", w, a);
    const double delta = std::abs(pw.back() / pw[pw.size() - 2] - 1.0);
    if (admissible) {
      run.check("ap.power_stable", "power-weight characteristic changes < 5% under the last refinement",
                "ap_characteristic", delta, 0.0, "<", 0.05);
      run.check("ap.power_finite", "power-weight characteristic is finite", "ap_characteristic", pw.back(), 0.0, "<",
                std::numeric_limits<double>::infinity());
    } else {
      run.check("ap.power_diverges", "inadmissible exponent: characteristic grows > 2x per refinement",
                "ap_characteristic", detail::growth_min(pw), 0.0, ">", 2.0);
    }
  }
  // the first exponent past the A_p range, fixed by the group
  const double a_div = Q * (p - 1.0) + 0.5;
  const auto dv = refine("divergent", weights::power(d, a_div), a_div);
  run.check("ap.divergent_grows", "a = Q(p-1) + 1/2: characteristic grows > 2x per refinement", "ap_characteristic",
            detail::growth_min(dv), 0.0, ">", 2.0);

  // doubling: C fitted at lambda = 2 must cover every larger lambda
  SamplingCfg sc;
  sc.rule.samples_per_ball = base * 4;
  sc.rule.singular = o;
  sc.seed = run.seed(3);
  const auto lambdas = run.option_list("lambdas");
  Table& dt = run.table("doubling", "qsk.doubling/1", {"ball", "lambda", "ratio", "std_error"});
  std::vector<Ball> dballs{Ball(o, 1.0), Ball(o, 0.1)};
  for (std::size_t i = 1; i < 4 && i < centers.size(); ++i) dballs.emplace_back(centers[i], 0.5);
  double fitted = 0.0, fitted_se = 0.0, worst = 0.0;
  std::vector<DoublingTable> tabs;
  for (std::size_t i = 0; i < dballs.size(); ++i) {
    tabs.push_back(doubling_check(w, p, dballs[i], lambdas, sc));
    const auto& tb = tabs.back();
    for (std::size_t k = 0; k < tb.lambdas.size(); ++k)
      dt.add({cell(i), cell(tb.lambdas[k]), cell(tb.ratios[k]), cell(tb.std_errors[k])});
    if (tb.ratios.front() > fitted) {
      fitted = tb.ratios.front();
      fitted_se = tb.std_errors.front();
    }
  }
  for (const auto& tb : tabs)
    for (double r : tb.ratios) worst = std::max(worst, r / fitted);
  run.constant("doubling.C", fitted, fitted_se, "doubling_check (max ratio at the first lambda)");
  if (admissible || c.weight.kind == "unit") {
    run.check("doubling.single_constant", "w(lambda B) <= C lambda^(Qp) w(B) for every lambda with C from the first",
              "doubling_check", worst, 0.0, "<=", 1.0);
  } else if (a > 0.0) {
    // on B(0, r), w(lambda B) / w(B) = lambda^(Q+a) exactly, so the normalized ratio grows like lambda^(a-Q(p-1))
    const double lmin = *std::min_element(lambdas.begin(), lambdas.end());
    const double lmax = *std::max_element(lambdas.begin(), lambdas.end());
    const double excess = std::pow(lmax / lmin, a - Q * (p - 1.0));
    run.constant("doubling.predicted_excess", excess, 0.0, "closed form (lambda_max/lambda_min)^(a-Q(p-1))");
    run.check("doubling.exponent_exceeded", "inadmissible exponent: normalized ratio exceeds C by the predicted power",
              "doubling_check", worst / excess, 0.0, ">=", 0.9);
  }

  // closed forms: w(B(0, r)) = omega Q r^(Q+a) / (Q+a), and for f = chi_B(0,1) the
  // concentric Morrey sup sits at r = 1 with value w(B(0,1))^((1-kappa)/p)
  const double omega = unit_ball_volume_cached(d).volume;
  Table& nt = run.table("closed_forms", "qsk.closed_forms/1", {"quantity", "radius", "estimate", "std_error", "exact"});
  double worst_z = 0.0;
  for (double r : {0.5, 1.0, 2.0}) {
    const Estimate e = weighted_measure(w, Ball(o, r), sc);
    const double exact = omega * Q / (Q + a) * std::pow(r, Q + a);
    nt.add({cell(std::string("weighted_measure")), cell(r), cell(e.value), cell(e.std_error), cell(exact)});
    // omega's own sampling error enters both sides
    const double se = std::hypot(e.std_error, exact * unit_ball_volume_cached(d).std_error / omega);
    worst_z = std::max(worst_z, std::abs(e.value - exact) / se);
  }
  run.check("weighted_measure.closed_form", "w(B(0,r)) within 4 standard errors of omega Q r^(Q+a)/(Q+a)",
            "weighted_measure", worst_z, 0.0, "<=", 4.0);
  RuleConfig mr;
  mr.samples_per_ball = base * 4;
  mr.singular = o;
  const BallFamily mf(balls_from({o}, {0.5, 1.0, 2.0}), mr, run.seed(4));
  const SupEstimate mn = morrey_norm(fields::ball_indicator(Ball(o, 1.0)), w, c.morrey, mf);
  const double exact_mn = std::pow(omega * Q / (Q + a), (1.0 - c.morrey.kappa) / p);
  nt.add({cell(std::string("morrey_norm_indicator")), cell(1.0), cell(mn.value), cell(mn.std_error), cell(exact_mn)});
  const double mn_se = std::hypot(mn.std_error, exact_mn * unit_ball_volume_cached(d).std_error / omega);
  run.check("morrey_norm.closed_form", "Morrey norm of chi_B(0,1) within 4 standard errors of w(B(0,1))^((1-kappa)/p)",
            "morrey_norm", std::abs(mn.value - exact_mn) / mn_se, 0.0, "<=", 4.0);
  return run.report;
}

// commutator-boundedness: max Morrey ratio of [b, C_eta] over indicator
// families, each level the 10x dilate of the previous one.
inline RunReport run_commutator_boundedness(const RunConfig& c) {
  detail::Run run(c);
  const GroupDims d = run.d;
  const auto ke = run.kernel();
  const Weight w = c.weight.build(d);
  const int decades = std::max(2, run.option_int("decades"));
  const double eta = run.option("eta");
  QuadratureCfg q;
  q.sources = c.budget("sources", 16);
  q.seed = run.seed(1);
  RuleConfig rc = uniform_config(c.budget("targets", 8));
  rc.radial_strata = static_cast<int>(std::max<std::size_t>(1, rc.samples_per_ball / 8));
  rc.equivariant = true;

  Table& rt = run.table("ratios", "qsk.commutator_ratios/1", {"b", "level", "center_y1", "radius", "ratio", "std_error"});
  Table& gt = run.table("growth", "qsk.commutator_growth/1", {"b", "level", "max_ratio", "std_error", "growth"});
  for (std::size_t bi = 0; bi < c.b.size(); ++bi) {
    const FieldSpec& spec = c.b[bi];
    const ScalarField b = spec.build(d);
    const std::string name = "b" + std::to_string(bi) + ":" + spec.kind;
    std::vector<double> level_max;
    double best = 0.0, best_se = 0.0;
    for (int L = 0; L < decades; ++L) {
      const double R = std::pow(10.0, L);
      // level L dilates level 0 by 10^L: B(0, R), B(R e1, R), B(10 R e1, R)
      for (double offset : {0.0, 1.0, 10.0}) {
        const double cy = offset * R;
        GroupPoint cen = GroupPoint::identity(d);
        cen.y[0] = cy;
        const ScalarField f = fields::ball_indicator(Ball(cen, R));
        const BallFamily fam({Ball(cen, R / 2), Ball(cen, R), Ball(cen, 2 * R)}, rc, run.seed(2));
        const MorreyRatio r = morrey_operator_ratio(ke, b, f, w, c.morrey, eta, fam, q);
        rt.add({cell(name), cell(L), cell(cy), cell(R), cell(r.ratio), cell(r.std_error)});
        if (r.ratio > best) {
          best = r.ratio;
          best_se = r.std_error;
        }
      }
      level_max.push_back(best);
      gt.add({cell(name), cell(L), cell(best), cell(best_se), cell(L == 0 ? 1.0 : best / level_max[L - 1])});
    }
    run.constant(name + ".max_ratio", best, best_se, "morrey_operator_ratio");
    if (spec.kind == "constant") {
      run.check(name + ".zero", "constant b gives the zero operator", "morrey_operator_ratio", best, 0.0, "<=", 0.0);
    } else if (spec.in_bmo()) {
      run.check(name + ".bounded", "BMO b: max ratio grows < 30% per decade", "morrey_operator_ratio",
                detail::growth_max(level_max) - 1.0, 0.0, "<", 0.30);
    } else {
      run.check(name + ".unbounded", "b outside BMO: max ratio grows >= 2x per decade", "morrey_operator_ratio",
                detail::growth_min(level_max), 0.0, ">=", 2.0);
    }
  }
  return run.report;
}

// truncation-gap: fitted C in |[b, C_eta1] f - [b, C_eta2] f| <= C eta2 sup|grad b| Mf.
inline RunReport run_truncation_gap(const RunConfig& c) {
  detail::Run run(c);
  const GroupDims d = run.d;
  if (c.b.empty() || c.f.empty()) throw ConfigError({"b, f: truncation-gap needs one b and one f"});
  const ScalarField b = c.b[0].build(d);
  if (!b.grad_bound) throw ConfigError({"b[0].kind: truncation-gap needs a b with a gradient bound (smooth-bump)"});
  const ScalarField f = c.f[0].build(d);
  QuadratureCfg q;
  q.sources = c.budget("sources", 16);
  q.seed = run.seed(1);
  SamplingCfg mc;
  mc.rule = uniform_config(c.budget("ball_samples", 16));
  mc.seed = run.seed(2);
  const Ball support = *f.support;
  const auto radii = log_spaced(0.01 * support.radius, 2.0 * support.radius, run.option_int("maximal_radii"));
  Rng rng(run.seed(3));
  std::vector<GroupPoint> targets;
  for (int i = 0; i < run.option_int("boundary_targets"); ++i)
    targets.push_back(gmul(support.center, dilate(support.radius, sample_unit_sphere(d, rng))));
  for (int i = 0; i < run.option_int("interior_targets"); ++i)
    targets.push_back(gmul(support.center, dilate(0.5 * support.radius, sample_unit_ball(d, rng))));

  Table& t = run.table("gap", "qsk.truncation_gap/1",
                       {"eta1", "eta2", "target", "target_norm", "gap", "gap_se", "maximal", "bound", "ratio"});
  std::vector<double> C;
  for (double eta2 : c.eta) {
    const TruncationGapTable tab = truncation_gap(*run.kernel(), b, f, eta2 / 2, eta2, targets, radii, q, mc);
    double se = 0.0;
    for (std::size_t i = 0; i < tab.rows.size(); ++i) {
      const auto& r = tab.rows[i];
      t.add({cell(tab.eta1), cell(tab.eta2), cell(i), cell(hnorm(r.target)), cell(abs(r.gap.value)), cell(r.gap.std_error),
             cell(r.maximal), cell(r.bound), cell(r.ratio)});
      if (r.ratio == tab.fitted_constant && r.bound > 0.0) se = r.gap.std_error / r.bound;
    }
    run.constant("C(eta2=" + Table::format(eta2) + ")", tab.fitted_constant, se, "truncation_gap");
    C.push_back(tab.fitted_constant);
  }
  const double hi = *std::max_element(C.begin(), C.end()), lo = *std::min_element(C.begin(), C.end());
  run.check("truncation_gap.stable", "fitted C varies by at most a factor 2 across the eta grid", "truncation_gap",
            lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity(), 0.0, "<=", 2.0);
  return run.report;
}

// vmo-diagnostics: the three vanishing-oscillation curves per b.
inline RunReport run_vmo_diagnostics(const RunConfig& c) {
  detail::Run run(c);
  const GroupDims d = run.d;
  VmoCfg cfg = VmoCfg::defaults(d);
  const int points = std::max(3, run.option_int("curve_points"));
  cfg.small_radii = log_spaced(1e-4, 1.0, points);
  std::reverse(cfg.small_radii.begin(), cfg.small_radii.end());
  cfg.large_radii = log_spaced(1.0, 1e4, points);
  cfg.far_radii = log_spaced(0.1, 1e3, points);
  cfg.centers = std::max(1, run.option_int("centers"));
  cfg.rule.samples_per_ball = c.budget("ball_samples", 16);
  cfg.seed = run.seed(1);

  Table& t = run.table("curves", "qsk.vmo_curves/1", {"b", "curve", "parameter", "sup_oscillation"});
  for (std::size_t bi = 0; bi < c.b.size(); ++bi) {
    const FieldSpec& spec = c.b[bi];
    const ScalarField b = spec.build(d);
    VmoCfg bc = cfg;
    if (b.singular) bc.rule.singular = *b.singular;
    const VmoDiagnostics v = vmo_diagnostics(b, bc);
    const std::string name = "b" + std::to_string(bi) + ":" + spec.kind;
    const std::vector<std::pair<std::string, const VmoCurve*>> curves{
        {"small", &v.small_balls}, {"large", &v.large_balls}, {"far", &v.far_balls}};
    for (const auto& [cname, curve] : curves)
      for (std::size_t k = 0; k < curve->parameter.size(); ++k)
        t.add({cell(name), cell(cname), cell(curve->parameter[k]), cell(curve->sup_oscillation[k])});
    if (spec.in_vmo()) {
      for (const auto& [cname, curve] : curves) {
        const double first = curve->sup_oscillation.front(), last = curve->sup_oscillation.back();
        run.check(name + "." + cname + "_vanishes", "VMO b: " + cname + "-ball curve ends below 10% of its start",
                  "vmo_diagnostics", first > 0.0 ? last / first : 0.0, 0.0, "<", 0.1);
      }
    } else if (spec.kind == "log-hnorm") {
      // on B(0, r), ||g||^Q / r^Q is uniform, so M(log hnorm; B(0, r)) = E|X - 1| / Q = (2/e) / Q
      // for X ~ Exp(1), at every r; the sup over centers can only be larger
      const auto& s = v.small_balls.sup_oscillation;
      const double floor = *std::min_element(s.begin(), s.end());
      const double exact = 2.0 / std::exp(1.0) / d.Q();
      run.constant(name + ".small_floor", floor, 0.0, "vmo_diagnostics (min over radii)");
      run.constant(name + ".origin_oscillation", exact, 0.0, "closed form (2/e)/Q");
      run.check(name + ".small_floor", "BMO \\ VMO b: small-ball curve stays above 0.8 (2/e)/Q at every radius",
                "vmo_diagnostics", floor / exact, 0.0, ">=", 0.8);
    }
  }
  return run.report;
}

// compactness-probe: separated images of median-split functions for a
// BMO \ VMO b, and the Kolmogorov-Riesz tail decay for a VMO b.
inline RunReport run_compactness_probe(const RunConfig& c) {
  detail::Run run(c);
  const GroupDims d = run.d;
  const int Q = d.Q();
  const auto ke = run.kernel();
  const Weight w = c.weight.build(d);
  const GroupPoint o = GroupPoint::identity(d);
  const double eta_fraction = run.option("eta_fraction");

  const FieldSpec* rough = nullptr;
  const FieldSpec* smooth = nullptr;
  for (const auto& s : c.b) {
    if (!rough && s.in_bmo() && !s.in_vmo()) rough = &s;
    if (!smooth && s.in_vmo() && s.kind != "constant") smooth = &s;
  }

  if (rough) {
    ExtremalCfg ec;
    ec.eta_fraction = eta_fraction;
    ec.sampling.rule.samples_per_ball = c.budget("ball_samples", 16);
    ec.sampling.seed = run.seed(1);
    ec.quadrature.sources = c.budget("sources", 16);
    ec.quadrature.seed = run.seed(2);
    ec.target_rule = uniform_config(c.budget("targets", 8));
    ec.target_rule.equivariant = true;
    ec.target_rule.radial_strata = static_cast<int>(std::max<std::size_t>(1, ec.target_rule.samples_per_ball / 8));
    std::vector<Ball> balls;
    for (int j = 1; j <= std::max(2, run.option_int("levels")); ++j) balls.emplace_back(o, std::pow(2.0, -j));
    const SeparationResult s = separation_probe(ke, rough->build(d), balls, w, c.morrey, ec);
    Table& t = run.table("separation", "qsk.separation/1", {"l", "m", "distance", "std_error"});
    for (std::size_t l = 0; l < balls.size(); ++l)
      for (std::size_t m = 0; m < balls.size(); ++m)
        if (l != m) t.add({cell(l), cell(m), cell(s.distance[l][m]), cell(s.distance_se[l][m])});
    Table& vt = run.table("separation_preconditions", "qsk.separation_preconditions/1", {"violation"});
    for (const auto& v : s.violations) vt.add({cell(v)});
    const double hi = *std::max_element(s.nearest.begin(), s.nearest.end());
    const double lo = *std::min_element(s.nearest.begin(), s.nearest.end());
    double lo_se = 0.0;
    for (std::size_t l = 0; l < balls.size(); ++l)
      for (std::size_t m = 0; m < balls.size(); ++m)
        if (l != m && s.distance[l][m] == s.min_offdiag) lo_se = s.distance_se[l][m];
    run.constant("separation.min_distance", s.min_offdiag, lo_se, "separation_probe");
    run.check("separation.bounded_below", "min pairwise image distance exceeds 3 standard errors", "separation_probe",
              lo_se > 0.0 ? s.min_offdiag / lo_se : 0.0, 0.0, ">", 3.0);
    run.check("separation.uniform", "nearest-image distances vary < 30% across the balls", "separation_probe",
              hi > 0.0 ? (hi - lo) / hi : 1.0, 0.0, "<", 0.30);
  }

  if (smooth) {
    QuadratureCfg q;
    q.sources = std::max<std::size_t>(16, c.budget("sources", 16) / 4);
    q.seed = run.seed(3);
    double r_min = std::numeric_limits<double>::infinity();
    for (const auto& f : c.f) r_min = std::min(r_min, f.radius);
    std::vector<std::shared_ptr<const CommutatorImage>> images;
    const ScalarField b = smooth->build(d);
    for (const auto& f : c.f)
      images.push_back(std::make_shared<const CommutatorImage>(ke, b, f.build(d), eta_fraction * r_min, q));
    if (images.empty()) throw ConfigError({"f: compactness-probe needs at least one f"});
    RuleConfig frc = c.family.rule(c.budget_scale);
    const BallFamily family(c.family.balls(d), frc, run.seed(4));
    KrCfg kc;
    kc.tail_M = run.option_list("tail_M");
    kc.tail_ball_factors = run.option_list("tail_ball_factors");
    kc.xi_norms = run.option_list("xi_norms");
    kc.xi_directions = std::max(1, run.option_int("xi_directions"));
    kc.tail_targets = c.budget("targets", 8);
    kc.sampling.rule.samples_per_ball = c.budget("ball_samples", 16);
    kc.sampling.seed = run.seed(5);
    kc.seed = run.seed(6);
    const KrReport r = kr_conditions(images, w, c.morrey, family, kc);
    Table& t = run.table("kolmogorov_riesz", "qsk.kolmogorov_riesz/1", {"condition", "parameter", "value", "std_error"});
    t.add({cell(std::string("bound")), cell(0.0), cell(r.bound.value), cell(r.bound.std_error)});
    for (std::size_t i = 0; i < r.tail.size(); ++i)
      t.add({cell(std::string("tail")), cell(kc.tail_M[i]), cell(r.tail[i]), cell(r.tail_se[i])});
    for (std::size_t i = 0; i < r.translation.size(); ++i)
      t.add({cell(std::string("translation")), cell(kc.xi_norms[i]), cell(r.translation[i]), cell(r.translation_se[i])});
    run.constant("kr.bound", r.bound.value, r.bound.std_error, "kr_conditions");
    run.constant("kr.tail_exponent", r.tail_exponent, 0.0, "kr_conditions (least-squares slope)");
    bool monotone = true;
    for (std::size_t i = 1; i < r.tail.size(); ++i) monotone = monotone && r.tail[i] < r.tail[i - 1];
    run.check("kr.tail_decreasing", "tail norms decrease in M", "kr_conditions", monotone ? 1.0 : 0.0, 0.0, ">=", 1.0);
    // the tail bound decays like (R0/M)^(kappa Q); a faster decay is consistent with it
    run.check("kr.tail_exponent", "fitted tail exponent is positive and at least 0.9 kappa Q", "kr_conditions",
              r.tail_exponent, 0.0, ">=", 0.9 * c.morrey.kappa * Q);
  }
  return run.report;
}

// f0-bounds: median-split properties on random (b, B0) and the lower and upper
// image integrals of f0 across scales.
inline RunReport run_f0_bounds(const RunConfig& c) {
  detail::Run run(c);
  const GroupDims d = run.d;
  const Weight w = c.weight.build(d);
  const std::size_t trials = c.budget("trials", 2);
  const std::size_t nodes = c.budget("ball_samples", 16);
  const std::size_t level_nodes = static_cast<std::size_t>(run.option_int("level_set_nodes"));
  Rng rng(run.seed(1));

  Table& t = run.table("median_split", "qsk.median_split/1",
                       {"trial", "b", "ball_norm", "ball_radius", "alpha", "sample_above", "sample_below", "a0",
                        "mean", "mean_se", "sign_violations"});
  double split_worst = 0.0, a0_worst = 0.0, z_worst = 0.0;
  std::size_t sign_bad = 0;
  // draws whose mean oscillation is below the extremal delta are redrawn
  const double delta = ExtremalCfg{}.delta;
  std::size_t rejected = 0;
  for (std::size_t i = 0, attempt = 0; i < trials; ++attempt) {
    if (attempt >= 20 * trials) throw std::runtime_error("f0-bounds: too many degenerate (b, B0) draws");
    FieldSpec spec;
    switch (static_cast<int>(rng.uniform() * 3.0)) {
      case 0: spec.kind = "log-hnorm"; break;
      case 1:
        spec.kind = "power-hnorm";
        spec.a = rng.uniform(0.2, 1.0);
        break;
      default: {
        spec.kind = "smooth-bump";
        const GroupPoint cc = dilate(rng.uniform(0.1, 2.0), sample_unit_sphere(d, rng));
        spec.center.t = {cc.t[0], cc.t[1], cc.t[2]};
        spec.center.y.assign(cc.y.begin(), cc.y.begin() + cc.ydim);
        spec.radius = rng.uniform(0.5, 3.0);
      }
    }
    const ScalarField b = spec.build(d);
    const Ball B0(dilate(rng.uniform(0.1, 3.0), sample_unit_sphere(d, rng)), rng.uniform(0.2, 2.0));
    SamplingCfg sc;
    sc.rule.samples_per_ball = nodes;
    sc.seed = run.seed(100 + attempt);
    const F0 f0 = build_f0(b, B0, w, c.morrey, sc, level_nodes);
    if (!(f0.oscillation.value > delta)) {
      ++rejected;
      continue;
    }
    // the sampled median splits its own sample set
    const BallRule rule = rule_for(B0, sc);
    const auto v = values_at(b, rule);
    const double alpha = weighted_lower_median(v, rule.weights);
    const MedianSplit split = median_split(v, rule.weights, alpha);
    split_worst = std::max({split_worst, split.above, split.below});
    // f0 checked on an independent rule
    a0_worst = std::max(a0_worst, std::abs(f0.a0));
    const BallRule check = make_rule(B0, uniform_config(4 * nodes), run.seed(200 + attempt));
    const auto fv = values_at(f0.field, check);
    const auto bv = values_at(b, check);
    std::size_t bad = 0;
    for (std::size_t k = 0; k < fv.size(); ++k) bad += fv[k] * (bv[k] - f0.alpha) < 0.0;
    sign_bad += bad;
    const Estimate m = integrate(check, fv);
    const double z = m.std_error > 0.0 ? std::abs(m.value) / m.std_error : (m.value == 0.0 ? 0.0 : 1e300);
    z_worst = std::max(z_worst, z);
    t.add({cell(i), cell(spec.kind), cell(hnorm(B0.center)), cell(B0.radius), cell(f0.alpha), cell(split.above),
           cell(split.below), cell(f0.a0), cell(m.value), cell(m.std_error), cell(bad)});
    ++i;
  }
  run.constant("median.rejected_draws", static_cast<double>(rejected), 0.0, "mean_oscillation <= delta");
  run.check("median.split", "sampled strict level sets of the lower median hold at most half the weight (up to rounding)",
            "weighted_lower_median, median_split", split_worst, 0.0, "<=", 0.5 + 1e-12);
  run.check("f0.a0", "|a0| <= 1/2", "build_f0", a0_worst, 0.0, "<=", 0.5);
  run.check("f0.mean_zero", "sampled integral of f0 within 3 standard errors of 0", "build_f0", z_worst, 0.0, "<=", 3.0);
  run.check("f0.sign", "f0 (b - alpha) >= 0 at every sample (violation count)", "build_f0",
            static_cast<double>(sign_bad), 0.0, "<=", 0.0);

  if (!c.b.empty()) {
    ExtremalCfg ec;
    ec.level_set_nodes = level_nodes;
    ec.targets = c.budget("targets", 64);
    ec.sampling.rule.samples_per_ball = nodes * 4;
    ec.sampling.seed = run.seed(2);
    ec.quadrature.sources = c.budget("sources", 16);
    ec.quadrature.seed = run.seed(3);
    std::vector<int> ks;
    for (double k : run.option_list("ks")) ks.push_back(static_cast<int>(k));
    const Ball B0(GroupPoint::identity(d), 1.0);
    Table& bt = run.table("f0_bounds", "qsk.f0_bounds/1",
                          {"k", "companion_found", "companion_distance", "companion_constant", "normalizer", "lower",
                           "lower_se", "upper", "upper_se"});
    try {
      const F0BoundTable tab = f0_bound_check(run.kernel(), c.b[0].build(d), B0, w, c.morrey, ks, ec);
      double worst_lower_z = std::numeric_limits<double>::infinity();
      for (const auto& r : tab.rows) {
        bt.add({cell(r.k), cell(r.companion.found ? 1 : 0), cell(r.companion.distance), cell(r.companion.constant),
                cell(r.normalizer), cell(r.lower_value), cell(r.lower_se), cell(r.upper_value), cell(r.upper_se)});
        if (r.companion.found)
          worst_lower_z = std::min(worst_lower_z, r.lower_se > 0.0 ? r.lower_value / r.lower_se : 0.0);
        run.constant("f0.lower(k=" + std::to_string(r.k) + ")", r.lower_value, r.lower_se, "f0_bound_check");
        run.constant("f0.upper(k=" + std::to_string(r.k) + ")", r.upper_value, r.upper_se, "f0_bound_check");
      }
      run.check("f0.companions", "every scale has a sign-constant companion", "f0_bound_check",
                tab.all_companions ? 1.0 : 0.0, 0.0, ">=", 1.0);
      run.check("f0.lower_positive", "normalized lower integrals exceed 3 standard errors", "f0_bound_check",
                worst_lower_z, 0.0, ">", 3.0);
      run.check("f0.upper_uniform", "normalized upper integrals agree within a factor 3 across scales",
                "f0_bound_check", tab.cap_spread, 0.0, "<=", 3.0);
    } catch (const std::domain_error& e) {
      run.check("f0.oscillation", std::string("f0_bound_check refused b: ") + e.what(), "f0_bound_check", 0.0, 0.0,
                ">", 0.0);
    }
  }
  return run.report;
}

/// Runs the named scenario; the config must already be validated.
inline RunReport run_scenario(const RunConfig& c) {
  check_config(c);
  using Fn = RunReport (*)(const RunConfig&);
  static const std::vector<std::pair<std::string, Fn>> table{
      {"group-geometry", run_group_geometry},
      {"kernel-identities", run_kernel_identities},
      {"kernel-bounds", run_kernel_bounds},
      {"weights-and-norms", run_weights_and_norms},
      {"commutator-boundedness", run_commutator_boundedness},
      {"truncation-gap", run_truncation_gap},
      {"vmo-diagnostics", run_vmo_diagnostics},
      {"compactness-probe", run_compactness_probe},
      {"f0-bounds", run_f0_bounds},
  };
  for (const auto& [name, fn] : table)
    if (name == c.scenario) return fn(c);
  throw ConfigError({"scenario: unknown scenario \"" + c.scenario + "\""});
}

}  // namespace qsk::experiments
