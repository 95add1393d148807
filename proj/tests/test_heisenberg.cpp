#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qsk/ball.hpp"

using namespace qsk;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

GroupPoint random_point(GroupDims d, Rng& rng, double scale = 2.0) {
  GroupPoint g = GroupPoint::identity(d);
  for (int a = 0; a < 3; ++a) g.t[a] = scale * rng.symmetric();
  for (int i = 0; i < g.ydim; ++i) g.y[i] = scale * rng.symmetric();
  return g;
}

double max_abs_diff(const GroupPoint& a, const GroupPoint& b) {
  double m = 0.0;
  for (int k = 0; k < a.ambient(); ++k) m = std::max(m, std::abs(a.coord(k) - b.coord(k)));
  return m;
}

}  // namespace

TEST_CASE("group dimensions", "[heisenberg]") {
  const GroupDims d(2);
  CHECK(d.Q() == 10);
  CHECK(d.ambient() == 7);
  CHECK(d.horizontal() == 4);
  CHECK(GroupDims(3).Q() == 14);
  CHECK(GroupDims(3).ambient() == 3 + 8);
  CHECK_THROWS_AS(GroupDims(1), std::invalid_argument);
}

TEST_CASE("group law examples", "[heisenberg]") {
  const GroupDims d(2);
  Rng rng(1);
  const GroupPoint e = GroupPoint::identity(d);
  const GroupPoint g = random_point(d, rng);
  CHECK(gmul(e, g) == g);
  CHECK(gmul(g, e) == g);

  GroupPoint a = e, b = e;
  a.y[1] = 1.0;  // y = i
  b.y[2] = 1.0;  // y = j
  const GroupPoint ab = gmul(a, b);
  CHECK(ab.t == std::array<double, 3>{0.0, 0.0, -2.0});
  CHECK(ab.y[1] == 1.0);
  CHECK(ab.y[2] == 1.0);

  CHECK(max_abs_diff(gmul(g, ginv(g)), e) <= 1e-13);
  CHECK(max_abs_diff(gmul(ginv(g), g), e) <= 1e-13);
  CHECK(ginv(e) == e);
  CHECK(ginv(ginv(g)) == g);

  GroupPoint other = GroupPoint::identity(GroupDims(3));
  CHECK_THROWS_AS(gmul(g, other), std::invalid_argument);
  CHECK_THROWS_AS(rho(g, other), std::invalid_argument);
}

TEST_CASE("group law: associativity and agreement with the real-variable form", "[heisenberg]") {
  for (int n : {2, 3}) {
    const GroupDims d(n);
    Rng rng(100 + n);
    for (int s = 0; s < 20000; ++s) {
      const GroupPoint a = random_point(d, rng), b = random_point(d, rng), c = random_point(d, rng);
      REQUIRE(max_abs_diff(gmul(gmul(a, b), c), gmul(a, gmul(b, c))) <= 1e-12);
      REQUIRE(max_abs_diff(gmul(a, b), gmul_structure(a, b)) <= 1e-12);
    }
  }
}

TEST_CASE("dilations", "[heisenberg]") {
  const GroupDims d(2);
  Rng rng(2);
  const GroupPoint g = random_point(d, rng);
  CHECK(dilate(1.0, g) == g);
  GroupPoint h = GroupPoint::identity(d);
  h.t = {1.0, 0.0, 0.0};
  h.y = {0.5, -1.0, 2.0, 0.25};
  const GroupPoint h2 = dilate(2.0, h);
  CHECK(h2.t == std::array<double, 3>{4.0, 0.0, 0.0});
  CHECK(h2.y[0] == 1.0);
  CHECK(h2.y[2] == 4.0);
  CHECK_THROWS_AS(dilate(0.0, g), std::invalid_argument);
  CHECK_THROWS_AS(dilate(-1.0, g), std::invalid_argument);

  for (int s = 0; s < 1000; ++s) {
    const double r = std::exp(rng.uniform(-3.0, 3.0));
    const GroupPoint a = random_point(d, rng), b = random_point(d, rng);
    const GroupPoint lhs = dilate(r, gmul(a, b)), rhs = gmul(dilate(r, a), dilate(r, b));
    REQUIRE(max_abs_diff(lhs, rhs) <= 1e-12 * (1.0 + r * r) * 16.0);
    REQUIRE_THAT(hnorm(dilate(r, a)), WithinRel(r * hnorm(a), 1e-13));
  }
}

TEST_CASE("homogeneous norm and quasi-distance", "[heisenberg]") {
  const GroupDims d(2);
  const GroupPoint e = GroupPoint::identity(d);
  CHECK(hnorm(e) == 0.0);
  GroupPoint g = e;
  g.y = {0.6, 0.0, 0.8, 0.0};
  CHECK_THAT(hnorm(g), WithinRel(1.0, 1e-15));
  g = e;
  g.t = {1.0, 0.0, 0.0};
  CHECK(hnorm(g) == 1.0);

  Rng rng(4);
  for (int s = 0; s < 10000; ++s) {
    const GroupPoint a = random_point(d, rng), b = random_point(d, rng), w = random_point(d, rng);
    REQUIRE(rho(a, a) == 0.0);
    REQUIRE_THAT(rho(a, b), WithinRel(rho(b, a), 1e-12));
    REQUIRE_THAT(rho(a, b), WithinRel(hnorm(gmul(ginv(b), a)), 1e-12));
    REQUIRE_THAT(hnorm(ginv(a)), WithinRel(hnorm(a), 1e-15));
    REQUIRE_THAT(rho(gmul(w, a), gmul(w, b)), WithinRel(rho(a, b), 1e-12));
    const double r = std::exp(rng.uniform(-2.0, 2.0));
    REQUIRE_THAT(rho(dilate(r, a), dilate(r, b)), WithinRel(r * rho(a, b), 1e-12));
  }
}

TEST_CASE("quasi-triangle constant", "[heisenberg]") {
  const GroupDims d(2);
  // collinear points on a y-axis behave like the real line
  GroupPoint h = GroupPoint::identity(d), w = h, g = h;
  h.y[0] = -1.0;
  w.y[0] = 0.5;
  g.y[0] = 2.0;
  CHECK_THAT(rho(h, g) / (rho(h, w) + rho(w, g)), WithinRel(1.0, 1e-15));

  const double c1 = quasi_triangle_constant(d, 1'000'000, 1);
  const double c2 = quasi_triangle_constant(d, 1'000'000, 2);
  CHECK(c1 >= 1.0);
  CHECK(c1 <= 2.1);
  CHECK_THAT(c1, WithinRel(c2, 0.02));
  CHECK_THROWS_AS(quasi_triangle_constant(d, 0, 1), std::invalid_argument);
}

TEST_CASE("unit ball volume", "[heisenberg][ball]") {
  const GroupDims d(2);
  const auto a = unit_ball_volume(d, 2'000'000, 1);
  const auto b = unit_ball_volume(d, 2'000'000, 2);
  CHECK(a.box_volume == 128.0);
  CHECK(a.acceptance > 0.0);
  CHECK(a.acceptance < 1.0);
  CHECK_THAT(a.volume, WithinRel(b.volume, 0.01));
  // closed form for n = 2: 4 pi^3 / 15
  const double exact = 4.0 * std::pow(M_PI, 3) / 15.0;
  CHECK(std::abs(a.volume - exact) <= 4.0 * a.std_error);
  CHECK(std::abs(unit_ball_volume_cached(d).volume - exact) <= 4.0 * unit_ball_volume_cached(d).std_error);

  const Ball unit(GroupPoint::identity(d), 1.0);
  const Ball big(GroupPoint::identity(d), 3.0);
  CHECK_THAT(big.volume() / unit.volume(), WithinRel(std::pow(3.0, 10), 1e-14));
}

TEST_CASE("unit ball volume for larger n", "[heisenberg][ball]") {
  for (int n : {3, 4}) {
    const GroupDims d(n);
    const int m = d.horizontal();
    // V_m (4 pi / 3) int_0^1 m s^{m-1} (1 - s^4)^{3/2} ds by composite Simpson
    const int K = 20000;
    double sum = 0.0;
    for (int k = 0; k <= K; ++k) {
      const double s = static_cast<double>(k) / K;
      const double f = m * std::pow(s, m - 1) * std::pow(1.0 - std::pow(s, 4), 1.5);
      sum += f * (k == 0 || k == K ? 1.0 : (k % 2 ? 4.0 : 2.0));
    }
    const double Vm = std::pow(M_PI, m / 2.0) / std::tgamma(m / 2.0 + 1.0);
    const double exact = Vm * 4.0 * M_PI / 3.0 * sum / (3.0 * K);
    const auto& c = unit_ball_volume_cached(d);
    CHECK(std::abs(c.volume - exact) <= 4.0 * c.std_error);
    CHECK_THAT(c.volume, WithinRel(exact, 1e-3));
  }
  // n = 3 box rejection is slow but feasible: both estimators agree
  const GroupDims d3(3);
  const auto box = unit_ball_volume(d3, 4'000'000, 3);
  const auto& c3 = unit_ball_volume_cached(d3);
  CHECK(std::abs(box.volume - c3.volume) <= 4.0 * std::hypot(box.std_error, c3.std_error));
}

TEST_CASE("radial and box samplers share one law", "[heisenberg][ball]") {
  const GroupDims d(3);
  const int Q = d.Q();
  Rng ra(21), rb(22);
  const int N = 20000;
  double qa = 0, qa2 = 0, ta = 0, ta2 = 0, tb = 0, tb2 = 0, ya = 0, yb = 0;
  for (int k = 0; k < N; ++k) {
    const GroupPoint a = sample_unit_ball_radial(d, ra), b = sample_unit_ball_box(d, rb);
    REQUIRE(hnorm(a) < 1.0);
    const double h = std::pow(hnorm(a), Q);
    qa += h;
    qa2 += h * h;
    ta += a.t_norm2();
    ta2 += a.t_norm2() * a.t_norm2();
    tb += b.t_norm2();
    tb2 += b.t_norm2() * b.t_norm2();
    ya += a.y[0];
    yb += b.y[0];
  }
  // ||v||^Q is uniform on (0, 1)
  CHECK(std::abs(qa / N - 0.5) <= 3.0 * std::sqrt((qa2 / N - qa * qa / N / N) / N));
  const double se = std::sqrt((ta2 / N - ta * ta / N / N) / N + (tb2 / N - tb * tb / N / N) / N);
  CHECK(std::abs(ta / N - tb / N) <= 4.0 * se);
  CHECK(std::abs(ya / N) <= 0.02);
  CHECK(std::abs(yb / N) <= 0.02);
}

TEST_CASE("ball sampling", "[heisenberg][ball]") {
  const GroupDims d(2);
  Rng rng(9);
  const GroupPoint c = random_point(d, rng);
  const Ball b(c, 0.7);
  const auto pts = sample_ball(b, 20000, 5);
  for (const auto& p : pts) REQUIRE(rho(p, c) < 0.7);
  CHECK(sample_ball(b, 100, 5) == std::vector<GroupPoint>(pts.begin(), pts.begin() + 100));

  const Ball unit(GroupPoint::identity(d), 1.0);
  const auto u = sample_ball(unit, 40000, 6);
  for (int i = 0; i < 4; ++i) {
    double m = 0.0, m2 = 0.0;
    for (const auto& p : u) {
      m += p.y[i];
      m2 += p.y[i] * p.y[i];
    }
    m /= u.size();
    const double se = std::sqrt(m2 / u.size() / u.size());
    CHECK(std::abs(m) <= 3.0 * se);
  }

  // fraction of B(0,2) inside B(0,1) is 2^{-Q}
  const std::size_t count = 400000;
  const auto big = sample_ball(Ball(GroupPoint::identity(d), 2.0), count, 7);
  std::size_t inside = 0;
  for (const auto& p : big) inside += hnorm(p) < 1.0;
  const double pexp = std::pow(2.0, -10);
  const double se = std::sqrt(pexp * (1 - pexp) / count);
  CHECK(std::abs(static_cast<double>(inside) / count - pexp) <= 3.0 * se);
  CHECK_THROWS_AS(sample_ball(unit, 0, 1), std::invalid_argument);
}

TEST_CASE("annulus sampling", "[heisenberg][ball]") {
  const GroupDims d(2);
  Rng rng(10);
  const GroupPoint g = random_point(d, rng);
  const auto pts = sample_annulus(g, 0.5, 1.0, 5000, 3);
  for (const auto& p : pts) {
    const double r = rho(p, g);
    REQUIRE(r >= 0.5);
    REQUIRE(r < 1.0);
  }
  const auto full = sample_annulus(g, 0.0, 1.0, 200, 4);
  CHECK(full == sample_ball(Ball(g, 1.0), 200, 4));

  // share of ball samples falling in the annulus matches the volume ratio
  const auto ball = sample_ball(Ball(g, 1.0), 200000, 8);
  std::size_t hits = 0;
  for (const auto& p : ball) {
    const double r = rho(p, g);
    hits += r >= 0.9 && r < 1.0;
  }
  const double pexp = 1.0 - std::pow(0.9, 10);
  const double se = std::sqrt(pexp * (1 - pexp) / ball.size());
  CHECK(std::abs(static_cast<double>(hits) / ball.size() - pexp) <= 3.0 * se);

  CHECK_THROWS_AS(sample_annulus(g, 1.0, 0.5, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_annulus(g, 0.999999, 1.0, 10, 1, 1000), std::runtime_error);
}

TEST_CASE("Haar measure is left invariant", "[heisenberg]") {
  const GroupDims d(2);
  Rng rng(12);
  // E = box [0,1]^3 x [0,1]^4; estimate |w E| via sampling a large enclosing region
  GroupPoint w = random_point(d, rng, 0.5);
  auto in_box = [](const GroupPoint& p) {
    for (int k = 0; k < p.ambient(); ++k)
      if (p.coord(k) < 0.0 || p.coord(k) > 1.0) return false;
    return true;
  };
  // |wE| = measure of {p : w^{-1} p in E}; sample p uniformly in a box containing wE
  const GroupPoint winv = ginv(w);
  double spread = 0.0;
  for (int i = 0; i < 4; ++i) spread += 2.0 * std::abs(w.y[i]);
  const std::size_t count = 400000;
  std::size_t hits = 0;
  for (std::size_t s = 0; s < count; ++s) {
    GroupPoint p = GroupPoint::identity(d);
    for (int a = 0; a < 3; ++a) p.t[a] = w.t[a] - spread + (1.0 + 2.0 * spread) * rng.uniform();
    for (int i = 0; i < 4; ++i) p.y[i] = w.y[i] + rng.uniform();
    hits += in_box(gmul(winv, p));
  }
  const double box = std::pow(1.0 + 2.0 * spread, 3);
  const double frac = static_cast<double>(hits) / count;
  const double est = box * frac;
  const double se = box * std::sqrt(frac * (1 - frac) / count);
  CHECK(std::abs(est - 1.0) <= 3.0 * se);
}

TEST_CASE("ball family", "[heisenberg][ball]") {
  const GroupDims d(2);
  const auto centers = spread_centers(d, 3, 0.1, 10.0, 4);
  const auto balls = balls_from(centers, log_spaced(0.01, 1.0, 3));
  REQUIRE(balls.size() == 9);
  const BallFamily fam(balls, 64, 77);
  for (std::size_t i = 0; i < fam.size(); ++i) {
    for (const auto& p : fam.points(i)) REQUIRE(rho(p, fam.ball(i).center) < fam.ball(i).radius);
  }
  // a ball shared with another family gets the same points
  const BallFamily sub({balls[4]}, 64, 77);
  CHECK(sub.points(0) == fam.points(4));
  CHECK_THROWS_AS(BallFamily(balls, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(Ball(centers[0], 0.0), std::invalid_argument);
}
