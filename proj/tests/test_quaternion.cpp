#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "qsk/quaternion.hpp"

using namespace qsk;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Hamilton product from the basis table i^2=j^2=k^2=-1, ij=k, jk=i, ki=j.
Quat table_product(const Quat& a, const Quat& b) {
  // e[p][q] = (sign, index) of basis_p * basis_q
  static const int idx[4][4] = {{0, 1, 2, 3}, {1, 0, 3, 2}, {2, 3, 0, 1}, {3, 2, 1, 0}};
  static const int sgn[4][4] = {{1, 1, 1, 1}, {1, -1, 1, -1}, {1, -1, -1, 1}, {1, 1, -1, -1}};
  const double av[4] = {a.x1, a.x2, a.x3, a.x4};
  const double bv[4] = {b.x1, b.x2, b.x3, b.x4};
  double out[4] = {0, 0, 0, 0};
  for (int p = 0; p < 4; ++p)
    for (int q = 0; q < 4; ++q) out[idx[p][q]] += sgn[p][q] * av[p] * bv[q];
  return {out[0], out[1], out[2], out[3]};
}

Quat random_quat(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  return {u(gen), u(gen), u(gen), u(gen)};
}

RationalQuat random_rational_quat(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> num(-50, 50), den(1, 13);
  auto r = [&] { return Rational(num(gen), den(gen)); };
  return {r(), r(), r(), r()};
}

void require_quat(const Quat& a, const Quat& b, double tol = 0.0) {
  REQUIRE_THAT(a.x1, WithinAbs(b.x1, tol));
  REQUIRE_THAT(a.x2, WithinAbs(b.x2, tol));
  REQUIRE_THAT(a.x3, WithinAbs(b.x3, tol));
  REQUIRE_THAT(a.x4, WithinAbs(b.x4, tol));
}

}  // namespace

TEST_CASE("qmul basis products", "[quaternion]") {
  const Quat one = Quat::real(1.0), i = Quat::unit_i(), j = Quat::unit_j(), k = Quat::unit_k();
  const Quat x{0.5, -1.0, 2.0, 3.0};
  CHECK(qmul(one, x) == x);
  CHECK(qmul(i, j) == k);
  CHECK(qmul(j, k) == i);
  CHECK(qmul(k, i) == j);
  CHECK(qmul(j, i) == -k);
  CHECK(qmul(i, i) == Quat::real(-1.0));
  CHECK(qmul(k, k) == Quat::real(-1.0));
}

TEST_CASE("qmul matches the multiplication table", "[quaternion]") {
  std::mt19937_64 gen(11);
  for (int s = 0; s < 1000; ++s) {
    const Quat a = random_quat(gen), b = random_quat(gen);
    require_quat(qmul(a, b), table_product(a, b), 1e-14);
  }
}

TEST_CASE("conjugation", "[quaternion]") {
  CHECK(conj(Quat{1, 2, 3, 4}) == Quat{1, -2, -3, -4});
  const Quat x{1, 1, 0, 0};
  CHECK(qmul(conj(x), x) == Quat{2, 0, 0, 0});
  const Quat i = Quat::unit_i(), j = Quat::unit_j();
  CHECK(conj(qmul(i, j)) == Quat{0, 0, 0, -1});
  CHECK(conj(qmul(i, j)) == qmul(conj(j), conj(i)));

  std::mt19937_64 gen(3);
  for (int s = 0; s < 200; ++s) {
    const Quat a = random_quat(gen), b = random_quat(gen);
    CHECK(conj(conj(a)) == a);
    const Quat lhs = conj(qmul(a, b)), rhs = qmul(conj(b), conj(a));
    require_quat(lhs, rhs, 1e-14 * (1.0 + abs(a) * abs(b)));
    const Quat m = qmul(a, conj(a));
    REQUIRE_THAT(m.x1, WithinRel(norm2(a), 1e-14));
    REQUIRE_THAT(m.x2, WithinAbs(0.0, 1e-14 * norm2(a)));
  }
}

TEST_CASE("modulus is multiplicative", "[quaternion]") {
  std::mt19937_64 gen(5);
  for (int s = 0; s < 10000; ++s) {
    const Quat a = random_quat(gen), b = random_quat(gen);
    REQUIRE_THAT(abs(qmul(a, b)), WithinRel(abs(a) * abs(b), 1e-13));
  }
}

TEST_CASE("exact rational mode", "[quaternion]") {
  std::mt19937_64 gen(17);
  for (int s = 0; s < 300; ++s) {
    const RationalQuat a = random_rational_quat(gen), b = random_rational_quat(gen), c = random_rational_quat(gen);
    CHECK(qmul(qmul(a, b), c) == qmul(a, qmul(b, c)));
    CHECK(conj(qmul(a, b)) == qmul(conj(b), conj(a)));
    CHECK(norm2(qmul(a, b)) == norm2(a) * norm2(b));
  }
}

TEST_CASE("structure matrices are antisymmetric with unit entries", "[quaternion]") {
  for (int a = 0; a < 3; ++a) {
    for (int k = 0; k < 4; ++k) {
      for (int j = 0; j < 4; ++j) {
        const int e = StructureMatrices::entry(a, k, j);
        CHECK(e == -StructureMatrices::entry(a, j, k));
        CHECK((e == -1 || e == 0 || e == 1));
      }
    }
  }
  // first rows as displayed: b1 = [[0,1,0,0],...], b2 = [[0,0,1,0],...], b3 = [[0,0,0,1],...]
  CHECK(StructureMatrices::b[0][0] == std::array<int, 4>{0, 1, 0, 0});
  CHECK(StructureMatrices::b[0][2] == std::array<int, 4>{0, 0, 0, -1});
  CHECK(StructureMatrices::b[1][1] == std::array<int, 4>{0, 0, 0, 1});
  CHECK(StructureMatrices::b[2][1] == std::array<int, 4>{0, 0, -1, 0});
}

TEST_CASE("im_bilinear examples", "[quaternion]") {
  const std::vector<Quat> one{Quat::real(1.0)}, i{Quat::unit_i()}, j{Quat::unit_j()};
  CHECK(im_bilinear<double>(one, one) == std::array<double, 3>{0, 0, 0});
  CHECK(im_bilinear<double>(i, j) == std::array<double, 3>{0, 0, -1});
  CHECK(im_bilinear_structure<double>(i, j) == std::array<double, 3>{0, 0, -1});

  const std::vector<Quat> two(2), three(3);
  CHECK_THROWS_AS(im_bilinear<double>(two, three), std::invalid_argument);
  CHECK_THROWS_AS(im_bilinear_structure<double>(two, three), std::invalid_argument);
}

TEST_CASE("im_bilinear routes agree and are antisymmetric", "[quaternion]") {
  std::mt19937_64 gen(23);
  for (int s = 0; s < 2000; ++s) {
    std::vector<Quat> y(3), yp(3);
    for (auto& q : y) q = random_quat(gen);
    for (auto& q : yp) q = random_quat(gen);
    const auto a = im_bilinear<double>(y, yp);
    const auto b = im_bilinear_structure<double>(y, yp);
    const auto c = im_bilinear<double>(yp, y);
    const auto self = im_bilinear<double>(y, y);
    const double ref = 1.0 + std::abs(a[0]) + std::abs(a[1]) + std::abs(a[2]);
    for (int m = 0; m < 3; ++m) {
      REQUIRE_THAT(a[m], WithinAbs(b[m], 1e-13 * ref));
      REQUIRE_THAT(a[m], WithinAbs(-c[m], 1e-13 * ref));
      REQUIRE_THAT(self[m], WithinAbs(0.0, 1e-13));
    }
    const double ya[4] = {y[0].x1, y[0].x2, y[0].x3, y[0].x4};
    const double yb[4] = {yp[0].x1, yp[0].x2, yp[0].x3, yp[0].x4};
    const auto hot = im_conj_product(ya, yb);
    const auto slow = im_bilinear<double>(std::span(y).first(1), std::span(yp).first(1));
    for (int m = 0; m < 3; ++m) REQUIRE_THAT(hot[m], WithinAbs(slow[m], 1e-13));
  }
  for (int s = 0; s < 200; ++s) {
    std::vector<RationalQuat> y{random_rational_quat(gen), random_rational_quat(gen)};
    std::vector<RationalQuat> yp{random_rational_quat(gen), random_rational_quat(gen)};
    CHECK(im_bilinear<Rational>(y, yp) == im_bilinear_structure<Rational>(y, yp));
  }
}
