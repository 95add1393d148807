#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qsk/term_series.hpp"

using namespace qsk;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Central second difference of component q of the seed along axis i.
double fd_second(const TermSeries& s, std::array<double, 4> x, int axis, double h) {
  const int i = axis - 1;
  const double x0 = x[i];
  x[i] = x0 + h;
  const double fp = s.evaluate(x);
  x[i] = x0 - h;
  const double fm = s.evaluate(x);
  x[i] = x0;
  return (fp - 2.0 * s.evaluate(x) + fm) / (h * h);
}

}  // namespace

TEST_CASE("seed series", "[term_series]") {
  const auto seed = seed_series();
  CHECK(seed[0].evaluate({1, 0, 0, 0}) == 1.0);
  CHECK(seed[1].evaluate({0, 1, 0, 0}) == -1.0);
  CHECK(seed[2].evaluate({0, 0, 1, 0}) == -1.0);
  CHECK(seed[3].evaluate({0, 0, 0, 2}) == -2.0 / 16.0);
  for (const auto& s : seed) CHECK(s.degree() == -3);
}

TEST_CASE("differentiate by hand", "[term_series]") {
  const TermSeries x1r4 = TermSeries::single(1, {1, 0, 0, 0}, 2);
  TermSeries expected;
  expected.add({{0, 0, 0, 0}, 2}, 1);
  expected.add({{2, 0, 0, 0}, 3}, -4);
  CHECK(x1r4.differentiate(1) == expected);
  CHECK(x1r4.differentiate(1).degree() == -4);

  const TermSeries r4 = TermSeries::single(1, {0, 0, 0, 0}, 2);
  CHECK(r4.differentiate(2) == TermSeries::single(-4, {0, 1, 0, 0}, 3));
  CHECK(TermSeries::single(2, {0, 0, 0, 0}, 2).differentiate(2) == TermSeries::single(-8, {0, 1, 0, 0}, 3));

  // d/dx1 twice of x1 r^-4: {-12 x1 r^-6, 24 x1^3 r^-8}
  TermSeries second;
  second.add({{1, 0, 0, 0}, 3}, -12);
  second.add({{3, 0, 0, 0}, 4}, 24);
  CHECK(x1r4.differentiate(1).differentiate(1) == second);

  CHECK_THROWS_AS(x1r4.differentiate(0), std::invalid_argument);
  CHECK_THROWS_AS(x1r4.differentiate(5), std::invalid_argument);
}

TEST_CASE("canonical merge drops cancelling terms", "[term_series]") {
  TermSeries s;
  s.add({{1, 0, 0, 0}, 1}, Rational(1, 3));
  s.add({{1, 0, 0, 0}, 1}, Rational(-1, 3));
  CHECK(s.empty());
  CHECK_FALSE(s.degree().has_value());

  // mixed partials commute exactly
  const auto seed = seed_series();
  for (const auto& c : seed) {
    for (int i = 1; i <= 4; ++i)
      for (int j = 1; j <= 4; ++j) CHECK(c.differentiate(i).differentiate(j) == c.differentiate(j).differentiate(i));
  }
}

TEST_CASE("second derivatives match finite differences", "[term_series]") {
  const auto seed = seed_series();
  const std::array<double, 4> x{1.0, 0.2, -0.3, 0.4};
  for (int q = 0; q < 4; ++q) {
    for (int axis = 1; axis <= 4; ++axis) {
      const double exact = seed[q].differentiate(axis).differentiate(axis).evaluate(x);
      const double fd = fd_second(seed[q], x, axis, 1e-4);
      CHECK_THAT(fd, WithinAbs(exact, 1e-6 * std::max(1.0, std::abs(exact))));
    }
  }
}

TEST_CASE("homogeneity drops by one per derivative", "[term_series]") {
  TermSeries s = seed_series()[2];
  for (int k = 0; k < 6; ++k) {
    s = s.differentiate(1 + k % 4);
    CHECK(s.degree() == -4 - k);
  }
  // numerical check of the degree: s(lambda x) = lambda^deg s(x)
  const std::array<double, 4> x{0.7, -0.2, 0.5, 0.1};
  const std::array<double, 4> y{1.4, -0.4, 1.0, 0.2};
  CHECK_THAT(s.evaluate(y), WithinRel(std::pow(2.0, *s.degree()) * s.evaluate(x), 1e-12));
}

TEST_CASE("exact evaluation", "[term_series]") {
  TermSeries s = seed_series()[0].differentiate(1).differentiate(1);
  CHECK(s.evaluate_exact({1, 0, 0, 0}) == 12);
  CHECK(s.evaluate_exact({2, 0, 0, 0}) == Rational(3, 8));
  CHECK_THROWS_AS(s.evaluate_exact({0, 0, 0, 0}), std::domain_error);
}

TEST_CASE("JSON round trip", "[term_series]") {
  TermSeries s = seed_series()[3];
  for (int k = 0; k < 4; ++k) s = s.differentiate(1);
  s = s.scaled(Rational(2, 7));
  const auto j = s.to_json();
  CHECK(TermSeries::from_json(j) == s);
  CHECK(j.dump() == TermSeries::from_json(j).to_json().dump());
  CHECK(j[0].at("coeff").at("denominator").get<std::string>() == "7");
  CHECK_THROWS(TermSeries::from_json(nlohmann::json::object()));
}
