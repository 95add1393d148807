#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qsk/quaternion.hpp"

namespace qsk {

/// Key of one term: x1^a1 x2^a2 x3^a3 x4^a4 |x|^{-2 beta}.
struct Monomial {
  std::array<int, 4> a{0, 0, 0, 0};
  int beta = 0;

  int degree() const { return a[0] + a[1] + a[2] + a[3] - 2 * beta; }
  friend auto operator<=>(const Monomial&, const Monomial&) = default;
};

/// Finite sum of coeff * x^A * r^{-2 beta} with exact rational coefficients,
/// r^2 = x1^2 + x2^2 + x3^2 + x4^2. Terms are merged by key and zero terms
/// dropped, so two equal series have equal term lists.
class TermSeries {
 public:
  using Terms = std::map<Monomial, Rational>;

  TermSeries() = default;

  void add(const Monomial& m, const Rational& c) {
    if (c == 0) return;
    auto [it, inserted] = terms_.try_emplace(m, c);
    if (!inserted) {
      it->second += c;
      if (it->second == 0) terms_.erase(it);
    }
  }

  static TermSeries single(const Rational& c, std::array<int, 4> a, int beta) {
    TermSeries s;
    s.add(Monomial{a, beta}, c);
    return s;
  }

  const Terms& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }

  /// Common homogeneity degree; nullopt for the empty series.
  /// Throws if terms disagree (never happens for series built by differentiate).
  std::optional<int> degree() const {
    if (terms_.empty()) return std::nullopt;
    const int d = terms_.begin()->first.degree();
    for (const auto& [m, c] : terms_) {
      if (m.degree() != d) throw std::logic_error("TermSeries: inhomogeneous series");
    }
    return d;
  }

  /// d/dx_axis, axis in 1..4:
  /// d[x^A r^{-2b}] = a_i x^{A-e_i} r^{-2b} - 2b x^{A+e_i} r^{-2(b+1)}.
  TermSeries differentiate(int axis) const {
    if (axis < 1 || axis > 4) throw std::invalid_argument("differentiate: axis must be in 1..4");
    const int i = axis - 1;
    TermSeries out;
    for (const auto& [m, c] : terms_) {
      if (m.a[i] > 0) {
        Monomial lowered = m;
        --lowered.a[i];
        out.add(lowered, c * m.a[i]);
      }
      if (m.beta > 0) {
        Monomial raised = m;
        ++raised.a[i];
        ++raised.beta;
        out.add(raised, c * (-2 * m.beta));
      }
    }
    return out;
  }

  TermSeries scaled(const Rational& k) const {
    TermSeries out;
    for (const auto& [m, c] : terms_) out.add(m, c * k);
    return out;
  }

  friend TermSeries operator+(const TermSeries& a, const TermSeries& b) {
    TermSeries out = a;
    for (const auto& [m, c] : b.terms_) out.add(m, c);
    return out;
  }

  friend bool operator==(const TermSeries& a, const TermSeries& b) { return a.terms_ == b.terms_; }

  /// Exact evaluation at a rational point (x != 0).
  Rational evaluate_exact(const std::array<Rational, 4>& x) const {
    const Rational r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
    if (r2 == 0) throw std::domain_error("TermSeries: evaluation at the origin");
    Rational sum = 0;
    for (const auto& [m, c] : terms_) {
      Rational v = c;
      for (int i = 0; i < 4; ++i)
        for (int k = 0; k < m.a[i]; ++k) v *= x[i];
      for (int k = 0; k < m.beta; ++k) v /= r2;
      sum += v;
    }
    return sum;
  }

  /// Straightforward double evaluation; see CompiledSeries for the fast path.
  double evaluate(const std::array<double, 4>& x) const {
    const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
    double sum = 0.0;
    for (const auto& [m, c] : terms_) {
      double v = static_cast<double>(c);
      for (int i = 0; i < 4; ++i) v *= std::pow(x[i], m.a[i]);
      sum += v * std::pow(r2, -m.beta);
    }
    return sum;
  }

  /// Canonical JSON: terms in key order, coefficients as exact strings.
  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [m, c] : terms_) {
      arr.push_back({{"coeff",
                      {{"numerator", boost::multiprecision::numerator(c).str()},
                       {"denominator", boost::multiprecision::denominator(c).str()}}},
                     {"exponents", m.a},
                     {"beta", m.beta}});
    }
    return arr;
  }

  static TermSeries from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw std::invalid_argument("TermSeries: expected a JSON array");
    TermSeries out;
    for (const auto& t : j) {
      Monomial m;
      m.a = t.at("exponents").get<std::array<int, 4>>();
      m.beta = t.at("beta").get<int>();
      for (int v : m.a)
        if (v < 0) throw std::invalid_argument("TermSeries: negative exponent");
      if (m.beta < 0) throw std::invalid_argument("TermSeries: negative beta");
      const Rational c(boost::multiprecision::cpp_int(t.at("coeff").at("numerator").get<std::string>()),
                       boost::multiprecision::cpp_int(t.at("coeff").at("denominator").get<std::string>()));
      out.add(m, c);
    }
    return out;
  }

 private:
  Terms terms_;
};

/// Four components of conj(sigma)/|sigma|^4: x1 r^-4, -x2 r^-4, -x3 r^-4, -x4 r^-4.
inline std::array<TermSeries, 4> seed_series() {
  return {
      TermSeries::single(1, {1, 0, 0, 0}, 2),
      TermSeries::single(-1, {0, 1, 0, 0}, 2),
      TermSeries::single(-1, {0, 0, 1, 0}, 2),
      TermSeries::single(-1, {0, 0, 0, 1}, 2),
  };
}

/// Double-precision snapshot of a TermSeries, evaluated with power tables.
class CompiledSeries {
 public:
  CompiledSeries() = default;
  explicit CompiledSeries(const TermSeries& s) {
    for (const auto& [m, c] : s.terms()) {
      terms_.push_back({static_cast<double>(c), m.a, m.beta});
      for (int i = 0; i < 4; ++i) max_a_ = std::max(max_a_, m.a[i]);
      max_beta_ = std::max(max_beta_, m.beta);
    }
  }

  int max_exponent() const { return max_a_; }
  int max_beta() const { return max_beta_; }

  /// pow[i][k] = x_i^k and inv[b] = r^{-2b} precomputed by the caller.
  template <typename PowTable, typename InvTable>
  double evaluate(const PowTable& pow, const InvTable& inv) const {
    double sum = 0.0;
    for (const auto& t : terms_) {
      sum += t.coeff * pow[0][t.a[0]] * pow[1][t.a[1]] * pow[2][t.a[2]] * pow[3][t.a[3]] * inv[t.beta];
    }
    return sum;
  }

 private:
  struct Term {
    double coeff;
    std::array<int, 4> a;
    int beta;
  };
  std::vector<Term> terms_;
  int max_a_ = 0;
  int max_beta_ = 0;
};

}  // namespace qsk
