#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>

#include <boost/multiprecision/cpp_int.hpp>

namespace qsk {

/// Exact rational scalar used by the symbolic kernel engine and exact-mode tests.
using Rational = boost::multiprecision::cpp_rational;

/// x = x1 + x2 i + x3 j + x4 k, stored componentwise.
///
/// T is either double (runtime evaluation) or Rational (exact mode).
template <typename T>
struct Quaternion {
  T x1{}, x2{}, x3{}, x4{};

  static Quaternion real(T r) { return {r, T{}, T{}, T{}}; }
  static Quaternion unit_i() { return {T{}, T{1}, T{}, T{}}; }
  static Quaternion unit_j() { return {T{}, T{}, T{1}, T{}}; }
  static Quaternion unit_k() { return {T{}, T{}, T{}, T{1}}; }

  /// Coefficients of i, j, k.
  std::array<T, 3> imag() const { return {x2, x3, x4}; }

  Quaternion& operator+=(const Quaternion& o) {
    x1 += o.x1; x2 += o.x2; x3 += o.x3; x4 += o.x4;
    return *this;
  }
  Quaternion& operator-=(const Quaternion& o) {
    x1 -= o.x1; x2 -= o.x2; x3 -= o.x3; x4 -= o.x4;
    return *this;
  }
  Quaternion& operator*=(const T& s) {
    x1 *= s; x2 *= s; x3 *= s; x4 *= s;
    return *this;
  }

  friend Quaternion operator+(Quaternion a, const Quaternion& b) { return a += b; }
  friend Quaternion operator-(Quaternion a, const Quaternion& b) { return a -= b; }
  friend Quaternion operator-(const Quaternion& a) { return {-a.x1, -a.x2, -a.x3, -a.x4}; }
  friend Quaternion operator*(Quaternion a, const T& s) { return a *= s; }
  friend Quaternion operator*(const T& s, Quaternion a) { return a *= s; }
  friend bool operator==(const Quaternion& a, const Quaternion& b) {
    return a.x1 == b.x1 && a.x2 == b.x2 && a.x3 == b.x3 && a.x4 == b.x4;
  }
};

using Quat = Quaternion<double>;
using RationalQuat = Quaternion<Rational>;

/// Hamilton product, expanded coordinatewise. Non-commutative.
template <typename T>
Quaternion<T> qmul(const Quaternion<T>& x, const Quaternion<T>& y) {
  return {
      x.x1 * y.x1 - x.x2 * y.x2 - x.x3 * y.x3 - x.x4 * y.x4,
      x.x1 * y.x2 + x.x2 * y.x1 + x.x3 * y.x4 - x.x4 * y.x3,
      x.x1 * y.x3 - x.x2 * y.x4 + x.x3 * y.x1 + x.x4 * y.x2,
      x.x1 * y.x4 + x.x2 * y.x3 - x.x3 * y.x2 + x.x4 * y.x1,
  };
}

template <typename T>
Quaternion<T> operator*(const Quaternion<T>& x, const Quaternion<T>& y) {
  return qmul(x, y);
}

template <typename T>
Quaternion<T> conj(const Quaternion<T>& x) {
  return {x.x1, -x.x2, -x.x3, -x.x4};
}

template <typename T>
T norm2(const Quaternion<T>& x) {
  return x.x1 * x.x1 + x.x2 * x.x2 + x.x3 * x.x3 + x.x4 * x.x4;
}

inline double abs(const Quat& x) { return std::sqrt(norm2(x)); }

/// The three antisymmetric 4x4 matrices b^alpha with
/// Im(conj(x) x') = sum_alpha sum_{k,j} b^alpha_{kj} x_k x'_j i_alpha.
struct StructureMatrices {
  using Matrix = std::array<std::array<int, 4>, 4>;

  static constexpr std::array<Matrix, 3> b{{
      {{{0, 1, 0, 0}, {-1, 0, 0, 0}, {0, 0, 0, -1}, {0, 0, 1, 0}}},
      {{{0, 0, 1, 0}, {0, 0, 0, 1}, {-1, 0, 0, 0}, {0, -1, 0, 0}}},
      {{{0, 0, 0, 1}, {0, 0, -1, 0}, {0, 1, 0, 0}, {-1, 0, 0, 0}}},
  }};

  /// alpha in 0..2, k and j in 0..3 (zero-based).
  static constexpr int entry(int alpha, int k, int j) { return b[alpha][k][j]; }
};

/// Im(conj(x) x') for two real 4-blocks, written out from the structure matrices.
/// This is the hot-path form used by the group law.
inline std::array<double, 3> im_conj_product(const double* x, const double* xp) {
  // antisymmetric pairs are grouped so that x == xp gives exactly zero
  return {
      (x[0] * xp[1] - x[1] * xp[0]) + (x[3] * xp[2] - x[2] * xp[3]),
      (x[0] * xp[2] - x[2] * xp[0]) + (x[1] * xp[3] - x[3] * xp[1]),
      (x[0] * xp[3] - x[3] * xp[0]) + (x[2] * xp[1] - x[1] * xp[2]),
  };
}

/// Im sum_l conj(y_l) y'_l, returned as the (i, j, k) coefficients.
template <typename T>
std::array<T, 3> im_bilinear(std::span<const Quaternion<T>> y, std::span<const Quaternion<T>> yp) {
  if (y.size() != yp.size()) {
    throw std::invalid_argument("im_bilinear: length mismatch");
  }
  std::array<T, 3> out{T{}, T{}, T{}};
  for (std::size_t l = 0; l < y.size(); ++l) {
    const auto p = qmul(conj(y[l]), yp[l]);
    out[0] += p.x2;
    out[1] += p.x3;
    out[2] += p.x4;
  }
  return out;
}

/// Same quantity through the b^alpha bilinear expansion, kept as an
/// independent route for cross-checking im_bilinear.
template <typename T>
std::array<T, 3> im_bilinear_structure(std::span<const Quaternion<T>> y,
                                       std::span<const Quaternion<T>> yp) {
  if (y.size() != yp.size()) {
    throw std::invalid_argument("im_bilinear_structure: length mismatch");
  }
  std::array<T, 3> out{T{}, T{}, T{}};
  for (std::size_t l = 0; l < y.size(); ++l) {
    const std::array<T, 4> a{y[l].x1, y[l].x2, y[l].x3, y[l].x4};
    const std::array<T, 4> c{yp[l].x1, yp[l].x2, yp[l].x3, yp[l].x4};
    for (int alpha = 0; alpha < 3; ++alpha) {
      for (int k = 0; k < 4; ++k) {
        for (int j = 0; j < 4; ++j) {
          const int e = StructureMatrices::entry(alpha, k, j);
          if (e != 0) out[alpha] += T(e) * a[k] * c[j];
        }
      }
    }
  }
  return out;
}

}  // namespace qsk
