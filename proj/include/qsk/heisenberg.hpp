#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include "qsk/quaternion.hpp"

namespace qsk {

/// Largest supported n (the group is H^{n-1} with 4(n-1) horizontal coordinates).
inline constexpr int kMaxN = 4;
inline constexpr int kMaxHorizontal = 4 * (kMaxN - 1);

/// Dimensions of H^{n-1}: homogeneous dimension Q = 4n+2, ambient 4n-1.
class GroupDims {
 public:
  explicit GroupDims(int n) : n_(n) {
    if (n < 2 || n > kMaxN) {
      throw std::invalid_argument("GroupDims: n must lie in [2, " + std::to_string(kMaxN) +
                                  "], got " + std::to_string(n));
    }
  }
  int n() const { return n_; }
  int Q() const { return 4 * n_ + 2; }
  int ambient() const { return 4 * n_ - 1; }
  int horizontal() const { return 4 * (n_ - 1); }
  friend bool operator==(GroupDims a, GroupDims b) { return a.n_ == b.n_; }

 private:
  int n_;
};

/// A point (t, y) of H^{n-1}: t in Im H = R^3, y in H^{n-1} = R^{4(n-1)}.
/// Storage is fixed-capacity so points stay allocation free in hot loops.
struct GroupPoint {
  std::array<double, 3> t{};
  std::array<double, kMaxHorizontal> y{};
  int ydim = 4;

  static GroupPoint identity(GroupDims d) {
    GroupPoint g;
    g.ydim = d.horizontal();
    return g;
  }

  GroupDims dims() const { return GroupDims(ydim / 4 + 1); }
  std::span<const double> horizontal() const { return {y.data(), static_cast<std::size_t>(ydim)}; }
  std::span<double> horizontal() { return {y.data(), static_cast<std::size_t>(ydim)}; }

  /// Coordinate k of the flattened (t, y) vector in R^{4n-1}.
  double coord(int k) const { return k < 3 ? t[k] : y[k - 3]; }
  double& coord(int k) { return k < 3 ? t[k] : y[k - 3]; }
  int ambient() const { return 3 + ydim; }

  double y_norm2() const {
    double s = 0.0;
    for (int i = 0; i < ydim; ++i) s += y[i] * y[i];
    return s;
  }
  double t_norm2() const { return t[0] * t[0] + t[1] * t[1] + t[2] * t[2]; }

  friend bool operator==(const GroupPoint& a, const GroupPoint& b) {
    if (a.ydim != b.ydim || a.t != b.t) return false;
    for (int i = 0; i < a.ydim; ++i)
      if (a.y[i] != b.y[i]) return false;
    return true;
  }
};

inline void require_same_dims(const GroupPoint& a, const GroupPoint& b, const char* op) {
  if (a.ydim != b.ydim) {
    throw std::invalid_argument(std::string(op) + ": dimension mismatch (" +
                                std::to_string(a.ydim) + " vs " + std::to_string(b.ydim) + ")");
  }
}

/// Im <y, y'> = Im sum_l conj(y_l) y'_l.
inline std::array<double, 3> im_inner(const GroupPoint& a, const GroupPoint& b) {
  std::array<double, 3> s{0.0, 0.0, 0.0};
  for (int l = 0; l < a.ydim; l += 4) {
    const auto p = im_conj_product(&a.y[l], &b.y[l]);
    s[0] += p[0];
    s[1] += p[1];
    s[2] += p[2];
  }
  return s;
}

/// (t, y)(t', y') = (t + t' + 2 Im<y, y'>, y + y').
inline GroupPoint gmul(const GroupPoint& g, const GroupPoint& h) {
  require_same_dims(g, h, "gmul");
  GroupPoint out;
  out.ydim = g.ydim;
  const auto im = im_inner(g, h);
  for (int a = 0; a < 3; ++a) out.t[a] = g.t[a] + h.t[a] + 2.0 * im[a];
  for (int i = 0; i < g.ydim; ++i) out.y[i] = g.y[i] + h.y[i];
  return out;
}

/// The group law in real variables, summed entry by entry over b^alpha.
/// Independent of gmul's quaternion route; used for cross-checks.
inline GroupPoint gmul_structure(const GroupPoint& g, const GroupPoint& h) {
  require_same_dims(g, h, "gmul_structure");
  GroupPoint out;
  out.ydim = g.ydim;
  for (int a = 0; a < 3; ++a) {
    double s = 0.0;
    for (int l = 0; l < g.ydim; l += 4)
      for (int k = 0; k < 4; ++k)
        for (int j = 0; j < 4; ++j)
          s += StructureMatrices::entry(a, k, j) * g.y[l + k] * h.y[l + j];
    out.t[a] = g.t[a] + h.t[a] + 2.0 * s;
  }
  for (int i = 0; i < g.ydim; ++i) out.y[i] = g.y[i] + h.y[i];
  return out;
}

inline GroupPoint ginv(const GroupPoint& g) {
  GroupPoint out;
  out.ydim = g.ydim;
  for (int a = 0; a < 3; ++a) out.t[a] = -g.t[a];
  for (int i = 0; i < g.ydim; ++i) out.y[i] = -g.y[i];
  return out;
}

/// delta_r(t, y) = (r^2 t, r y).
inline GroupPoint dilate(double r, const GroupPoint& g) {
  if (!(r > 0.0)) throw std::invalid_argument("dilate: r must be positive");
  GroupPoint out;
  out.ydim = g.ydim;
  const double r2 = r * r;
  for (int a = 0; a < 3; ++a) out.t[a] = r2 * g.t[a];
  for (int i = 0; i < g.ydim; ++i) out.y[i] = r * g.y[i];
  return out;
}

/// ||(t, y)|| = (|y|^4 + |t|^2)^{1/4}.
inline double hnorm(const GroupPoint& g) {
  const double y2 = g.y_norm2();
  return std::sqrt(std::sqrt(y2 * y2 + g.t_norm2()));
}

/// rho(h, g) = ||g^{-1} h||, without materializing the product.
inline double rho(const GroupPoint& h, const GroupPoint& g) {
  require_same_dims(h, g, "rho");
  double y2 = 0.0;
  std::array<double, 3> t{h.t[0] - g.t[0], h.t[1] - g.t[1], h.t[2] - g.t[2]};
  for (int l = 0; l < h.ydim; l += 4) {
    const auto p = im_conj_product(&g.y[l], &h.y[l]);
    for (int a = 0; a < 3; ++a) t[a] -= 2.0 * p[a];
    for (int k = 0; k < 4; ++k) {
      const double d = h.y[l + k] - g.y[l + k];
      y2 += d * d;
    }
  }
  return std::sqrt(std::sqrt(y2 * y2 + t[0] * t[0] + t[1] * t[1] + t[2] * t[2]));
}

/// Right-translation by exp(s e_j) along horizontal direction j, i.e. the
/// flow of the left-invariant field Y_j through g.
inline GroupPoint horizontal_flow(const GroupPoint& g, int j, double s) {
  GroupPoint step = GroupPoint::identity(g.dims());
  step.y[j] = s;
  return gmul(g, step);
}

}  // namespace qsk
