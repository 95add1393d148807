#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsk/ball.hpp"

namespace qsk {

/// A real function on the group plus what the estimators need to know about it.
///
/// Evaluation is base(g) + offset. Differences b(g) - b(u) use base only, so
/// adding a constant to a field leaves every commutator bit-identical.
struct ScalarField {
  using Fn = std::function<double(const GroupPoint&)>;
  using Gradient = std::function<std::vector<double>(const GroupPoint&)>;

  std::string name;
  Fn base;
  double offset = 0.0;
  std::optional<Ball> support;          ///< vanishes outside this ball
  std::string smoothness = "measurable"; ///< "C^inf", "lipschitz", "measurable", ...
  std::optional<double> grad_bound;     ///< sup |grad_H f|, if known
  Gradient gradient;                    ///< analytic horizontal gradient, if known
  std::optional<GroupPoint> singular;   ///< point where the field blows up or is not smooth

  double operator()(const GroupPoint& g) const { return base(g) + offset; }
  double difference(const GroupPoint& g, const GroupPoint& u) const { return base(g) - base(u); }

  ScalarField shifted(double c) const {
    ScalarField out = *this;
    out.offset += c;
    out.name = name + "+c";
    return out;
  }

  /// k * f; the support and singular point are kept.
  ScalarField scaled(double k) const {
    ScalarField out = *this;
    Fn fn = base;
    out.base = [fn, k](const GroupPoint& g) { return k * fn(g); };
    out.offset = k * offset;
    if (grad_bound) out.grad_bound = std::abs(k) * *grad_bound;
    if (gradient) {
      Gradient gr = gradient;
      out.gradient = [gr, k](const GroupPoint& g) {
        auto v = gr(g);
        for (double& x : v) x *= k;
        return v;
      };
    }
    out.name = name + "*k";
    return out;
  }

  bool is_constant() const { return smoothness == "constant"; }
};

/// A positive weight; power weights remember their exponent.
struct Weight {
  ScalarField field;
  std::optional<double> power;  ///< w = hnorm^power

  double operator()(const GroupPoint& g) const { return field(g); }
};

namespace fields {

inline ScalarField constant(double c) {
  ScalarField f;
  f.name = "constant";
  f.base = [](const GroupPoint&) { return 0.0; };
  f.offset = c;
  f.smoothness = "constant";
  f.grad_bound = 0.0;
  f.gradient = [](const GroupPoint& g) { return std::vector<double>(static_cast<std::size_t>(g.ydim), 0.0); };
  return f;
}

/// Y_j (|y|^4 + |t|^2) at g, j = 0..4(n-1)-1.
inline std::vector<double> horizontal_gradient_norm4(const GroupPoint& g) {
  const double y2 = g.y_norm2();
  std::vector<double> out(static_cast<std::size_t>(g.ydim));
  for (int l = 0; l < g.ydim; l += 4) {
    for (int j = 0; j < 4; ++j) {
      double v = 4.0 * y2 * g.y[l + j];
      for (int a = 0; a < 3; ++a) {
        double coef = 0.0;
        for (int k = 0; k < 4; ++k) coef += StructureMatrices::entry(a, k, j) * g.y[l + k];
        v += 4.0 * g.t[a] * coef;
      }
      out[l + j] = v;
    }
  }
  return out;
}

namespace detail {

inline double bump_profile(double s) { return s < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - s)) : 0.0; }
inline double bump_profile_derivative(double s) {
  if (s >= 1.0) return 0.0;
  const double u = 1.0 - s;
  return -bump_profile(s) / (u * u);
}

/// sup over the unit bump of |grad_H|, estimated on a fixed dense sample.
inline double unit_bump_grad_sup(GroupDims d) {
  static std::mutex mutex;
  static std::map<int, double> cache;
  std::lock_guard lock(mutex);
  if (auto it = cache.find(d.n()); it != cache.end()) return it->second;
  Rng rng(0xb0b0ULL + d.n());
  double best = 0.0;
  for (int s = 0; s < 400000; ++s) {
    const GroupPoint g = sample_unit_ball(d, rng);
    const double n4 = g.y_norm2() * g.y_norm2() + g.t_norm2();
    const double dpsi = bump_profile_derivative(n4);
    double sq = 0.0;
    for (double v : horizontal_gradient_norm4(g)) sq += v * v;
    best = std::max(best, std::abs(dpsi) * std::sqrt(sq));
  }
  cache[d.n()] = best;
  return best;
}

}  // namespace detail

/// psi(||c^{-1} g||^4 / R^4) with psi(s) = exp(1 - 1/(1 - s)) on [0, 1).
/// ||.||^4 is a polynomial, so the bump is C^inf with support B(c, R).
inline ScalarField smooth_bump(const GroupPoint& center, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("smooth_bump: radius must be positive");
  const GroupPoint cinv = ginv(center);
  const double r4 = radius * radius * radius * radius;
  ScalarField f;
  f.name = "smooth-bump";
  f.base = [cinv, r4](const GroupPoint& g) {
    const GroupPoint h = gmul(cinv, g);
    const double y2 = h.y_norm2();
    return detail::bump_profile((y2 * y2 + h.t_norm2()) / r4);
  };
  f.gradient = [cinv, r4](const GroupPoint& g) {
    const GroupPoint h = gmul(cinv, g);
    const double y2 = h.y_norm2();
    const double dpsi = detail::bump_profile_derivative((y2 * y2 + h.t_norm2()) / r4) / r4;
    auto v = horizontal_gradient_norm4(h);
    for (double& x : v) x *= dpsi;
    return v;
  };
  f.support = Ball(center, radius);
  f.smoothness = "C^inf";
  f.grad_bound = detail::unit_bump_grad_sup(center.dims()) / radius;
  return f;
}

/// log ||g||; singular at the identity.
inline ScalarField log_hnorm(GroupDims d) {
  ScalarField f;
  f.name = "log-hnorm";
  f.base = [](const GroupPoint& g) { return std::log(hnorm(g)); };
  f.smoothness = "singular";
  f.singular = GroupPoint::identity(d);
  return f;
}

/// ||g||^a.
inline ScalarField power_hnorm(GroupDims d, double a) {
  ScalarField f;
  f.name = "power-hnorm";
  f.base = [a](const GroupPoint& g) { return std::pow(hnorm(g), a); };
  f.smoothness = a == 0.0 ? "constant" : "singular";
  if (a == 0.0) {
    f.base = [](const GroupPoint&) { return 0.0; };
    f.offset = 1.0;
  } else {
    f.singular = GroupPoint::identity(d);
  }
  return f;
}

/// Indicator of an open rho-ball.
inline ScalarField ball_indicator(const Ball& b) {
  ScalarField f;
  f.name = "ball-indicator";
  f.base = [b](const GroupPoint& g) { return b.contains(g) ? 1.0 : 0.0; };
  f.support = b;
  f.smoothness = "measurable";
  return f;
}

}  // namespace fields

namespace weights {

inline Weight unit() { return Weight{fields::constant(1.0), 0.0}; }

inline Weight power(GroupDims d, double a) {
  Weight w{fields::power_hnorm(d, a), a};
  w.field.name = "power-weight";
  return w;
}

/// c * w; positive c only.
inline Weight scaled(const Weight& w, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("weights::scaled: factor must be positive");
  return Weight{w.field.scaled(c), w.power};
}

}  // namespace weights

}  // namespace qsk
