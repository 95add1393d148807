#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "qsk/heisenberg.hpp"
#include "qsk/term_series.hpp"

namespace qsk {

/// Smooth step: 0 on (-inf, 1/2], 1 on [1, inf), and
/// h(2t-1) / (h(2t-1) + h(2-2t)) with h(s) = exp(-1/s) in between.
inline double cutoff_phi(double t) {
  if (t <= 0.5) return 0.0;
  if (t >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / (2.0 * t - 1.0));
  const double b = std::exp(-1.0 / (2.0 - 2.0 * t));
  return a / (a + b);
}

/// The cutoff phi used by the truncated kernels. Stateless; kept as a type so
/// the truncation shape is an explicit argument.
struct SmoothCutoff {
  double operator()(double t) const { return cutoff_phi(t); }
  static constexpr double inner = 0.5;  ///< phi == 0 below
  static constexpr double outer = 1.0;  ///< phi == 1 above
};

/// The Cauchy-Szego kernel of H^{n-1}: K(g) = s(|y|^2 + t) with
/// s = c d^{2(n-1)}/dx1^{2(n-1)} [conj(sigma) / |sigma|^4].
class KernelEvaluator {
 public:
  KernelEvaluator(GroupDims dims, double c, std::array<TermSeries, 4> components)
      : dims_(dims), c_(c), series_(std::move(components)) {
    for (int q = 0; q < 4; ++q) {
      compiled_[q] = CompiledSeries(series_[q]);
      for (int i = 0; i < 4; ++i) {
        partial_series_[q][i] = series_[q].differentiate(i + 1);
        compiled_partials_[q][i] = CompiledSeries(partial_series_[q][i]);
        max_a_ = std::max(max_a_, compiled_partials_[q][i].max_exponent());
        max_beta_ = std::max(max_beta_, compiled_partials_[q][i].max_beta());
      }
      max_a_ = std::max(max_a_, compiled_[q].max_exponent());
      max_beta_ = std::max(max_beta_, compiled_[q].max_beta());
    }
    if (max_a_ >= kMaxPow || max_beta_ >= kMaxPow) {
      throw std::invalid_argument("KernelEvaluator: series degree exceeds evaluation table");
    }
  }

  GroupDims dims() const { return dims_; }
  double c() const { return c_; }
  /// Component q (0 = real part) of s.
  const TermSeries& component(int q) const { return series_.at(q); }
  /// d s_q / d x_{i+1}.
  const TermSeries& partial(int q, int i) const { return partial_series_.at(q).at(i); }

  /// Values below this homogeneous norm are treated as the singular point.
  double singular_threshold = 1e-12;

  /// s(sigma) for sigma != 0.
  Quat eval_s(const std::array<double, 4>& x) const {
    Tables tb(x, max_a_, max_beta_);
    return {compiled_[0].evaluate(tb.pow, tb.inv), compiled_[1].evaluate(tb.pow, tb.inv),
            compiled_[2].evaluate(tb.pow, tb.inv), compiled_[3].evaluate(tb.pow, tb.inv)};
  }

  /// ds/dx_i for i = 0..3, each a quaternion.
  std::array<Quat, 4> eval_ds(const std::array<double, 4>& x) const {
    Tables tb(x, max_a_, max_beta_);
    std::array<Quat, 4> out;
    for (int i = 0; i < 4; ++i) {
      out[i] = {compiled_partials_[0][i].evaluate(tb.pow, tb.inv), compiled_partials_[1][i].evaluate(tb.pow, tb.inv),
                compiled_partials_[2][i].evaluate(tb.pow, tb.inv), compiled_partials_[3][i].evaluate(tb.pow, tb.inv)};
    }
    return out;
  }

  static std::array<double, 4> boundary_point(const GroupPoint& g, double eps = 0.0) {
    return {g.y_norm2() + eps, g.t[0], g.t[1], g.t[2]};
  }

 private:
  static constexpr int kMaxPow = 32;

  struct Tables {
    std::array<std::array<double, kMaxPow>, 4> pow;
    std::array<double, kMaxPow> inv;
    Tables(const std::array<double, 4>& x, int max_a, int max_beta) {
      for (int i = 0; i < 4; ++i) {
        pow[i][0] = 1.0;
        for (int k = 1; k <= max_a; ++k) pow[i][k] = pow[i][k - 1] * x[i];
      }
      const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
      const double ir2 = 1.0 / r2;
      inv[0] = 1.0;
      for (int b = 1; b <= max_beta; ++b) inv[b] = inv[b - 1] * ir2;
    }
  };

  GroupDims dims_;
  double c_;
  std::array<TermSeries, 4> series_;
  std::array<std::array<TermSeries, 4>, 4> partial_series_;
  std::array<CompiledSeries, 4> compiled_;
  std::array<std::array<CompiledSeries, 4>, 4> compiled_partials_;
  int max_a_ = 0;
  int max_beta_ = 0;
};

/// Differentiates the seed 2(n-1) times in x1 (exactly) and scales by c.
inline KernelEvaluator build_kernel(GroupDims dims, double c = 1.0) {
  auto comps = seed_series();
  const int order = 2 * (dims.n() - 1);
  for (auto& s : comps) {
    for (int k = 0; k < order; ++k) s = s.differentiate(1);
  }
  // c stays a float factor applied after exact differentiation
  for (auto& s : comps) {
    TermSeries scaled;
    for (const auto& [m, coeff] : s.terms()) scaled.add(m, coeff * Rational(c));
    s = scaled;
  }
  return KernelEvaluator(dims, c, std::move(comps));
}

/// K(g) = s(|y|^2 + t). Rejects points at the singularity.
inline Quat eval_K(const KernelEvaluator& ke, const GroupPoint& g) {
  if (hnorm(g) < ke.singular_threshold) throw std::domain_error("eval_K: evaluation at the identity");
  return ke.eval_s(KernelEvaluator::boundary_point(g));
}

/// Two-point kernel K(g, h) = K(h^{-1} g).
inline Quat eval_K(const KernelEvaluator& ke, const GroupPoint& g, const GroupPoint& h) {
  return eval_K(ke, gmul(ginv(h), g));
}

/// K_eps(g) = s(|y|^2 + eps, t); finite everywhere for eps > 0.
inline Quat eval_K_eps(const KernelEvaluator& ke, const GroupPoint& g, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("eval_K_eps: eps must be positive");
  return ke.eval_s(KernelEvaluator::boundary_point(g, eps));
}

/// K_eta(g, u) = K(u^{-1} g) phi(rho(g, u) / eta).
inline Quat eval_K_eta(const KernelEvaluator& ke, const SmoothCutoff& cutoff, const GroupPoint& g,
                       const GroupPoint& u, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("eval_K_eta: eta must be positive");
  const double d = rho(g, u) / eta;
  if (d <= SmoothCutoff::inner) return Quat{};
  const Quat k = eval_K(ke, gmul(ginv(u), g));
  if (d >= SmoothCutoff::outer) return k;
  return k * cutoff(d);
}

/// Y_m K(g) for m = 0..4(n-1)-1, where
/// Y_{4l+j} = d/dy_{4l+j} + 2 sum_alpha sum_k b^alpha_{kj} y_{4l+k} d/dt_alpha,
/// dK/dy_m = 2 y_m ds/dx1 and dK/dt_alpha = ds/dx_{alpha+1}.
inline std::vector<Quat> horizontal_gradient_K(const KernelEvaluator& ke, const GroupPoint& g) {
  if (hnorm(g) < ke.singular_threshold) throw std::domain_error("horizontal_gradient_K: evaluation at the identity");
  const auto ds = ke.eval_ds(KernelEvaluator::boundary_point(g));
  std::vector<Quat> out(static_cast<std::size_t>(g.ydim));
  for (int l = 0; l < g.ydim; l += 4) {
    for (int j = 0; j < 4; ++j) {
      Quat v = ds[0] * (2.0 * g.y[l + j]);
      for (int a = 0; a < 3; ++a) {
        double coef = 0.0;
        for (int k = 0; k < 4; ++k) coef += StructureMatrices::entry(a, k, j) * g.y[l + k];
        if (coef != 0.0) v += ds[a + 1] * (2.0 * coef);
      }
      out[l + j] = v;
    }
  }
  return out;
}

}  // namespace qsk
