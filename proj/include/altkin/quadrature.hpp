#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace altkin {

namespace detail {

/// Nodes/weights of 16-point Gauss-Legendre on [-1,1], computed once by
/// Newton iteration on P_16 (machine precision, no tables to mistype).
struct GaussLegendre16 {
  std::array<double, 16> node{}, weight{};

  GaussLegendre16() {
    constexpr int n = 16;
    for (int i = 0; i < n / 2; ++i) {
      double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      double pp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p1 = 1.0, p2 = 0.0;
        for (int j = 0; j < n; ++j) {
          const double p3 = p2;
          p2 = p1;
          p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
        }
        pp = n * (z * p1 - p2) / (z * z - 1.0);
        const double z1 = z;
        z = z1 - p1 / pp;
        if (std::abs(z - z1) < 1e-16) break;
      }
      node[i] = -z;
      node[n - 1 - i] = z;
      weight[i] = 2.0 / ((1.0 - z * z) * pp * pp);
      weight[n - 1 - i] = weight[i];
    }
  }
};

inline const GaussLegendre16& gl16() {
  static const GaussLegendre16 rule;
  return rule;
}

}  // namespace detail

/// 16-point Gauss-Legendre on [a,b]; exact for polynomials up to degree 31.
/// The integrand may return any scalar type supporting +,* with double.
template <class F>
auto integrate_gl16(F&& f, double a, double b) {
  const auto& rule = detail::gl16();
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  auto acc = f(mid + half * rule.node[0]) * (half * rule.weight[0]);
  for (int i = 1; i < 16; ++i) acc = acc + f(mid + half * rule.node[i]) * (half * rule.weight[i]);
  return acc;
}

namespace detail {

template <class F>
double adaptive_simpson_rec(F& f, double a, double b, double fa, double fm, double fb, double whole,
                            double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0) throw std::runtime_error("adaptive quadrature did not converge");
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson with absolute tolerance (default 1e-10).
template <class F>
double integrate_adaptive(F&& f, double a, double b, double tol = 1e-10) {
  if (a == b) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

}  // namespace altkin
