#pragma once

#include <functional>
#include <vector>

#include "altkin/matrix.hpp"

namespace altkin {

/// Classical fixed-step RK4 for vector states.
inline Vec rk4_step(const std::function<Vec(double, const Vec&)>& f, double t, const Vec& y,
                    double h) {
  auto axpy = [](const Vec& a, double s, const Vec& b) {
    Vec r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] + s * b[i];
    return r;
  };
  const Vec k1 = f(t, y);
  const Vec k2 = f(t + 0.5 * h, axpy(y, 0.5 * h, k1));
  const Vec k3 = f(t + 0.5 * h, axpy(y, 0.5 * h, k2));
  const Vec k4 = f(t + h, axpy(y, h, k3));
  Vec out(y.size());
  for (size_t i = 0; i < y.size(); ++i)
    out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

/// RK4 for matrix states (used by the flows g' = [g,Gamma] and U' = -Gamma U).
inline Mat rk4_step(const std::function<Mat(double, const Mat&)>& f, double t, const Mat& y,
                    double h) {
  const Mat k1 = f(t, y);
  const Mat k2 = f(t + 0.5 * h, y + k1 * (0.5 * h));
  const Mat k3 = f(t + 0.5 * h, y + k2 * (0.5 * h));
  const Mat k4 = f(t + h, y + k3 * h);
  return y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
}

}  // namespace altkin
