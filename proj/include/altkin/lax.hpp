#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "altkin/matrix.hpp"
#include "altkin/ode.hpp"
#include "altkin/path.hpp"

namespace altkin {

/// Solve gdot = g Gamma - Gamma g by classical RK4 on a fixed grid. With a
/// skew Gamma this is a Lax flow, so the spectrum of g stays put; the solver
/// does not enforce that, it is measured afterwards via eigen_drift.
inline MatrixPath solve_lax(const std::function<Mat(double)>& gamma, const Mat& g0, double t0,
                            double t1, double h) {
  if (h <= 0.0) throw std::invalid_argument("solve_lax: step must be positive");
  if (max_asymmetry(g0) > 1e-10) throw std::invalid_argument("solve_lax: g0 must be symmetric");
  const int steps = MatrixPath::step_count(t0, t1, h);
  const double hh = (t1 - t0) / steps;

  auto rhs = [&](double t, const Mat& g) {
    const Mat G = gamma(t);
    return g * G - G * g;
  };

  std::vector<Mat> out;
  out.reserve(steps + 1);
  Mat g = g0;
  out.push_back(g);
  for (int k = 0; k < steps; ++k) {
    const double t = t0 + k * hh;
    const Mat G = gamma(t);
    if (max_abs(G + transpose(G)) > 1e-10)
      throw std::invalid_argument("solve_lax: connection matrix is not skew-symmetric");
    g = rk4_step(rhs, t, g, hh);
    out.push_back(g);
  }
  return MatrixPath(t0, hh, std::move(out));
}

struct EigenDriftInfo {
  double drift = 0.0;         // max_i |lambda_i(t) - lambda_i(t0)|, sorted matching
  double trace_drift = 0.0;   // max |tr g(t) - tr g(t0)|
  bool crossing_flag = false; // some sorted gap fell below 1e-10
};

inline EigenDriftInfo eigen_drift_info(const MatrixPath& path) {
  EigenDriftInfo info;
  const Vec ref = sorted_eigenvalues(path.at(0));
  const double tr0 = trace(path.at(0));
  for (int k = 0; k < path.size(); ++k) {
    const Vec w = sorted_eigenvalues(path.at(k));
    for (size_t i = 0; i < w.size(); ++i)
      info.drift = std::max(info.drift, std::abs(w[i] - ref[i]));
    for (size_t i = 0; i + 1 < w.size(); ++i)
      if (std::abs(w[i + 1] - w[i]) < 1e-10) info.crossing_flag = true;
    info.trace_drift = std::max(info.trace_drift, std::abs(trace(path.at(k)) - tr0));
  }
  return info;
}

/// Worst-case motion of the (sorted) eigenvalues along the path.
inline double eigen_drift(const MatrixPath& path) { return eigen_drift_info(path).drift; }

inline double symmetry_drift(const MatrixPath& path) {
  double m = 0.0;
  for (int k = 0; k < path.size(); ++k) m = std::max(m, max_asymmetry(path.at(k)));
  return m;
}

}  // namespace altkin
