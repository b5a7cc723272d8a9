#pragma once

#include <vector>

#include "altkin/expr.hpp"

namespace altkin {

/// Deterministic quasi-random sample cloud for the point-wise condition
/// checks: Halton points in [-box,box]^(2n+1), with the time coordinate
/// mapped into [t0,t1]. The seed offsets the Halton index, so distinct seeds
/// give distinct (still reproducible) clouds.
struct CloudOptions {
  int count = 20;
  unsigned seed = 0;
  double box = 1.0;
};

namespace detail {

inline double halton(unsigned long long index, int base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * (index % base);
    index /= base;
  }
  return r;
}

inline int nth_prime(int k) {
  static const int primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31,
                               37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79};
  return primes[k];
}

}  // namespace detail

inline std::vector<EvalPoint> sample_cloud(int n, double t0, double t1,
                                           const CloudOptions& opt = {}) {
  std::vector<EvalPoint> pts;
  pts.reserve(opt.count);
  for (int j = 0; j < opt.count; ++j) {
    const unsigned long long idx = 1 + j + static_cast<unsigned long long>(opt.seed) * opt.count;
    EvalPoint p;
    const double ut = 2.0 * detail::halton(idx, detail::nth_prime(0)) - 1.0;
    p.t = t0 + 0.5 * (ut + 1.0) * (t1 - t0);
    p.x.resize(n);
    p.xdot.resize(n);
    for (int i = 0; i < n; ++i) {
      p.x[i] = opt.box * (2.0 * detail::halton(idx, detail::nth_prime(1 + i)) - 1.0);
      p.xdot[i] = opt.box * (2.0 * detail::halton(idx, detail::nth_prime(1 + n + i)) - 1.0);
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

}  // namespace altkin
