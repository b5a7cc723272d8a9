#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "altkin/decouple.hpp"
#include "altkin/helmholtz.hpp"
#include "altkin/model.hpp"
#include "altkin/quadrature.hpp"
#include "altkin/timeonly.hpp"

namespace altkin::families {

namespace detail {

template <class T>
T eval_t(const Expression& e, const T& t) {
  return e.eval_scalar(t, std::span<const T>{});
}

/// d/dt of a scalar expression of t, usable at dual-valued t (lifts one
/// nesting level, so derivatives of derived coefficients stay exact).
template <class T>
T eval_t_dot(const Expression& e, const T& t) {
  const Dual<T> lifted(t, T(1.0));
  return e.eval_scalar(lifted, std::span<const Dual<T>>{}).d;
}

/// Adaptive Gauss-Legendre for the radial integral of the dimension-3
/// vector potential: a single 16-point panel is exact for polynomial
/// integrands; otherwise panels are split until the value settles.
template <class T, class F>
T radial_integral(F& f, double a, double b, int depth) {
  T whole = integrate_gl16(f, a, b);
  const double mid = 0.5 * (a + b);
  T split = integrate_gl16(f, a, mid) + integrate_gl16(f, mid, b);
  if (std::abs(real_part(whole) - real_part(split)) <=
      1e-13 * (1.0 + std::abs(real_part(split))))
    return split;
  if (depth <= 0) throw std::runtime_error("vector potential quadrature did not converge");
  return radial_integral<T>(f, a, mid, depth - 1) + radial_integral<T>(f, mid, b, depth - 1);
}

inline std::vector<double> window_samples(double t0, double t1, int count = 33) {
  std::vector<double> ts(count);
  for (int i = 0; i < count; ++i) ts[i] = t0 + (t1 - t0) * i / (count - 1);
  return ts;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// n = 2 family: rotational vector potential A = (sigma x2, -sigma x1), a
// quadratic scalar potential with coupling l = (m-k) rho, and the closed-form
// multiplier
//   g = 1/2 [[C + B cos(alpha), -B sin(alpha)], [-B sin(alpha), C - B cos(alpha)]]
// with alpha(t) = -2 int sigma + A and rho = 1/2 tan(alpha).
// ---------------------------------------------------------------------------

struct N2Family {
  Expression sigma;  // function of t
  Expression k;      // function of t
  Expression m;      // function of t
  double A = 0.0;
  double B = 1.0;
  double C = 2.0;
};

struct N2Build {
  std::shared_ptr<LinearConnectionSystem> system;
  MultiplierCandidate multiplier;
  TimeMatrix transform;  // rows are the decoupling directions (sin a, cos a +- 1)
  BlockStructure blocks;
  double lambda1 = 0.0, lambda2 = 0.0;
  std::function<double(double)> alpha;
  std::function<double(double)> rho;
  std::function<double(double)> l;
  bool trivial = false;  // sigma == 0 and m == k: decoupled oscillators

  Mat g(double t) const { return multiplier.value(t); }

  /// x = P(t) y transform for check_decoupling; P is the pointwise inverse
  /// of the (non-orthogonal) row transform.
  MatrixPath transform_inverse_path(double t0, double t1, double h) const {
    const TimeMatrix& tr = transform;
    return MatrixPath::sample([&tr](double t) { return inverse(tr(t)); }, t0, t1, h);
  }
};

inline N2Build n2_build(const N2Family& fam, double t0, double t1) {
  if (std::abs(fam.B) < 1e-12)
    throw std::invalid_argument("n2_build: B = 0 makes the multiplier a multiple of the identity");

  const Expression sigma = fam.sigma, kf = fam.k, mf = fam.m;
  const double A = fam.A, B = fam.B, C = fam.C;

  auto sigma_at = [sigma](double t) { return sigma.eval({t, {}, {}}); };
  auto alpha = [sigma_at, A](double t) {
    return -2.0 * integrate_adaptive(sigma_at, 0.0, t, 1e-10) + A;
  };
  auto rho = [alpha](double t) { return 0.5 * std::tan(alpha(t)); };

  const auto samples = detail::window_samples(t0, t1);
  double max_sigma = 0.0, max_mk = 0.0, min_mk = 1e300;
  for (double t : samples) {
    max_sigma = std::max(max_sigma, std::abs(sigma_at(t)));
    const double mk = mf.eval({t, {}, {}}) - kf.eval({t, {}, {}});
    max_mk = std::max(max_mk, std::abs(mk));
    min_mk = std::min(min_mk, std::abs(mk));
  }
  const bool trivial = max_sigma <= 1e-13 && max_mk <= 1e-13;
  if (!trivial) {
    if (min_mk <= 1e-10)
      throw std::invalid_argument("n2_build: m(t) = k(t) somewhere in the window (degenerate, "
                                  "only the fully decoupled sigma = 0, m = k case is supported)");
    for (double t : samples) {
      const double al = alpha(t);
      if (std::abs(std::cos(al)) < 1e-3)
        throw std::invalid_argument("n2_build: alpha(t) passes near a pole of tan in the window; "
                                    "shrink or shift the time window");
      if (std::abs(std::sin(al)) < 1e-3)
        throw std::invalid_argument("n2_build: alpha(t) passes near a zero of sin in the window "
                                    "(l vanishes, transform degenerates)");
    }
  }

  std::function<double(double)> l;
  if (trivial) {
    l = [](double) { return 0.0; };
  } else {
    l = [kf, mf, rho](double t) {
      return (mf.eval({t, {}, {}}) - kf.eval({t, {}, {}})) * rho(t);
    };
  }

  // Connection [[0, sigma], [-sigma, 0]] with exact time derivatives.
  TimeMatrix gamma = TimeMatrix::from_exprs(
      {{Expression::constant(0.0), sigma}, {neg(sigma), Expression::constant(0.0)}});

  // Quadratic potential matrix Q(t) = [[k, l], [l, m]]. ldot follows from
  // rhodot = -(1 + 4 rho^2) sigma, so the derivative is exact as well.
  auto q_val = [kf, mf, l](double t) {
    Mat q(2, 2);
    q(0, 0) = kf.eval({t, {}, {}});
    q(1, 1) = mf.eval({t, {}, {}});
    q(0, 1) = q(1, 0) = l(t);
    return q;
  };
  auto q_d1 = [kf, mf, rho, sigma_at, trivial](double t) {
    Mat q(2, 2);
    const EvalPoint p{t, {}, {}};
    q(0, 0) = kf.deriv(p, Var::time());
    q(1, 1) = mf.deriv(p, Var::time());
    if (trivial) return q;
    const double r = rho(t);
    const double rdot = -(1.0 + 4.0 * r * r) * sigma_at(t);
    const double mk = mf.eval(p) - kf.eval(p);
    const double mkdot = q(1, 1) - q(0, 0);
    q(0, 1) = q(1, 0) = mkdot * r + mk * rdot;
    return q;
  };
  auto q_d2 = [](double) -> Mat {
    throw std::runtime_error("second time derivative of the potential matrix is not provided");
  };

  N2Build out;
  out.system = std::make_shared<LinearConnectionSystem>(
      2, gamma, std::make_shared<QuadraticPotential>(2, TimeMatrix(q_val, q_d1, q_d2, true)));

  auto g_val = [alpha, B, C](double t) {
    const double al = alpha(t);
    Mat g(2, 2);
    g(0, 0) = 0.5 * (C + B * std::cos(al));
    g(1, 1) = 0.5 * (C - B * std::cos(al));
    g(0, 1) = g(1, 0) = -0.5 * B * std::sin(al);
    return g;
  };
  auto g_d1 = [alpha, sigma_at, B](double t) {
    const double al = alpha(t);
    const double aldot = -2.0 * sigma_at(t);
    Mat g(2, 2);
    g(0, 0) = -0.5 * B * std::sin(al) * aldot;
    g(1, 1) = 0.5 * B * std::sin(al) * aldot;
    g(0, 1) = g(1, 0) = -0.5 * B * std::cos(al) * aldot;
    return g;
  };
  auto g_d2 = [](double) -> Mat {
    throw std::runtime_error("second time derivative of the multiplier is not provided");
  };
  out.multiplier =
      MultiplierCandidate::from_callable(2, TimeMatrix(g_val, g_d1, g_d2, true), max_sigma <= 1e-13);

  auto tr_val = [alpha](double t) {
    const double al = alpha(t);
    Mat m(2, 2);
    m(0, 0) = std::sin(al);
    m(0, 1) = std::cos(al) + 1.0;
    m(1, 0) = std::sin(al);
    m(1, 1) = std::cos(al) - 1.0;
    return m;
  };
  auto tr_d1 = [alpha, sigma_at](double t) {
    const double al = alpha(t);
    const double aldot = -2.0 * sigma_at(t);
    Mat m(2, 2);
    m(0, 0) = m(1, 0) = std::cos(al) * aldot;
    m(0, 1) = m(1, 1) = -std::sin(al) * aldot;
    return m;
  };
  out.transform = TimeMatrix(tr_val, tr_d1, g_d2, true);

  out.lambda1 = 0.5 * (C - B);
  out.lambda2 = 0.5 * (C + B);
  out.blocks.blocks = {{out.lambda1, {0}}, {out.lambda2, {1}}};
  out.alpha = alpha;
  out.rho = rho;
  out.l = l;
  out.trivial = trivial;
  return out;
}

// ---------------------------------------------------------------------------
// n = 3 family: connection entries Gamma^1_3 = a Gamma^1_2 + atilde,
// Gamma^2_3 = b Gamma^1_2 + btilde with Gamma^1_2 = f(t,u,v),
// u = x1 - b x3, v = x2 + a x3. The structured multiplier has a double
// eigenvalue c2 and a single eigenvalue c2 - c1 - 1. The vector potential is
// reconstructed from f through a radial integral.
// ---------------------------------------------------------------------------

struct N3Family {
  Expression a;   // a(t); b = +sqrt(c1 - a^2)
  double c1 = 1.0;
  double c2 = 3.0;
  Expression f;   // f(t,u,v) parsed with n = 2: x1 = u, x2 = v
};

struct N3Build {
  std::shared_ptr<EmSystem> system;
  MultiplierCandidate multiplier;
  TimeMatrix transform;          // forward map (u,v,z) = T(t) x
  TimeMatrix transform_inverse;  // x = P(t) (u,v,z); closed-form inverse
  BlockStructure blocks;
  double lambda = 0.0;  // double eigenvalue
  double mu = 0.0;      // single eigenvalue
  std::vector<FieldPtr> vector_potential;

  MatrixPath transform_inverse_path(double t0, double t1, double h) const {
    const TimeMatrix& p = transform_inverse;
    return MatrixPath::sample([&p](double t) { return p(t); }, t0, t1, h);
  }
};

/// The three vector-potential components of the family as AD-capable fields.
inline std::vector<FieldPtr> n3_vector_potential(const N3Family& fam) {
  const Expression a = fam.a, f = fam.f;
  const double c1 = fam.c1;

  // All coefficient functions evaluated at (possibly dual) t.
  auto coeffs = [a, c1](const auto& t) {
    using T = std::decay_t<decltype(t)>;
    const T av = detail::eval_t(a, t);
    const T adot = detail::eval_t_dot(a, t);
    const T bv = sqrt(c1 - av * av);
    const T bdot = -(av * adot) / bv;
    struct Out {
      T a, b, atilde, btilde;
    };
    return Out{av, bv, -bdot, adot};
  };

  auto radial = [f](const auto& t, const auto& u, const auto& v) {
    using T = std::decay_t<decltype(u)>;
    auto integrand = [&](double s) -> T {
      const T args[2] = {u * s, v * s};
      return f.eval_scalar(t, std::span<const T>(args, 2)) * s;
    };
    return detail::radial_integral<T>(integrand, 0.0, 1.0, 16);
  };

  auto a1 = [coeffs, radial](const auto& t, const auto& x) {
    using T = std::decay_t<decltype(t)>;
    const auto c = coeffs(t);
    const T u = x[0] - c.b * x[2];
    const T v = x[1] + c.a * x[2];
    return 2.0 * v * radial(t, u, v) + c.atilde * x[2];
  };
  auto a2 = [coeffs, radial](const auto& t, const auto& x) {
    using T = std::decay_t<decltype(t)>;
    const auto c = coeffs(t);
    const T u = x[0] - c.b * x[2];
    const T v = x[1] + c.a * x[2];
    return -2.0 * u * radial(t, u, v) + c.btilde * x[2];
  };
  auto a3 = [coeffs, radial](const auto& t, const auto& x) {
    using T = std::decay_t<decltype(t)>;
    const auto c = coeffs(t);
    const T u = x[0] - c.b * x[2];
    const T v = x[1] + c.a * x[2];
    return -2.0 * (c.a * u + c.b * v) * radial(t, u, v) - c.atilde * x[0] - c.btilde * x[1];
  };

  return {make_field(3, a1), make_field(3, a2), make_field(3, a3)};
}

inline N3Build n3_build(const N3Family& fam, const Expression& u_pot, const Expression& z_pot,
                        double t0, double t1) {
  const Expression a = fam.a;
  const double c1 = fam.c1, c2 = fam.c2;

  for (double t : detail::window_samples(t0, t1)) {
    const double av = a.eval({t, {}, {}});
    if (c1 - av * av < 1e-6)
      throw std::invalid_argument("n3_build: c1 - a(t)^2 must stay positive on the window");
  }
  if (std::abs(c1 + 1.0) < 1e-12)
    throw std::invalid_argument("n3_build: eigenvalues collapse (c1 = -1)");

  auto coeffs = [a, c1](const auto& t) {
    using T = std::decay_t<decltype(t)>;
    const T av = detail::eval_t(a, t);
    const T bv = sqrt(c1 - av * av);
    struct Out {
      T a, b;
    };
    return Out{av, bv};
  };

  // V(t,x) = U_pot(t,u,v) + Z_pot(t,z) through the structured transform.
  auto v_field = [coeffs, u_pot, z_pot](const auto& t, const auto& x) {
    using T = std::decay_t<decltype(t)>;
    const auto c = coeffs(t);
    const T args_uv[2] = {x[0] - c.b * x[2], x[1] + c.a * x[2]};
    const T args_z[1] = {x[2] + c.b * x[0] - c.a * x[1]};
    return u_pot.eval_scalar(t, std::span<const T>(args_uv, 2)) +
           z_pot.eval_scalar(t, std::span<const T>(args_z, 1));
  };

  N3Build out;
  out.system = std::make_shared<EmSystem>(3, make_field(3, v_field), n3_vector_potential(fam));

  auto ab_at = [a, c1](double t) {
    const double av = a.eval({t, {}, {}});
    const double adot = a.deriv({t, {}, {}}, Var::time());
    const double bv = std::sqrt(c1 - av * av);
    struct Out {
      double a, adot, b, bdot;
    };
    return Out{av, adot, bv, -(av * adot) / bv};
  };

  auto g_val = [ab_at, c2](double t) {
    const auto c = ab_at(t);
    const double cc = c2 - c.b * c.b;
    Mat g(3, 3);
    g(0, 0) = cc;
    g(0, 1) = g(1, 0) = c.a * c.b;
    g(0, 2) = g(2, 0) = -c.b;
    g(1, 1) = cc + c.b * c.b - c.a * c.a;
    g(1, 2) = g(2, 1) = c.a;
    g(2, 2) = cc + c.b * c.b - 1.0;
    return g;
  };
  auto g_d1 = [ab_at](double t) {
    const auto c = ab_at(t);
    Mat g(3, 3);
    g(0, 0) = -2.0 * c.b * c.bdot;
    g(0, 1) = g(1, 0) = c.adot * c.b + c.a * c.bdot;
    g(0, 2) = g(2, 0) = -c.bdot;
    g(1, 1) = -2.0 * c.a * c.adot;
    g(1, 2) = g(2, 1) = c.adot;
    g(2, 2) = 0.0;
    return g;
  };
  auto g_d2 = [](double) -> Mat {
    throw std::runtime_error("second time derivative of the multiplier is not provided");
  };
  out.multiplier = MultiplierCandidate::from_callable(3, TimeMatrix(g_val, g_d1, g_d2, true));

  auto tr_val = [ab_at](double t) {
    const auto c = ab_at(t);
    Mat m(3, 3);
    m(0, 0) = 1.0; m(0, 1) = 0.0; m(0, 2) = -c.b;
    m(1, 0) = 0.0; m(1, 1) = 1.0; m(1, 2) = c.a;
    m(2, 0) = c.b; m(2, 1) = -c.a; m(2, 2) = 1.0;
    return m;
  };
  auto tr_inv_val = [ab_at, c1](double t) {
    const auto c = ab_at(t);
    const double kinv = 1.0 / (c1 + 1.0);  // a^2 + b^2 + 1 is constant
    Mat m(3, 3);
    m(0, 0) = (c.a * c.a + 1.0) * kinv;
    m(0, 1) = c.a * c.b * kinv;
    m(0, 2) = c.b * kinv;
    m(1, 0) = c.a * c.b * kinv;
    m(1, 1) = (c.b * c.b + 1.0) * kinv;
    m(1, 2) = -c.a * kinv;
    m(2, 0) = -c.b * kinv;
    m(2, 1) = c.a * kinv;
    m(2, 2) = kinv;
    return m;
  };
  auto no_d = [](double) -> Mat {
    throw std::runtime_error("time derivative of the structured transform is not provided");
  };
  out.transform = TimeMatrix(tr_val, no_d, no_d, true);
  out.transform_inverse = TimeMatrix(tr_inv_val, no_d, no_d, true);

  out.lambda = c2;
  out.mu = c2 - c1 - 1.0;
  out.blocks.blocks = {{out.lambda, {0, 1}}, {out.mu, {2}}};
  if (out.blocks.blocks[0].eigenvalue > out.blocks.blocks[1].eigenvalue)
    std::swap(out.blocks.blocks[0], out.blocks.blocks[1]);
  out.vector_potential = n3_vector_potential(fam);
  return out;
}

// ---------------------------------------------------------------------------
// Rotating cubic-potential demo (CLI name "sec5"): W = a(t) (y1 - y2)^3 with
// the constant multiplier S = [[1,1,0],[1,1,0],[0,0,1]], rotated around the
// first axis by theta(t).
// ---------------------------------------------------------------------------

/// The symmetric matrices compatible with W = a(t) (y1 - p y2)^3.
inline Mat sec5_general_S(double s1, double k, double m, double p, double s3) {
  Mat s(3, 3);
  s(0, 0) = s1;
  s(0, 1) = s(1, 0) = k;
  s(0, 2) = s(2, 0) = m * p;
  s(1, 1) = s1 + (k / p) * (1.0 - p * p);
  s(1, 2) = s(2, 1) = m;
  s(2, 2) = s3;
  return s;
}

struct Sec5Build {
  Construction construction;
  Expression w;
  Mat s;
  Vec eigenvalues;  // {0, 1, 2} up to ordering
};

inline Sec5Build sec5_build(const Expression& a, const Expression& theta, double t0, double t1,
                            const std::vector<EvalPoint>& sample_points) {
  const Expression y1 = Expression::position(1, 3);
  const Expression y2 = Expression::position(2, 3);
  const Expression w = a * pow(y1 - y2, 3.0);

  const Mat s = sec5_general_S(1.0, 1.0, 0.0, 1.0, 1.0);

  const Expression zero = Expression::constant(0.0);
  const Expression one = Expression::constant(1.0);
  TimeMatrix u = TimeMatrix::from_exprs({{one, zero, zero},
                                         {zero, cos(theta), neg(sin(theta))},
                                         {zero, sin(theta), cos(theta)}});

  Sec5Build out{construct_system(3, w, s, u, sample_points), w, s, sorted_eigenvalues(s)};
  return out;
}

}  // namespace altkin::families
