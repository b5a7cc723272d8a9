#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "altkin/expr.hpp"
#include "altkin/matrix.hpp"
#include "altkin/ode.hpp"

namespace altkin {

/// Smooth scalar function of (t,x), evaluable with plain doubles or with
/// (nested) dual numbers so that callers can take exact first and second
/// partials through arbitrary composite evaluators.
class ScalarField {
 public:
  virtual ~ScalarField() = default;
  virtual int dim() const = 0;
  virtual double eval(double t, std::span<const double> x) const = 0;
  virtual D1 eval(const D1& t, std::span<const D1> x) const = 0;
  virtual D2 eval(const D2& t, std::span<const D2> x) const = 0;
};

using FieldPtr = std::shared_ptr<const ScalarField>;

namespace detail {

class ExprField final : public ScalarField {
 public:
  explicit ExprField(Expression e) : e_(std::move(e)) {
    if (e_.uses_velocity())
      throw std::invalid_argument("potential fields must not depend on velocities");
  }
  int dim() const override { return e_.dim(); }
  double eval(double t, std::span<const double> x) const override { return e_.eval_scalar(t, x); }
  D1 eval(const D1& t, std::span<const D1> x) const override { return e_.eval_scalar(t, x); }
  D2 eval(const D2& t, std::span<const D2> x) const override { return e_.eval_scalar(t, x); }

 private:
  Expression e_;
};

template <class F>
class LambdaField final : public ScalarField {
 public:
  LambdaField(int dim, F f) : dim_(dim), f_(std::move(f)) {}
  int dim() const override { return dim_; }
  double eval(double t, std::span<const double> x) const override { return f_(t, x); }
  D1 eval(const D1& t, std::span<const D1> x) const override { return f_(t, x); }
  D2 eval(const D2& t, std::span<const D2> x) const override { return f_(t, x); }

 private:
  int dim_;
  F f_;
};

}  // namespace detail

inline FieldPtr make_field(Expression e) {
  return std::make_shared<detail::ExprField>(std::move(e));
}

template <class F>
FieldPtr make_field(int dim, F f) {
  return std::make_shared<detail::LambdaField<F>>(dim, std::move(f));
}

/// d(field)/dw at (t,x) for w in {t, x_i}, by a seeded dual evaluation.
inline double field_deriv(const ScalarField& f, double t, const Vec& x, Var w) {
  std::vector<D1> xs(x.size());
  for (size_t i = 0; i < x.size(); ++i)
    xs[i] = D1(x[i], w == Var::x(static_cast<int>(i)) ? 1.0 : 0.0);
  const D1 td(t, w == Var::time() ? 1.0 : 0.0);
  return f.eval(td, std::span<const D1>(xs)).d;
}

/// Mixed second partial d2(field)/dw1 dw2 via one hyper-dual evaluation.
inline double field_deriv2(const ScalarField& f, double t, const Vec& x, Var w1, Var w2) {
  auto seed = [&](double v, Var self) {
    return D2(D1(v, self == w1 ? 1.0 : 0.0), D1(self == w2 ? 1.0 : 0.0, 0.0));
  };
  std::vector<D2> xs(x.size());
  for (size_t i = 0; i < x.size(); ++i) xs[i] = seed(x[i], Var::x(static_cast<int>(i)));
  const D2 td = seed(t, Var::time());
  return f.eval(td, std::span<const D2>(xs)).d.d;
}

/// Second-order system xddot = F(t,x,xdot) of electromagnetic type, exposed
/// through the handful of geometric quantities the condition checks need.
/// All implementations keep the connection skew and the Jacobi endomorphism
/// symmetric; how exactly the derivatives are produced (AD on expressions,
/// closed formulas, chain rule through a frame change) is up to each one.
class System {
 public:
  virtual ~System() = default;
  virtual int dim() const = 0;

  virtual Vec force(const EvalPoint& p) const = 0;
  /// Connection coefficients Gamma^a_b = -1/2 dF^a/dxdot^b.
  virtual Mat connection(const EvalPoint& p) const = 0;
  /// Partial derivatives of the connection: result[r](a,b) = dGamma^a_b/dx^r.
  virtual std::vector<Mat> connection_dx(const EvalPoint& p) const = 0;
  /// Jacobi endomorphism Phi^a_b.
  virtual Mat jacobi(const EvalPoint& p) const = 0;
  virtual Mat force_jacobian_x(const EvalPoint& p) const = 0;
  virtual Mat force_jacobian_v(const EvalPoint& p) const = 0;
  /// False when time derivatives inside come from sampled paths.
  virtual bool exact_derivatives() const { return true; }

  /// Curvature R^a_bc = dGamma^a_b/dx^c - dGamma^a_c/dx^b, antisymmetric in
  /// (b,c) by construction; result[a](b,c).
  std::vector<Mat> curvature(const EvalPoint& p) const {
    const int n = dim();
    const std::vector<Mat> dG = connection_dx(p);
    std::vector<Mat> R(n, Mat(n, n));
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) R[a](b, c) = dG[c](a, b) - dG[b](a, c);
    return R;
  }
};

using SystemPtr = std::shared_ptr<const System>;

/// First-order right-hand side (xdot, F) for trajectory integration.
inline Vec sode_rhs(const System& sys, const EvalPoint& p) {
  Vec rhs(2 * sys.dim());
  const Vec f = sys.force(p);
  for (int i = 0; i < sys.dim(); ++i) {
    rhs[i] = p.xdot[i];
    rhs[sys.dim() + i] = f[i];
  }
  return rhs;
}

/// RK4 trajectory of the system from (x0, v0); returns the state at t1.
inline EvalPoint integrate_trajectory(const System& sys, const Vec& x0, const Vec& v0, double t0,
                                      double t1, double h) {
  const int n = sys.dim();
  Vec state(2 * n);
  for (int i = 0; i < n; ++i) {
    state[i] = x0[i];
    state[n + i] = v0[i];
  }
  auto rhs = [&](double t, const Vec& s) {
    EvalPoint p{t, Vec(s.begin(), s.begin() + n), Vec(s.begin() + n, s.end())};
    return sode_rhs(sys, p);
  };
  const int steps = static_cast<int>(std::ceil((t1 - t0) / h - 1e-9));
  const double hh = (t1 - t0) / steps;
  double t = t0;
  for (int k = 0; k < steps; ++k, t += hh) state = rk4_step(rhs, t, state, hh);
  return EvalPoint{t1, Vec(state.begin(), state.begin() + n), Vec(state.begin() + n, state.end())};
}

/// System built from a scalar potential V(t,x) and a vector potential
/// A^a(t,x):
///
///   F^a = (dA^b/dx^a - dA^a/dx^b) xdot^b - dV/dx^a - dA^a/dt.
///
/// The connection, Jacobi endomorphism and curvature come out of the same
/// fields by automatic differentiation.
class EmSystem final : public System {
 public:
  EmSystem(int n, FieldPtr v, std::vector<FieldPtr> a) : n_(n), v_(std::move(v)), a_(std::move(a)) {
    if (static_cast<int>(a_.size()) != n_)
      throw std::invalid_argument("EmSystem: need one vector potential component per dimension");
  }

  /// Expression-based constructor; rejects velocity-dependent potentials.
  EmSystem(int n, const Expression& v, const std::vector<Expression>& a)
      : EmSystem(n, make_field(v), to_fields(a)) {}

  int dim() const override { return n_; }

  Vec force(const EvalPoint& p) const override {
    Vec f(n_, 0.0);
    for (int a = 0; a < n_; ++a) {
      double acc = 0.0;
      for (int b = 0; b < n_; ++b)
        acc += (field_deriv(*a_[b], p.t, p.x, Var::x(a)) -
                field_deriv(*a_[a], p.t, p.x, Var::x(b))) *
               p.xdot[b];
      acc -= field_deriv(*v_, p.t, p.x, Var::x(a));
      acc -= field_deriv(*a_[a], p.t, p.x, Var::time());
      f[a] = acc;
    }
    return f;
  }

  Mat connection(const EvalPoint& p) const override {
    Mat g(n_, n_);
    for (int a = 0; a < n_; ++a)
      for (int b = a + 1; b < n_; ++b) {
        const double v = 0.5 * (field_deriv(*a_[a], p.t, p.x, Var::x(b)) -
                                field_deriv(*a_[b], p.t, p.x, Var::x(a)));
        g(a, b) = v;
        g(b, a) = -v;
      }
    return g;
  }

  std::vector<Mat> connection_dx(const EvalPoint& p) const override {
    std::vector<Mat> dG(n_, Mat(n_, n_));
    for (int a = 0; a < n_; ++a)
      for (int b = a + 1; b < n_; ++b)
        for (int r = 0; r < n_; ++r) {
          const double v = 0.5 * (field_deriv2(*a_[a], p.t, p.x, Var::x(b), Var::x(r)) -
                                  field_deriv2(*a_[b], p.t, p.x, Var::x(a), Var::x(r)));
          dG[r](a, b) = v;
          dG[r](b, a) = -v;
        }
    return dG;
  }

  Mat jacobi(const EvalPoint& p) const override {
    const Mat G = connection(p);
    const Mat G2 = G * G;
    Mat phi(n_, n_);
    for (int a = 0; a < n_; ++a)
      for (int c = a; c < n_; ++c) {
        double v = 0.0;
        for (int b = 0; b < n_; ++b)
          v += 0.5 *
               (field_deriv2(*a_[a], p.t, p.x, Var::x(c), Var::x(b)) +
                field_deriv2(*a_[c], p.t, p.x, Var::x(a), Var::x(b)) -
                2.0 * field_deriv2(*a_[b], p.t, p.x, Var::x(a), Var::x(c))) *
               p.xdot[b];
        v -= G2(a, c);
        v += field_deriv2(*v_, p.t, p.x, Var::x(a), Var::x(c));
        v += 0.5 * (field_deriv2(*a_[a], p.t, p.x, Var::time(), Var::x(c)) +
                    field_deriv2(*a_[c], p.t, p.x, Var::time(), Var::x(a)));
        phi(a, c) = v;
        phi(c, a) = v;
      }
    return phi;
  }

  Mat force_jacobian_x(const EvalPoint& p) const override {
    Mat j(n_, n_);
    for (int a = 0; a < n_; ++a)
      for (int c = 0; c < n_; ++c) {
        double v = 0.0;
        for (int b = 0; b < n_; ++b)
          v += (field_deriv2(*a_[b], p.t, p.x, Var::x(a), Var::x(c)) -
                field_deriv2(*a_[a], p.t, p.x, Var::x(b), Var::x(c))) *
               p.xdot[b];
        v -= field_deriv2(*v_, p.t, p.x, Var::x(a), Var::x(c));
        v -= field_deriv2(*a_[a], p.t, p.x, Var::time(), Var::x(c));
        j(a, c) = v;
      }
    return j;
  }

  Mat force_jacobian_v(const EvalPoint& p) const override { return connection(p) * -2.0; }

  const ScalarField& scalar_potential() const { return *v_; }
  const ScalarField& vector_potential(int a) const { return *a_[a]; }

 private:
  static std::vector<FieldPtr> to_fields(const std::vector<Expression>& a) {
    std::vector<FieldPtr> out;
    out.reserve(a.size());
    for (const auto& e : a) out.push_back(make_field(e));
    return out;
  }

  int n_;
  FieldPtr v_;
  std::vector<FieldPtr> a_;
};

}  // namespace altkin
