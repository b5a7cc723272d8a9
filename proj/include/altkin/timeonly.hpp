#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "altkin/helmholtz.hpp"
#include "altkin/model.hpp"
#include "altkin/ode.hpp"
#include "altkin/path.hpp"

namespace altkin {

/// Solve Udot + Gamma(t) U = 0, U(t0) = I by RK4. For skew Gamma the flow
/// stays on the orthogonal group; the returned path carries the orthogonal
/// tag and is validated against it.
inline MatrixPath solve_U(const std::function<Mat(double)>& gamma, int n, double t0, double t1,
                          double h) {
  const int steps = MatrixPath::step_count(t0, t1, h);
  const double hh = (t1 - t0) / steps;
  auto rhs = [&](double t, const Mat& u) { return (gamma(t) * u) * -1.0; };

  std::vector<Mat> out;
  out.reserve(steps + 1);
  Mat u = Mat::identity(n);
  out.push_back(u);
  for (int k = 0; k < steps; ++k) {
    const double t = t0 + k * hh;
    const Mat G = gamma(t);
    if (max_abs(G + transpose(G)) > 1e-10)
      throw std::invalid_argument("solve_U: connection matrix is not skew-symmetric");
    u = rk4_step(rhs, t, u, hh);
    out.push_back(u);
  }
  for (const Mat& m : out)
    if (max_abs(transpose(m) * m - Mat::identity(n)) > 1e-7)
      throw std::runtime_error("solve_U: orthogonality drifted beyond 1e-7");
  return MatrixPath(t0, hh, std::move(out), true);
}

/// Residual of the constant-multiplier condition on the transformed
/// potential: S Hess_y W must be symmetric at every sample point.
inline CheckResult check_weqn(const Expression& w, const Mat& s,
                              const std::vector<EvalPoint>& points) {
  CheckResult r;
  const int n = s.rows();
  for (const EvalPoint& p : points) {
    Mat hess(n, n);
    for (int a = 0; a < n; ++a)
      for (int c = a; c < n; ++c) {
        const double v = w.deriv2(p, Var::x(a), Var::x(c));
        hess(a, c) = v;
        hess(c, a) = v;
      }
    const double asym = max_asymmetry(s * hess);
    if (asym > r.residual) {
      r.residual = asym;
      r.worst = p;
    }
  }
  return r;
}

/// Scalar potential with exact gradient and Hessian in x.
class Potential {
 public:
  virtual ~Potential() = default;
  virtual int dim() const = 0;
  virtual double value(double t, const Vec& x) const = 0;
  virtual Vec grad(double t, const Vec& x) const = 0;
  virtual Mat hess(double t, const Vec& x) const = 0;
  virtual bool exact_derivatives() const { return true; }
};

using PotentialPtr = std::shared_ptr<const Potential>;

/// V(t,x) = 1/2 x^T Q(t) x with symmetric Q.
class QuadraticPotential final : public Potential {
 public:
  QuadraticPotential(int n, TimeMatrix q) : n_(n), q_(std::move(q)) {}
  int dim() const override { return n_; }
  double value(double t, const Vec& x) const override {
    const Vec qx = q_(t) * x;
    double s = 0.0;
    for (int i = 0; i < n_; ++i) s += x[i] * qx[i];
    return 0.5 * s;
  }
  Vec grad(double t, const Vec& x) const override { return q_(t) * x; }
  Mat hess(double t, const Vec&) const override { return q_(t); }
  bool exact_derivatives() const override { return q_.exact_derivatives(); }

 private:
  int n_;
  TimeMatrix q_;
};

class ExprPotential final : public Potential {
 public:
  explicit ExprPotential(int n, Expression v) : n_(n), v_(std::move(v)) {
    if (v_.uses_velocity()) throw std::invalid_argument("potential must not depend on velocities");
  }
  int dim() const override { return n_; }
  double value(double t, const Vec& x) const override { return v_.eval({t, x, Vec(n_, 0.0)}); }
  Vec grad(double t, const Vec& x) const override {
    EvalPoint p{t, x, Vec(n_, 0.0)};
    Vec g(n_);
    for (int i = 0; i < n_; ++i) g[i] = v_.deriv(p, Var::x(i));
    return g;
  }
  Mat hess(double t, const Vec& x) const override {
    EvalPoint p{t, x, Vec(n_, 0.0)};
    Mat h(n_, n_);
    for (int a = 0; a < n_; ++a)
      for (int c = a; c < n_; ++c) {
        const double v = v_.deriv2(p, Var::x(a), Var::x(c));
        h(a, c) = v;
        h(c, a) = v;
      }
    return h;
  }

 private:
  int n_;
  Expression v_;
};

/// Admissible potential V(t,x) = W(t, U^T(t) x) + 1/2 x^T Gamma^2(t) x built
/// from the transformed potential W and the frame U.
class TransportedPotential final : public Potential {
 public:
  TransportedPotential(int n, Expression w, TimeMatrix u, TimeMatrix gamma)
      : n_(n), w_(std::move(w)), u_(std::move(u)), gamma_(std::move(gamma)) {
    if (w_.uses_velocity()) throw std::invalid_argument("W must not depend on velocities");
  }

  int dim() const override { return n_; }

  double value(double t, const Vec& x) const override {
    const Mat u = u_(t);
    const Vec y = transpose(u) * x;
    const Mat g = gamma_(t);
    const Vec g2x = g * (g * x);
    double quad = 0.0;
    for (int i = 0; i < n_; ++i) quad += x[i] * g2x[i];
    return w_.eval({t, y, Vec(n_, 0.0)}) + 0.5 * quad;
  }

  Vec grad(double t, const Vec& x) const override {
    const Mat u = u_(t);
    const Vec y = transpose(u) * x;
    EvalPoint p{t, y, Vec(n_, 0.0)};
    Vec gw(n_);
    for (int i = 0; i < n_; ++i) gw[i] = w_.deriv(p, Var::x(i));
    const Mat g = gamma_(t);
    Vec out = u * gw;
    const Vec g2x = g * (g * x);
    for (int i = 0; i < n_; ++i) out[i] += g2x[i];
    return out;
  }

  Mat hess(double t, const Vec& x) const override {
    const Mat u = u_(t);
    const Vec y = transpose(u) * x;
    EvalPoint p{t, y, Vec(n_, 0.0)};
    Mat hw(n_, n_);
    for (int a = 0; a < n_; ++a)
      for (int c = a; c < n_; ++c) {
        const double v = w_.deriv2(p, Var::x(a), Var::x(c));
        hw(a, c) = v;
        hw(c, a) = v;
      }
    const Mat g = gamma_(t);
    return u * hw * transpose(u) + g * g;
  }

  bool exact_derivatives() const override {
    return u_.exact_derivatives() && gamma_.exact_derivatives();
  }

 private:
  int n_;
  Expression w_;
  TimeMatrix u_, gamma_;
};

/// System with connection coefficients depending on time only, i.e. vector
/// potential A^a = Gamma^a_b(t) x^b in the fixed gauge:
///
///   xddot = -2 Gamma(t) xdot - dV/dx - Gammadot(t) x.
///
/// The geometric quantities collapse to closed formulas: the connection is
/// Gamma(t) itself, curvature vanishes, Phi = Hess V - Gamma^2.
class LinearConnectionSystem final : public System {
 public:
  LinearConnectionSystem(int n, TimeMatrix gamma, PotentialPtr potential)
      : n_(n), gamma_(std::move(gamma)), pot_(std::move(potential)) {
    const Mat g0 = gamma_(0.0);
    if (g0.rows() != n_ || g0.cols() != n_)
      throw std::invalid_argument("LinearConnectionSystem: connection size mismatch");
  }

  int dim() const override { return n_; }

  Vec force(const EvalPoint& p) const override {
    const Mat g = gamma_(p.t);
    const Mat gd = gamma_.d1(p.t);
    Vec f = pot_->grad(p.t, p.x);
    const Vec a = g * p.xdot;
    const Vec b = gd * p.x;
    for (int i = 0; i < n_; ++i) f[i] = -2.0 * a[i] - f[i] - b[i];
    return f;
  }

  Mat connection(const EvalPoint& p) const override { return gamma_(p.t); }
  std::vector<Mat> connection_dx(const EvalPoint&) const override {
    return std::vector<Mat>(n_, Mat(n_, n_));
  }
  Mat jacobi(const EvalPoint& p) const override {
    const Mat g = gamma_(p.t);
    return pot_->hess(p.t, p.x) - g * g;
  }
  Mat force_jacobian_x(const EvalPoint& p) const override {
    return (pot_->hess(p.t, p.x) + gamma_.d1(p.t)) * -1.0;
  }
  Mat force_jacobian_v(const EvalPoint& p) const override { return gamma_(p.t) * -2.0; }

  bool exact_derivatives() const override {
    return gamma_.exact_derivatives() && pot_->exact_derivatives();
  }

  const TimeMatrix& gamma() const { return gamma_; }
  const Potential& potential() const { return *pot_; }

 private:
  int n_;
  TimeMatrix gamma_;
  PotentialPtr pot_;
};

/// Gamma(t) = -Udot U^T derived from a frame, with its time derivative.
inline TimeMatrix connection_from_frame(const TimeMatrix& u) {
  auto val = [u](double t) { return u.d1(t) * transpose(u(t)) * -1.0; };
  auto d1 = [u](double t) {
    const Mat ud = u.d1(t);
    return (u.d2(t) * transpose(u(t)) + ud * transpose(ud)) * -1.0;
  };
  auto d2 = [](double) -> Mat {
    throw std::runtime_error("second derivative of a derived connection is not available");
  };
  return TimeMatrix(val, d1, d2, u.exact_derivatives());
}

/// g(t) = U(t) S U^T(t), the multiplier transported by the frame.
inline TimeMatrix multiplier_from_S_fn(const TimeMatrix& u, const Mat& s) {
  auto val = [u, s](double t) { return u(t) * s * transpose(u(t)); };
  auto d1 = [u, s](double t) {
    const Mat uv = u(t);
    const Mat ud = u.d1(t);
    return ud * s * transpose(uv) + uv * s * transpose(ud);
  };
  auto d2 = [u, s](double t) {
    const Mat uv = u(t), ud = u.d1(t), udd = u.d2(t);
    return udd * s * transpose(uv) + (ud * s * transpose(ud)) * 2.0 + uv * s * transpose(udd);
  };
  return TimeMatrix(val, d1, d2, u.exact_derivatives());
}

/// Same multiplier as a sampled path on the frame's grid.
inline MatrixPath multiplier_from_S(const MatrixPath& u, const Mat& s) {
  std::vector<Mat> out;
  out.reserve(u.size());
  for (int k = 0; k < u.size(); ++k) out.push_back(u.at(k) * s * transpose(u.at(k)));
  return MatrixPath(u.t0(), u.step(), std::move(out));
}

inline PotentialPtr admissible_V(int n, const Expression& w, const TimeMatrix& u,
                                 const TimeMatrix& gamma) {
  return std::make_shared<TransportedPotential>(n, w, u, gamma);
}

inline PotentialPtr admissible_V(int n, const Expression& w, const MatrixPath& u) {
  const TimeMatrix uf = TimeMatrix::from_path(u);
  return std::make_shared<TransportedPotential>(n, w, uf, connection_from_frame(uf));
}

struct Construction {
  std::shared_ptr<LinearConnectionSystem> system;
  MultiplierCandidate multiplier;
  TimeMatrix u;
  TimeMatrix gamma;
};

/// Build the full system from (W, S, U): derive Gamma = -Udot U^T, transport
/// W into the admissible scalar potential, attach g(t) = U S U^T. Refuses
/// pairs (W,S) that fail the symmetry requirement up front.
inline Construction construct_system(int n, const Expression& w, const Mat& s, const TimeMatrix& u,
                                     const std::vector<EvalPoint>& sample_points,
                                     double weqn_tol = 1e-8) {
  if (s.rows() != n || s.cols() != n) throw std::invalid_argument("construct_system: S size");
  if (max_asymmetry(s) > 1e-10)
    throw std::invalid_argument("construct_system: S must be symmetric");
  const CheckResult wr = check_weqn(w, s, sample_points);
  if (wr.residual > weqn_tol)
    throw std::invalid_argument("construct_system: W does not satisfy the S-symmetry condition "
                                "(residual " + std::to_string(wr.residual) + ")");

  const TimeMatrix gamma = connection_from_frame(u);
  auto pot = std::make_shared<TransportedPotential>(n, w, u, gamma);
  Construction c{std::make_shared<LinearConnectionSystem>(n, gamma, pot),
                 MultiplierCandidate::from_callable(n, multiplier_from_S_fn(u, s)), u, gamma};
  return c;
}

inline Construction construct_system(int n, const Expression& w, const Mat& s, const MatrixPath& u,
                                     const std::vector<EvalPoint>& sample_points,
                                     double weqn_tol = 1e-8) {
  if (!u.orthogonal_tag()) throw std::invalid_argument("construct_system: U must be orthogonal");
  return construct_system(n, w, s, TimeMatrix::from_path(u), sample_points, weqn_tol);
}

}  // namespace altkin
