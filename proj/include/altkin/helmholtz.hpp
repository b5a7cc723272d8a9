#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "altkin/model.hpp"
#include "altkin/path.hpp"
#include "altkin/sampling.hpp"

namespace altkin {

/// Candidate alternative multiplier g(t): a matrix of expressions in t, a
/// sampled path, or a raw callable with (optionally exact) time derivative.
class MultiplierCandidate {
 public:
  enum class Kind { Exprs, Path, Callable };

  static MultiplierCandidate from_exprs(std::vector<std::vector<Expression>> entries,
                                        bool claims_constant = false) {
    for (const auto& row : entries)
      for (const auto& e : row)
        if (e.uses_position() || e.uses_velocity())
          throw std::invalid_argument("multiplier entries must depend on t only");
    MultiplierCandidate c;
    c.kind_ = Kind::Exprs;
    c.dim_ = static_cast<int>(entries.size());
    c.m_ = TimeMatrix::from_exprs(std::move(entries));
    c.claims_constant_ = claims_constant;
    return c;
  }

  static MultiplierCandidate from_path(const MatrixPath& path, bool claims_constant = false) {
    MultiplierCandidate c;
    c.kind_ = Kind::Path;
    c.dim_ = path.rows();
    c.m_ = TimeMatrix::from_path(path);
    c.claims_constant_ = claims_constant;
    return c;
  }

  static MultiplierCandidate from_callable(int dim, TimeMatrix m, bool claims_constant = false) {
    MultiplierCandidate c;
    c.kind_ = Kind::Callable;
    c.dim_ = dim;
    c.m_ = std::move(m);
    c.claims_constant_ = claims_constant;
    return c;
  }

  static MultiplierCandidate constant(const Mat& g) {
    MultiplierCandidate c;
    c.kind_ = Kind::Callable;
    c.dim_ = g.rows();
    c.m_ = TimeMatrix::constant(g);
    c.claims_constant_ = true;
    return c;
  }

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  bool claims_constant() const { return claims_constant_; }
  bool exact_derivatives() const { return m_.exact_derivatives(); }

  Mat value(double t) const { return m_(t); }
  Mat ddt(double t) const { return claims_constant_ ? Mat::zero(dim_, dim_) : m_.d1(t); }

 private:
  Kind kind_ = Kind::Callable;
  int dim_ = 0;
  TimeMatrix m_;
  bool claims_constant_ = false;
};

struct Tolerances {
  double exact = 1e-8;    // expression-backed data, AD derivatives
  double sampled = 1e-5;  // path-backed data, FD derivatives
  double symmetry = 1e-10;
  double singular_eps = 1e-8;
  double identity_eps = 1e-8;
};

struct VerifyOptions {
  double t0 = 0.0;
  double t1 = 1.0;
  int grid_steps = 200;
  CloudOptions cloud;
  Tolerances tols;
  std::optional<double> tol_override;  // applies to the residual conditions
};

struct CheckResult {
  double residual = 0.0;
  EvalPoint worst;
};

namespace detail {

inline std::vector<double> check_grid(const VerifyOptions& o) {
  if (o.grid_steps < 4) throw std::invalid_argument("time grid too coarse (< 5 points)");
  std::vector<double> ts(o.grid_steps + 1);
  const double h = (o.t1 - o.t0) / o.grid_steps;
  for (int i = 0; i <= o.grid_steps; ++i) ts[i] = o.t0 + i * h;
  return ts;
}

inline void track(CheckResult& r, double value, const EvalPoint& p) {
  if (value > r.residual) {
    r.residual = value;
    r.worst = p;
  }
}

}  // namespace detail

/// Residual of gdot_ab = g_ac Gamma^c_b + g_bc Gamma^c_a over the time grid,
/// with Gamma sampled at cloud positions (it may depend on x).
inline CheckResult check_dotg(const System& sys, const MultiplierCandidate& g,
                              const VerifyOptions& opt) {
  CheckResult r;
  const auto grid = detail::check_grid(opt);
  const auto cloud = sample_cloud(sys.dim(), opt.t0, opt.t1, opt.cloud);
  for (double t : grid) {
    const Mat gv = g.value(t);
    const Mat gd = g.ddt(t);
    for (const EvalPoint& c : cloud) {
      EvalPoint p{t, c.x, c.xdot};
      const Mat gG = gv * sys.connection(p);
      detail::track(r, max_abs(gd - gG - transpose(gG)), p);
    }
  }
  return r;
}

/// Residual of g_ac dGamma^c_b/dx^r + g_bc dGamma^c_a/dx^r = 0 at the sample
/// points.
inline CheckResult check_skewderiv(const System& sys, const MultiplierCandidate& g,
                                   const std::vector<EvalPoint>& points) {
  CheckResult r;
  const int n = sys.dim();
  for (const EvalPoint& p : points) {
    const Mat gv = g.value(p.t);
    const std::vector<Mat> dG = sys.connection_dx(p);
    for (int rr = 0; rr < n; ++rr) {
      const Mat m = gv * dG[rr];
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) detail::track(r, std::abs(m(a, b) + m(b, a)), p);
    }
  }
  return r;
}

/// Residual of the cyclic condition on gamma_ab = g_ac Gamma^c_b:
/// d(gamma_ar)/dx^b + d(gamma_rb)/dx^a + d(gamma_ba)/dx^r = 0.
inline CheckResult check_curv(const System& sys, const MultiplierCandidate& g,
                              const std::vector<EvalPoint>& points) {
  CheckResult r;
  const int n = sys.dim();
  for (const EvalPoint& p : points) {
    const Mat gv = g.value(p.t);
    const std::vector<Mat> dG = sys.connection_dx(p);
    // D[r](a,b) = d(gamma_ab)/dx^r; g depends on t only.
    std::vector<Mat> D(n);
    for (int rr = 0; rr < n; ++rr) D[rr] = gv * dG[rr];
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int rr = 0; rr < n; ++rr)
          detail::track(r, std::abs(D[b](a, rr) + D[a](rr, b) + D[rr](b, a)), p);
  }
  return r;
}

/// Residual of the curvature condition
/// g_ar R^r_bc + g_br R^r_ca + g_cr R^r_ab = 0.
inline CheckResult check_r_condition(const System& sys, const MultiplierCandidate& g,
                                     const std::vector<EvalPoint>& points) {
  CheckResult r;
  const int n = sys.dim();
  for (const EvalPoint& p : points) {
    const Mat gv = g.value(p.t);
    const std::vector<Mat> R = sys.curvature(p);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) {
          double s = 0.0;
          for (int rr = 0; rr < n; ++rr)
            s += gv(a, rr) * R[rr](b, c) + gv(b, rr) * R[rr](c, a) + gv(c, rr) * R[rr](a, b);
          detail::track(r, std::abs(s), p);
        }
  }
  return r;
}

/// Residual of the condition coupling the scalar and vector potentials: the
/// velocity-free part of the Jacobi endomorphism must stay symmetric after
/// contraction with g. Evaluated as asym(g * Phi(t,x,0)).
inline CheckResult check_veqn(const System& sys, const MultiplierCandidate& g,
                              const std::vector<EvalPoint>& points) {
  CheckResult r;
  for (const EvalPoint& p : points) {
    EvalPoint p0{p.t, p.x, Vec(p.x.size(), 0.0)};
    const Mat m = g.value(p.t) * sys.jacobi(p0);
    detail::track(r, max_asymmetry(m), p0);
  }
  return r;
}

struct ConditionResult {
  std::string name;
  double residual = 0.0;
  double tol = 0.0;
  bool pass = false;
  EvalPoint worst;
};

struct ConditionReport {
  std::vector<ConditionResult> conditions;
  bool singular_warning = false;
  double min_abs_det = 0.0;
  bool multiple_of_identity = false;
  bool exact_data = true;          // both candidate and system have AD derivatives
  std::string candidate_kind;
  double t0 = 0.0, t1 = 1.0;
  int grid_steps = 0;
  int cloud_count = 0;
  unsigned cloud_seed = 0;

  bool all_pass() const {
    for (const auto& c : conditions)
      if (!c.pass) return false;
    return true;
  }

  const ConditionResult* find(const std::string& name) const {
    for (const auto& c : conditions)
      if (c.name == name) return &c;
    return nullptr;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["conditions"] = nlohmann::ordered_json::array();
    for (const auto& c : conditions) {
      nlohmann::ordered_json jc;
      jc["condition"] = c.name;
      jc["residual"] = c.residual;
      jc["tol"] = c.tol;
      jc["pass"] = c.pass;
      jc["worst_point"] = {{"t", c.worst.t}, {"x", c.worst.x}, {"xdot", c.worst.xdot}};
      j["conditions"].push_back(jc);
    }
    j["flags"] = {{"singular_warning", singular_warning},
                  {"min_abs_det", min_abs_det},
                  {"multiple_of_identity", multiple_of_identity},
                  {"exact_data", exact_data}};
    j["candidate_kind"] = candidate_kind;
    j["grid"] = {{"t0", t0}, {"t1", t1}, {"steps", grid_steps}};
    j["cloud"] = {{"count", cloud_count}, {"seed", cloud_seed}};
    j["pass"] = all_pass();
    return j;
  }
};

/// Run the whole condition set for a candidate multiplier. Non-singularity
/// and not-a-multiple-of-identity are reported as flags, not failures: the
/// checks themselves stay meaningful for degenerate candidates.
inline ConditionReport verify_all(const System& sys, const MultiplierCandidate& g,
                                  const VerifyOptions& opt = {}) {
  if (g.dim() != sys.dim())
    throw std::invalid_argument("multiplier dimension does not match the system");

  ConditionReport rep;
  rep.exact_data = g.exact_derivatives() && sys.exact_derivatives();
  rep.candidate_kind = g.kind() == MultiplierCandidate::Kind::Exprs  ? "exprs"
                       : g.kind() == MultiplierCandidate::Kind::Path ? "path"
                                                                     : "callable";
  rep.t0 = opt.t0;
  rep.t1 = opt.t1;
  rep.grid_steps = opt.grid_steps;
  rep.cloud_count = opt.cloud.count;
  rep.cloud_seed = opt.cloud.seed;

  const double cond_tol =
      opt.tol_override.value_or(rep.exact_data ? opt.tols.exact : opt.tols.sampled);

  const auto grid = detail::check_grid(opt);
  const auto cloud = sample_cloud(sys.dim(), opt.t0, opt.t1, opt.cloud);

  // Symmetry of the candidate along the grid.
  {
    ConditionResult c{"symmetry", 0.0, opt.tols.symmetry, false, {}};
    for (double t : grid) {
      const double a = max_asymmetry(g.value(t));
      if (a > c.residual) {
        c.residual = a;
        c.worst = EvalPoint{t, Vec(sys.dim(), 0.0), Vec(sys.dim(), 0.0)};
      }
    }
    c.pass = c.residual <= c.tol;
    rep.conditions.push_back(c);
  }

  if (g.claims_constant()) {
    ConditionResult c{"constant", 0.0, cond_tol, false, {}};
    const Mat g0 = g.value(grid.front());
    for (double t : grid) {
      const double d = max_abs(g.value(t) - g0);
      if (d > c.residual) {
        c.residual = d;
        c.worst = EvalPoint{t, Vec(sys.dim(), 0.0), Vec(sys.dim(), 0.0)};
      }
    }
    c.pass = c.residual <= c.tol;
    rep.conditions.push_back(c);
  }

  auto push = [&](const std::string& name, const CheckResult& r) {
    rep.conditions.push_back({name, r.residual, cond_tol, r.residual <= cond_tol, r.worst});
  };
  push("dotg", check_dotg(sys, g, opt));
  push("skewderiv", check_skewderiv(sys, g, cloud));
  push("curv", check_curv(sys, g, cloud));
  push("R", check_r_condition(sys, g, cloud));
  push("Veqn", check_veqn(sys, g, cloud));

  // Flags: non-singularity and distance from multiples of the identity.
  rep.min_abs_det = std::abs(det(g.value(grid.front())));
  bool away_from_identity = false;
  for (double t : grid) {
    const Mat gv = g.value(t);
    rep.min_abs_det = std::min(rep.min_abs_det, std::abs(det(gv)));
    Mat dev = gv;
    const double mean = trace(gv) / sys.dim();
    for (int i = 0; i < sys.dim(); ++i) dev(i, i) -= mean;
    if (max_abs(dev) > opt.tols.identity_eps) away_from_identity = true;
  }
  rep.singular_warning = rep.min_abs_det < opt.tols.singular_eps;
  rep.multiple_of_identity = !away_from_identity;
  return rep;
}

}  // namespace altkin
