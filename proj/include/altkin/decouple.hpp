#pragma once

#include <algorithm>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "json.hpp"

#include "altkin/helmholtz.hpp"
#include "altkin/lax.hpp"
#include "altkin/model.hpp"
#include "altkin/path.hpp"

namespace altkin {

/// Partition of coordinate indices by multiplier eigenvalue.
struct BlockStructure {
  struct Block {
    double eigenvalue = 0.0;
    std::vector<int> indices;
  };
  std::vector<Block> blocks;

  int block_of(int index) const {
    for (size_t b = 0; b < blocks.size(); ++b)
      for (int i : blocks[b].indices)
        if (i == index) return static_cast<int>(b);
    return -1;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& b : blocks) {
      nlohmann::ordered_json x;
      x["eigenvalue"] = b.eigenvalue;
      nlohmann::ordered_json idx = nlohmann::ordered_json::array();
      for (int i : b.indices) idx.push_back(i + 1);  // 1-based, like the language
      x["indices"] = idx;
      j.push_back(x);
    }
    return j;
  }
};

/// Group (near-)equal eigenvalues into blocks; relative gap tolerance 1e-6.
inline BlockStructure group_eigenvalues(const Vec& lambda, double rel_tol = 1e-6) {
  const int n = static_cast<int>(lambda.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return lambda[a] < lambda[b]; });

  double scale = 1.0;
  for (double v : lambda) scale = std::max(scale, std::abs(v));
  const double gap = rel_tol * scale;

  BlockStructure bs;
  for (int k = 0; k < n; ++k) {
    if (bs.blocks.empty() ||
        std::abs(lambda[order[k]] - bs.blocks.back().eigenvalue) > gap)
      bs.blocks.push_back({lambda[order[k]], {}});
    bs.blocks.back().indices.push_back(order[k]);
  }
  return bs;
}

struct DiagonalizeResult {
  MatrixPath P;     // orthogonal, continuous in t
  Vec eigenvalues;  // constant along the path, in column order of P
};

/// Orthogonal diagonalizer path for a symmetric matrix path with constant
/// eigenvalues. Pointwise Jacobi decompositions are stitched together by
/// permuting and sign-flipping columns to best overlap the previous node;
/// the result is a smooth P(t) with P^T g P diagonal.
inline DiagonalizeResult diagonalize_path(const MatrixPath& g, double drift_tol = 1e-5) {
  const int n = g.rows();
  const EigenDriftInfo drift = eigen_drift_info(g);
  if (drift.drift > drift_tol)
    throw std::runtime_error("diagonalize_path: eigenvalues drift by " +
                             std::to_string(drift.drift) + "; not an isospectral path");

  std::vector<Mat> ps;
  ps.reserve(g.size());
  Vec lambda;

  for (int k = 0; k < g.size(); ++k) {
    const SymEigen e = jacobi_eigen(symmetric_part(g.at(k)));
    Mat v = e.vectors;
    Vec w = e.values;

    if (k == 0) {
      // Respect an already-diagonal input; otherwise order ascending.
      if (max_abs(g.at(0) - [&] {
            Mat d(n, n);
            for (int i = 0; i < n; ++i) d(i, i) = g.at(0)(i, i);
            return d;
          }()) > 1e-12 * std::max(1.0, max_abs(g.at(0)))) {
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) { return w[a] < w[b]; });
        Mat vs(n, n);
        Vec ws(n);
        for (int j = 0; j < n; ++j) {
          ws[j] = w[order[j]];
          for (int i = 0; i < n; ++i) vs(i, j) = v(i, order[j]);
        }
        v = vs;
        w = ws;
      }
      lambda = w;
    } else {
      // Greedy column matching against the previous node.
      const Mat& prev = ps.back();
      std::vector<bool> used(n, false);
      Mat matched(n, n);
      for (int j = 0; j < n; ++j) {
        int best = -1;
        double best_dot = -1.0;
        for (int c = 0; c < n; ++c) {
          if (used[c]) continue;
          double dot = 0.0;
          for (int i = 0; i < n; ++i) dot += prev(i, j) * v(i, c);
          if (std::abs(dot) > best_dot) {
            best_dot = std::abs(dot);
            best = c;
          }
        }
        if (best_dot < 0.5)
          throw std::runtime_error(
              "diagonalize_path: eigenvector continuation ambiguous (eigenvalue crossing?)");
        used[best] = true;
        double dot = 0.0;
        for (int i = 0; i < n; ++i) dot += prev(i, j) * v(i, best);
        const double sign = dot >= 0 ? 1.0 : -1.0;
        for (int i = 0; i < n; ++i) matched(i, j) = sign * v(i, best);
      }
      v = matched;
    }
    ps.push_back(v);
  }

  return DiagonalizeResult{MatrixPath(g.t0(), g.step(), std::move(ps), true), lambda};
}

/// Connection matrix in the transformed frame: P^T Gamma P + P^T Pdot,
/// with Pdot from the grid. Still skew-symmetric for orthogonal P.
inline MatrixPath transformed_connection(const MatrixPath& gamma, const MatrixPath& P) {
  std::vector<Mat> out;
  out.reserve(P.size());
  for (int k = 0; k < P.size(); ++k) {
    const double t = P.time_at(k);
    const Mat pt = transpose(P.at(k));
    out.push_back(pt * gamma.value(t) * P.at(k) + pt * P.deriv1_at(k));
  }
  return MatrixPath(P.t0(), P.step(), std::move(out));
}

struct DecouplingReport {
  BlockStructure blocks;
  Vec eigenvalues;
  double cross_dy = 0.0;   // max cross-block |dFtilde/dy|
  double cross_dv = 0.0;   // max cross-block |dFtilde/dydot|
  int samples = 0;
  EvalPoint worst;

  double residual() const { return std::max(cross_dy, cross_dv); }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["blocks"] = blocks.to_json();
    j["eigenvalues"] = eigenvalues;
    j["cross_residual_dy"] = cross_dy;
    j["cross_residual_dv"] = cross_dv;
    j["samples"] = samples;
    return j;
  }
};

/// Cross-block coupling of the transformed forces under x = P(t) y. For each
/// sample (t,y,ydot) the Jacobians of
///   Ftilde = P^{-1} (F(t, Py, Pdot y + P ydot) - Pddot y - 2 Pdot ydot)
/// are assembled by the chain rule; entries linking different eigenvalue
/// blocks should vanish for an admissible multiplier.
inline DecouplingReport check_decoupling(const System& sys, const MatrixPath& P,
                                         const BlockStructure& blocks,
                                         const std::vector<EvalPoint>& points,
                                         bool orthogonal = true) {
  DecouplingReport rep;
  rep.blocks = blocks;
  rep.samples = static_cast<int>(points.size());

  const MatrixPath Pd1 = P.derivative1();
  const MatrixPath Pd2 = P.derivative2();
  const int n = sys.dim();

  for (const EvalPoint& p : points) {
    const Mat pm = P.value(p.t);
    const Mat pd = Pd1.value(p.t);
    const Mat pdd = Pd2.value(p.t);
    Mat pinv;
    if (orthogonal) {
      pinv = transpose(pm);
    } else {
      if (std::abs(det(pm)) < 1e-12)
        throw std::runtime_error("check_decoupling: singular transform sample");
      pinv = inverse(pm);
    }

    const Vec x = pm * p.x;
    Vec xdot = pd * p.x;
    {
      const Vec tmp = pm * p.xdot;
      for (int i = 0; i < n; ++i) xdot[i] += tmp[i];
    }
    EvalPoint q{p.t, x, xdot};
    const Mat ax = sys.force_jacobian_x(q);
    const Mat av = sys.force_jacobian_v(q);

    const Mat dy = pinv * (ax * pm + av * pd - pdd);
    const Mat dv = pinv * (av * pm - pd * 2.0);

    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (blocks.block_of(i) == blocks.block_of(j)) continue;
        if (std::abs(dy(i, j)) > rep.cross_dy) {
          rep.cross_dy = std::abs(dy(i, j));
          rep.worst = p;
        }
        rep.cross_dv = std::max(rep.cross_dv, std::abs(dv(i, j)));
      }
  }
  return rep;
}

/// Direct sum of independent subsystems on the concatenated coordinates.
class DirectSumSystem final : public System {
 public:
  explicit DirectSumSystem(std::vector<SystemPtr> subs) : subs_(std::move(subs)) {
    offsets_.reserve(subs_.size());
    int off = 0;
    for (const auto& s : subs_) {
      offsets_.push_back(off);
      off += s->dim();
    }
    n_ = off;
  }

  int dim() const override { return n_; }

  Vec force(const EvalPoint& p) const override {
    Vec f(n_);
    for (size_t k = 0; k < subs_.size(); ++k) {
      const Vec sub = subs_[k]->force(slice(p, k));
      for (int i = 0; i < subs_[k]->dim(); ++i) f[offsets_[k] + i] = sub[i];
    }
    return f;
  }

  Mat connection(const EvalPoint& p) const override {
    return assemble([&](size_t k) { return subs_[k]->connection(slice(p, k)); });
  }

  std::vector<Mat> connection_dx(const EvalPoint& p) const override {
    std::vector<Mat> dG(n_, Mat(n_, n_));
    for (size_t k = 0; k < subs_.size(); ++k) {
      const auto sub = subs_[k]->connection_dx(slice(p, k));
      const int m = subs_[k]->dim(), off = offsets_[k];
      for (int r = 0; r < m; ++r)
        for (int a = 0; a < m; ++a)
          for (int b = 0; b < m; ++b) dG[off + r](off + a, off + b) = sub[r](a, b);
    }
    return dG;
  }

  Mat jacobi(const EvalPoint& p) const override {
    return assemble([&](size_t k) { return subs_[k]->jacobi(slice(p, k)); });
  }
  Mat force_jacobian_x(const EvalPoint& p) const override {
    return assemble([&](size_t k) { return subs_[k]->force_jacobian_x(slice(p, k)); });
  }
  Mat force_jacobian_v(const EvalPoint& p) const override {
    return assemble([&](size_t k) { return subs_[k]->force_jacobian_v(slice(p, k)); });
  }

  bool exact_derivatives() const override {
    for (const auto& s : subs_)
      if (!s->exact_derivatives()) return false;
    return true;
  }

 private:
  EvalPoint slice(const EvalPoint& p, size_t k) const {
    const int off = offsets_[k], m = subs_[k]->dim();
    return EvalPoint{p.t, Vec(p.x.begin() + off, p.x.begin() + off + m),
                     Vec(p.xdot.begin() + off, p.xdot.begin() + off + m)};
  }

  template <class F>
  Mat assemble(F&& block) const {
    Mat m(n_, n_);
    for (size_t k = 0; k < subs_.size(); ++k) {
      const Mat sub = block(k);
      for (int i = 0; i < subs_[k]->dim(); ++i)
        for (int j = 0; j < subs_[k]->dim(); ++j) m(offsets_[k] + i, offsets_[k] + j) = sub(i, j);
    }
    return m;
  }

  std::vector<SystemPtr> subs_;
  std::vector<int> offsets_;
  int n_ = 0;
};

/// The system seen through the time-dependent frame x = P(t) y, where the
/// inner system lives in the y coordinates and P is an orthogonal path.
class FrameChangedSystem final : public System {
 public:
  FrameChangedSystem(SystemPtr inner, const MatrixPath& P)
      : inner_(std::move(inner)),
        p_(P),
        pd1_(P.derivative1()),
        pd2_(P.derivative2()) {
    if (!P.orthogonal_tag()) throw std::invalid_argument("FrameChangedSystem: P must be orthogonal");
    if (P.rows() != inner_->dim())
      throw std::invalid_argument("FrameChangedSystem: dimension mismatch");
  }

  int dim() const override { return inner_->dim(); }

  Vec force(const EvalPoint& p) const override {
    Frame f = frame(p);
    const Vec fy = inner_->force(f.q);
    Vec out = f.pdd * f.y;
    const Vec b = f.pd * f.ydot;
    const Vec c = f.pm * fy;
    for (int i = 0; i < dim(); ++i) out[i] += 2.0 * b[i] + c[i];
    return out;
  }

  Mat connection(const EvalPoint& p) const override {
    Frame f = frame(p);
    return f.pm * inner_->connection(f.q) * transpose(f.pm) - f.pd * transpose(f.pm);
  }

  std::vector<Mat> connection_dx(const EvalPoint& p) const override {
    Frame f = frame(p);
    const auto inner_dg = inner_->connection_dx(f.q);
    const int n = dim();
    std::vector<Mat> out(n, Mat(n, n));
    const Mat pt = transpose(f.pm);
    std::vector<Mat> rotated(n);
    for (int s = 0; s < n; ++s) rotated[s] = f.pm * inner_dg[s] * pt;
    for (int r = 0; r < n; ++r) {
      Mat acc(n, n);
      for (int s = 0; s < n; ++s) acc += rotated[s] * f.pm(r, s);
      out[r] = acc;
    }
    return out;
  }

  Mat jacobi(const EvalPoint& p) const override {
    Frame f = frame(p);
    return f.pm * inner_->jacobi(f.q) * transpose(f.pm);
  }

  Mat force_jacobian_x(const EvalPoint& p) const override {
    Frame f = frame(p);
    const Mat ay = inner_->force_jacobian_x(f.q);
    const Mat by = inner_->force_jacobian_v(f.q);
    const Mat pt = transpose(f.pm);
    return f.pm * ay * pt + f.pdd * pt + (f.pd * transpose(f.pd)) * 2.0 +
           f.pm * by * transpose(f.pd);
  }

  Mat force_jacobian_v(const EvalPoint& p) const override {
    Frame f = frame(p);
    return f.pm * inner_->force_jacobian_v(f.q) * transpose(f.pm) +
           f.pd * transpose(f.pm) * 2.0;
  }

  bool exact_derivatives() const override { return false; }  // FD on the frame path

 private:
  struct Frame {
    Mat pm, pd, pdd;
    Vec y, ydot;
    EvalPoint q;
  };

  Frame frame(const EvalPoint& p) const {
    Frame f;
    f.pm = p_.value(p.t);
    f.pd = pd1_.value(p.t);
    f.pdd = pd2_.value(p.t);
    const Mat pt = transpose(f.pm);
    f.y = pt * p.x;
    f.ydot = transpose(f.pd) * p.x;
    const Vec tmp = pt * p.xdot;
    for (size_t i = 0; i < f.ydot.size(); ++i) f.ydot[i] += tmp[i];
    f.q = EvalPoint{p.t, f.y, f.ydot};
    return f;
  }

  SystemPtr inner_;
  MatrixPath p_, pd1_, pd2_;
};

struct Composition {
  SystemPtr system;
  MultiplierCandidate multiplier;
  BlockStructure blocks;
};

/// Reverse engineering: take k independent subsystems, give each eigenvalue
/// lambda_k, rotate the direct sum by an orthogonal P(t). The result carries
/// g(t) = P diag(lambda) P^T as an alternative multiplier.
inline Composition compose_coupled(std::vector<SystemPtr> subsystems, const Vec& lambdas,
                                   const MatrixPath& P) {
  if (subsystems.size() != lambdas.size())
    throw std::invalid_argument("compose_coupled: one eigenvalue per subsystem");
  for (size_t i = 0; i < lambdas.size(); ++i) {
    if (lambdas[i] == 0.0) throw std::invalid_argument("compose_coupled: eigenvalues must be nonzero");
    for (size_t j = i + 1; j < lambdas.size(); ++j)
      if (lambdas[i] == lambdas[j])
        throw std::invalid_argument("compose_coupled: eigenvalues must be distinct");
  }

  auto inner = std::make_shared<DirectSumSystem>(subsystems);
  if (inner->dim() != P.rows())
    throw std::invalid_argument("compose_coupled: subsystem dimensions must sum to P's size");

  Vec full_lambda(inner->dim());
  BlockStructure blocks;
  {
    int off = 0;
    for (size_t k = 0; k < subsystems.size(); ++k) {
      BlockStructure::Block b;
      b.eigenvalue = lambdas[k];
      for (int i = 0; i < subsystems[k]->dim(); ++i) {
        full_lambda[off] = lambdas[k];
        b.indices.push_back(off);
        ++off;
      }
      blocks.blocks.push_back(std::move(b));
    }
  }

  std::vector<Mat> g_samples;
  g_samples.reserve(P.size());
  for (int k = 0; k < P.size(); ++k) {
    Mat d(inner->dim(), inner->dim());
    for (int i = 0; i < inner->dim(); ++i) d(i, i) = full_lambda[i];
    g_samples.push_back(P.at(k) * d * transpose(P.at(k)));
  }

  Composition c{std::make_shared<FrameChangedSystem>(inner, P),
                MultiplierCandidate::from_path(MatrixPath(P.t0(), P.step(), std::move(g_samples))),
                std::move(blocks)};
  return c;
}

}  // namespace altkin
