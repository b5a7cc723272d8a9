#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "altkin/expr.hpp"
#include "altkin/matrix.hpp"

namespace altkin {

/// Matrix-valued function of time sampled on a uniform grid. Interpolation
/// between nodes is 4-point Lagrange (cubic); grid derivatives use 4th-order
/// finite-difference stencils, one-sided near the ends.
class MatrixPath {
 public:
  MatrixPath() = default;
  MatrixPath(double t0, double h, std::vector<Mat> samples, bool orthogonal = false)
      : t0_(t0), h_(h), samples_(std::move(samples)), orthogonal_(orthogonal) {
    if (h_ <= 0.0) throw std::invalid_argument("MatrixPath: step must be positive");
    if (samples_.size() < 2) throw std::invalid_argument("MatrixPath: need at least 2 samples");
    for (const Mat& m : samples_)
      if (m.rows() != samples_[0].rows() || m.cols() != samples_[0].cols())
        throw std::invalid_argument("MatrixPath: inconsistent sample shapes");
    if (orthogonal_) {
      for (const Mat& m : samples_)
        if (max_abs(transpose(m) * m - Mat::identity(m.rows())) > 1e-8)
          throw std::invalid_argument("MatrixPath: sample violates orthogonality tag");
    }
  }

  static MatrixPath sample(const std::function<Mat(double)>& f, double t0, double t1, double h,
                           bool orthogonal = false) {
    const int steps = step_count(t0, t1, h);
    const double hh = (t1 - t0) / steps;
    std::vector<Mat> ms;
    ms.reserve(steps + 1);
    for (int i = 0; i <= steps; ++i) ms.push_back(f(t0 + i * hh));
    return MatrixPath(t0, hh, std::move(ms), orthogonal);
  }

  static int step_count(double t0, double t1, double h) {
    if (!(t1 > t0) || h <= 0.0) throw std::invalid_argument("bad time window or step");
    int steps = static_cast<int>(std::ceil((t1 - t0) / h - 1e-9));
    return std::max(steps, 1);
  }

  int size() const { return static_cast<int>(samples_.size()); }
  int rows() const { return samples_[0].rows(); }
  int cols() const { return samples_[0].cols(); }
  double t0() const { return t0_; }
  double t1() const { return t0_ + h_ * (size() - 1); }
  double step() const { return h_; }
  bool orthogonal_tag() const { return orthogonal_; }
  double time_at(int i) const { return t0_ + h_ * i; }
  const Mat& at(int i) const { return samples_[i]; }
  const std::vector<Mat>& samples() const { return samples_; }

  /// Cubic Lagrange interpolation through the 4 nearest nodes.
  Mat value(double t) const {
    const int n = size();
    if (n < 4) {  // linear fallback for very short paths
      const double s = clamped_offset(t);
      const int i = std::min(static_cast<int>(s), n - 2);
      const double u = s - i;
      return samples_[i] * (1.0 - u) + samples_[i + 1] * u;
    }
    const double s = clamped_offset(t);
    int i = static_cast<int>(std::floor(s));
    i = std::clamp(i, 1, n - 3);
    const double u = s - i;  // in [0,1] between nodes i and i+1 (interior)
    const double w0 = -u * (u - 1.0) * (u - 2.0) / 6.0;
    const double w1 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
    const double w2 = -(u + 1.0) * u * (u - 2.0) / 2.0;
    const double w3 = (u + 1.0) * u * (u - 1.0) / 6.0;
    return samples_[i - 1] * w0 + samples_[i] * w1 + samples_[i + 1] * w2 + samples_[i + 2] * w3;
  }

  /// First time-derivative at grid node i (4th order).
  Mat deriv1_at(int i) const {
    const int n = size();
    if (n < 5) throw std::runtime_error("MatrixPath: need >= 5 samples for derivatives");
    auto comb5 = [&](int base, const double (&c)[5]) {
      Mat r = samples_[base] * c[0];
      for (int k = 1; k < 5; ++k) r += samples_[base + k] * c[k];
      return r * (1.0 / (12.0 * h_));
    };
    static const double fwd[5] = {-25, 48, -36, 16, -3};
    static const double off1[5] = {-3, -10, 18, -6, 1};
    static const double mid[5] = {1, -8, 0, 8, -1};
    static const double offm1[5] = {-1, 6, -18, 10, 3};
    static const double bwd[5] = {3, -16, 36, -48, 25};
    if (i == 0) return comb5(0, fwd);
    if (i == 1) return comb5(0, off1);
    if (i == n - 2) return comb5(n - 5, offm1);
    if (i == n - 1) return comb5(n - 5, bwd);
    return comb5(i - 2, mid);
  }

  /// Second time-derivative at grid node i (4th order).
  Mat deriv2_at(int i) const {
    const int n = size();
    if (n < 7) throw std::runtime_error("MatrixPath: need >= 7 samples for second derivatives");
    const double h2 = h_ * h_;
    auto comb = [&](int base, const std::vector<double>& c) {
      Mat r = samples_[base] * c[0];
      for (size_t k = 1; k < c.size(); ++k) r += samples_[base + static_cast<int>(k)] * c[k];
      return r * (1.0 / h2);
    };
    static const std::vector<double> fwd = {15.0 / 4, -77.0 / 6, 107.0 / 6, -13.0, 61.0 / 12,
                                            -5.0 / 6};
    static const std::vector<double> off1 = {5.0 / 6, -5.0 / 4, -1.0 / 3, 7.0 / 6, -1.0 / 2,
                                             1.0 / 12};
    static const std::vector<double> mid = {-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12,
                                            -1.0 / 12};
    if (i == 0) return comb(0, fwd);
    if (i == 1) return comb(0, off1);
    if (i == n - 1) return comb(n - 6, std::vector<double>(fwd.rbegin(), fwd.rend()));
    if (i == n - 2) return comb(n - 6, std::vector<double>(off1.rbegin(), off1.rend()));
    return comb(i - 2, mid);
  }

  MatrixPath derivative1() const {
    std::vector<Mat> d(size());
    for (int i = 0; i < size(); ++i) d[i] = deriv1_at(i);
    return MatrixPath(t0_, h_, std::move(d));
  }
  MatrixPath derivative2() const {
    std::vector<Mat> d(size());
    for (int i = 0; i < size(); ++i) d[i] = deriv2_at(i);
    return MatrixPath(t0_, h_, std::move(d));
  }

  /// CSV: header row, then one row per node: t, entries row-major.
  void write_csv(std::ostream& os) const {
    os << "t";
    for (int i = 0; i < rows(); ++i)
      for (int j = 0; j < cols(); ++j) os << ",m" << (i + 1) << (j + 1);
    os << "\n";
    char buf[40];
    for (int k = 0; k < size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", time_at(k));
      os << buf;
      for (int i = 0; i < rows(); ++i)
        for (int j = 0; j < cols(); ++j) {
          std::snprintf(buf, sizeof buf, "%.17g", samples_[k](i, j));
          os << "," << buf;
        }
      os << "\n";
    }
  }

  void write_csv_file(const std::string& filename) const {
    std::ofstream out(filename);
    if (!out) throw std::runtime_error("cannot open " + filename + " for writing");
    write_csv(out);
  }

  static MatrixPath read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("path CSV: empty input");
    int ncols = 0;
    for (char c : line)
      if (c == ',') ++ncols;
    const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(ncols))));
    if (n * n != ncols) throw std::runtime_error("path CSV: entry count is not a square");
    std::vector<double> times;
    std::vector<Mat> ms;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::istringstream row(line);
      std::string cell;
      if (!std::getline(row, cell, ',')) break;
      times.push_back(std::stod(cell));
      Mat m(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          if (!std::getline(row, cell, ',')) throw std::runtime_error("path CSV: short row");
          m(i, j) = std::stod(cell);
        }
      ms.push_back(std::move(m));
    }
    if (times.size() < 2) throw std::runtime_error("path CSV: need at least 2 rows");
    const double h = times[1] - times[0];
    for (size_t i = 1; i < times.size(); ++i)
      if (std::abs(times[i] - times[0] - h * i) > 1e-9 * std::max(1.0, std::abs(times[i])))
        throw std::runtime_error("path CSV: grid is not uniform");
    return MatrixPath(times[0], h, std::move(ms));
  }

  static MatrixPath read_csv_file(const std::string& filename) {
    std::ifstream in(filename);
    if (!in) throw std::runtime_error("cannot open " + filename);
    return read_csv(in);
  }

 private:
  double clamped_offset(double t) const {
    double s = (t - t0_) / h_;
    if (s < 0.0) s = 0.0;
    if (s > size() - 1.0) s = size() - 1.0;
    return s;
  }

  double t0_ = 0.0, h_ = 0.0;
  std::vector<Mat> samples_;
  bool orthogonal_ = false;
};

/// Matrix-valued function of time with first and second derivatives. Three
/// provenances: expression entries (exact AD derivatives), a sampled path
/// (finite-difference derivatives), or raw callables.
class TimeMatrix {
 public:
  TimeMatrix() = default;
  TimeMatrix(std::function<Mat(double)> f, std::function<Mat(double)> d1,
             std::function<Mat(double)> d2, bool exact)
      : f_(std::move(f)), d1_(std::move(d1)), d2_(std::move(d2)), exact_(exact) {}

  static TimeMatrix from_exprs(std::vector<std::vector<Expression>> entries) {
    auto cell = std::make_shared<std::vector<std::vector<Expression>>>(std::move(entries));
    const int r = static_cast<int>(cell->size());
    const int c = r > 0 ? static_cast<int>((*cell)[0].size()) : 0;
    for (const auto& row : *cell)
      if (static_cast<int>(row.size()) != c)
        throw std::invalid_argument("TimeMatrix: ragged expression matrix");
    auto eval = [cell, r, c](double t) {
      Mat m(r, c);
      EvalPoint p{t, {}, {}};
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = (*cell)[i][j].eval(p);
      return m;
    };
    auto eval_d1 = [cell, r, c](double t) {
      Mat m(r, c);
      EvalPoint p{t, {}, {}};
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = (*cell)[i][j].deriv(p, Var::time());
      return m;
    };
    auto eval_d2 = [cell, r, c](double t) {
      Mat m(r, c);
      EvalPoint p{t, {}, {}};
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = (*cell)[i][j].deriv2(p, Var::time(), Var::time());
      return m;
    };
    return TimeMatrix(eval, eval_d1, eval_d2, true);
  }

  static TimeMatrix from_path(const MatrixPath& path) {
    auto p = std::make_shared<MatrixPath>(path);
    auto p1 = std::make_shared<MatrixPath>(path.derivative1());
    auto p2 = std::make_shared<MatrixPath>(path.derivative2());
    return TimeMatrix([p](double t) { return p->value(t); },
                      [p1](double t) { return p1->value(t); },
                      [p2](double t) { return p2->value(t); }, false);
  }

  static TimeMatrix constant(const Mat& m) {
    const Mat z = Mat::zero(m.rows(), m.cols());
    return TimeMatrix([m](double) { return m; }, [z](double) { return z; },
                      [z](double) { return z; }, true);
  }

  bool valid() const { return static_cast<bool>(f_); }
  bool exact_derivatives() const { return exact_; }

  Mat operator()(double t) const { return f_(t); }
  Mat d1(double t) const { return d1_(t); }
  Mat d2(double t) const { return d2_(t); }

 private:
  std::function<Mat(double)> f_, d1_, d2_;
  bool exact_ = false;
};

}  // namespace altkin
