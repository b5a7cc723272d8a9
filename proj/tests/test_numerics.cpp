#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "altkin/matrix.hpp"
#include "altkin/path.hpp"
#include "altkin/quadrature.hpp"
#include "altkin/sampling.hpp"
#include "testutil.hpp"

using namespace altkin;
using Catch::Approx;

TEST_CASE("LU determinant and inverse") {
  Mat a(2, 2);
  a(0, 0) = 2;
  a(0, 1) = 1;
  a(1, 0) = 1;
  a(1, 1) = 3;
  CHECK(det(a) == Approx(5.0).margin(1e-14));
  const Mat inv = inverse(a);
  CHECK(max_abs(inv * a - Mat::identity(2)) < 1e-14);

  std::mt19937 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    Mat m = testutil::random_symmetric(rng, 4);
    for (int i = 0; i < 4; ++i) m(i, i) += 3.0;  // keep it comfortably regular
    CHECK(max_abs(inverse(m) * m - Mat::identity(4)) < 1e-12);
  }

  Mat sing(2, 2);
  sing(0, 0) = 1;
  sing(0, 1) = 2;
  sing(1, 0) = 2;
  sing(1, 1) = 4;
  CHECK(det(sing) == Approx(0.0).margin(1e-14));
  CHECK_THROWS(inverse(sing));
}

TEST_CASE("Jacobi eigensolver on symmetric matrices") {
  // An already-diagonal matrix comes back untouched.
  Mat d(3, 3);
  d(0, 0) = 3;
  d(1, 1) = 1;
  d(2, 2) = 2;
  const SymEigen ed = jacobi_eigen(d);
  CHECK(ed.values[0] == 3.0);
  CHECK(ed.values[1] == 1.0);
  CHECK(ed.values[2] == 2.0);
  CHECK(max_abs(ed.vectors - Mat::identity(3)) == 0.0);

  Mat ones(2, 2);
  ones(0, 0) = ones(0, 1) = ones(1, 0) = ones(1, 1) = 1.0;
  const Vec w = sorted_eigenvalues(ones);
  CHECK(w[0] == Approx(0.0).margin(1e-14));
  CHECK(w[1] == Approx(2.0).margin(1e-14));

  std::mt19937 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat m = testutil::random_symmetric(rng, 5);
    const SymEigen e = jacobi_eigen(m);
    CHECK(max_abs(transpose(e.vectors) * e.vectors - Mat::identity(5)) < 1e-12);
    for (int j = 0; j < 5; ++j) {
      Vec col(5);
      for (int i = 0; i < 5; ++i) col[i] = e.vectors(i, j);
      const Vec mv = m * col;
      for (int i = 0; i < 5; ++i) CHECK(mv[i] == Approx(e.values[j] * col[i]).margin(1e-12));
    }
  }
}

TEST_CASE("Gauss-Legendre 16 is exact through degree 31") {
  CHECK(integrate_gl16([](double s) { return s; }, 0.0, 1.0) == Approx(0.5).margin(1e-15));
  CHECK(integrate_gl16([](double s) { return std::pow(s, 31); }, 0.0, 1.0) ==
        Approx(1.0 / 32.0).margin(1e-15));
  CHECK(integrate_gl16([](double s) { return std::sin(s); }, 0.0, 1.0) ==
        Approx(1.0 - std::cos(1.0)).margin(1e-14));
}

TEST_CASE("adaptive Simpson hits the requested tolerance") {
  CHECK(integrate_adaptive([](double s) { return std::exp(s); }, 0.0, 1.0, 1e-10) ==
        Approx(std::exp(1.0) - 1.0).margin(1e-9));
  CHECK(integrate_adaptive([](double s) { return std::cos(7.0 * s); }, -1.0, 2.5, 1e-10) ==
        Approx((std::sin(17.5) + std::sin(7.0)) / 7.0).margin(1e-9));
}

TEST_CASE("sample cloud is deterministic and boxed") {
  const auto a = sample_cloud(3, 0.0, 1.0, {20, 7, 1.0});
  const auto b = sample_cloud(3, 0.0, 1.0, {20, 7, 1.0});
  REQUIRE(a.size() == 20);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].t == b[i].t);
    CHECK(a[i].t >= 0.0);
    CHECK(a[i].t <= 1.0);
    for (int j = 0; j < 3; ++j) {
      CHECK(a[i].x[j] == b[i].x[j]);
      CHECK(std::abs(a[i].x[j]) <= 1.0);
      CHECK(std::abs(a[i].xdot[j]) <= 1.0);
    }
  }
  const auto c = sample_cloud(3, 0.0, 1.0, {20, 8, 1.0});
  CHECK(a[0].x[0] != c[0].x[0]);
}

namespace {

MatrixPath sine_path(double h, int samples) {
  std::vector<Mat> ms;
  for (int i = 0; i < samples; ++i) {
    const double t = i * h;
    Mat m(2, 2);
    m(0, 0) = std::sin(1.3 * t);
    m(0, 1) = std::cos(0.7 * t);
    m(1, 0) = std::sin(0.7 * t + 0.3);
    m(1, 1) = t * t * t;
    ms.push_back(m);
  }
  return MatrixPath(0.0, h, std::move(ms));
}

Mat sine_d1(double t) {
  Mat m(2, 2);
  m(0, 0) = 1.3 * std::cos(1.3 * t);
  m(0, 1) = -0.7 * std::sin(0.7 * t);
  m(1, 0) = 0.7 * std::cos(0.7 * t + 0.3);
  m(1, 1) = 3.0 * t * t;
  return m;
}

Mat sine_d2(double t) {
  Mat m(2, 2);
  m(0, 0) = -1.3 * 1.3 * std::sin(1.3 * t);
  m(0, 1) = -0.7 * 0.7 * std::cos(0.7 * t);
  m(1, 0) = -0.7 * 0.7 * std::sin(0.7 * t + 0.3);
  m(1, 1) = 6.0 * t;
  return m;
}

}  // namespace

TEST_CASE("path derivatives are 4th order at every node") {
  auto worst = [](const MatrixPath& p, auto truth, bool second) {
    double err = 0.0;
    for (int i = 0; i < p.size(); ++i) {
      const Mat got = second ? p.deriv2_at(i) : p.deriv1_at(i);
      err = std::max(err, max_abs(got - truth(p.time_at(i))));
    }
    return err;
  };
  const MatrixPath coarse = sine_path(0.02, 51);
  const MatrixPath fine = sine_path(0.01, 101);

  const double e1c = worst(coarse, sine_d1, false);
  const double e1f = worst(fine, sine_d1, false);
  CHECK(e1c < 5e-7);
  CHECK(e1c / e1f > 8.0);  // 4th order: halving h should gain ~16x

  const double e2c = worst(coarse, sine_d2, true);
  const double e2f = worst(fine, sine_d2, true);
  CHECK(e2c < 1e-5);
  CHECK(e2c / e2f > 8.0);
}

TEST_CASE("cubic interpolation converges at 4th order") {
  const MatrixPath coarse = sine_path(0.02, 51);
  const MatrixPath fine = sine_path(0.01, 101);
  auto worst = [](const MatrixPath& p) {
    double err = 0.0;
    for (double t = 0.0; t <= 0.5; t += 0.0037) {
      Mat truth(2, 2);
      truth(0, 0) = std::sin(1.3 * t);
      truth(0, 1) = std::cos(0.7 * t);
      truth(1, 0) = std::sin(0.7 * t + 0.3);
      truth(1, 1) = t * t * t;
      err = std::max(err, max_abs(p.value(t) - truth));
    }
    return err;
  };
  const double ec = worst(coarse), ef = worst(fine);
  CHECK(ec < 1e-8);
  CHECK(ec / ef > 8.0);
}

TEST_CASE("path CSV round trip is exact") {
  const MatrixPath p = sine_path(0.01, 23);
  std::stringstream ss;
  p.write_csv(ss);
  const std::string header = ss.str().substr(0, ss.str().find('\n'));
  CHECK(header == "t,m11,m12,m21,m22");
  const MatrixPath q = MatrixPath::read_csv(ss);
  REQUIRE(q.size() == p.size());
  for (int i = 0; i < p.size(); ++i) CHECK(max_abs(p.at(i) - q.at(i)) == 0.0);
}

TEST_CASE("path validation") {
  std::vector<Mat> ms{Mat::identity(2), Mat::identity(2) * 2.0};
  CHECK_THROWS(MatrixPath(0.0, -0.1, ms));
  CHECK_THROWS(MatrixPath(0.0, 0.1, {Mat::identity(2)}));
  CHECK_THROWS(MatrixPath(0.0, 0.1, ms, /*orthogonal=*/true));  // 2I is not orthogonal
  CHECK_THROWS(MatrixPath(0.0, 0.1, {Mat::identity(2), Mat::identity(3)}));
  const MatrixPath ok(0.0, 0.1, {Mat::identity(2), Mat::identity(2)}, true);
  CHECK(ok.orthogonal_tag());
  CHECK_THROWS(ok.deriv1_at(0));  // needs at least 5 samples
}

TEST_CASE("TimeMatrix from expressions differentiates exactly") {
  TimeMatrix m = TimeMatrix::from_exprs(
      {{Expression::parse("sin(t)", 1), Expression::parse("t^2", 1)},
       {Expression::parse("0", 1), Expression::parse("exp(0.5*t)", 1)}});
  CHECK(m.exact_derivatives());
  const double t = 0.8;
  CHECK(m(t)(0, 0) == Approx(std::sin(t)).margin(1e-15));
  CHECK(m.d1(t)(0, 0) == Approx(std::cos(t)).margin(1e-15));
  CHECK(m.d1(t)(0, 1) == Approx(2.0 * t).margin(1e-15));
  CHECK(m.d2(t)(1, 1) == Approx(0.25 * std::exp(0.5 * t)).margin(1e-15));

  const MatrixPath sampled = MatrixPath::sample([&](double tt) { return m(tt); }, 0.0, 1.0, 0.01);
  TimeMatrix from_path = TimeMatrix::from_path(sampled);
  CHECK_FALSE(from_path.exact_derivatives());
  CHECK(max_abs(from_path.d1(0.5) - m.d1(0.5)) < 1e-8);
}
