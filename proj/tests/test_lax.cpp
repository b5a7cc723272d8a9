#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "altkin/lax.hpp"
#include "testutil.hpp"

using namespace altkin;
using Catch::Approx;

namespace {

Mat planar_rotation_generator(double sigma) {
  Mat j(2, 2);
  j(0, 1) = sigma;
  j(1, 0) = -sigma;
  return j;
}

// Closed-form flow for the constant planar generator:
// g(t) = 1/2 [[C+B cos a, -B sin a], [-B sin a, C-B cos a]], a = -2t + A.
Mat planar_closed_form(double t, double A, double B, double C) {
  const double al = -2.0 * t + A;
  Mat g(2, 2);
  g(0, 0) = 0.5 * (C + B * std::cos(al));
  g(1, 1) = 0.5 * (C - B * std::cos(al));
  g(0, 1) = g(1, 0) = -0.5 * B * std::sin(al);
  return g;
}

}  // namespace

TEST_CASE("zero generator leaves the matrix alone") {
  Mat g0(3, 3);
  g0(0, 0) = 2.0;
  g0(1, 2) = g0(2, 1) = 0.4;
  const MatrixPath p = solve_lax([](double) { return Mat(3, 3); }, g0, 0.0, 1.0, 1e-2);
  for (int k = 0; k < p.size(); ++k) CHECK(max_abs(p.at(k) - g0) == 0.0);
}

TEST_CASE("planar flow matches the closed form") {
  const double A = 0.9, B = 1.4, C = 3.2;
  const Mat g0 = planar_closed_form(0.0, A, B, C);
  const MatrixPath p =
      solve_lax([](double) { return planar_rotation_generator(1.0); }, g0, 0.0, 1.0, 1e-3);
  double err = 0.0;
  for (int k = 0; k < p.size(); ++k)
    err = std::max(err, max_abs(p.at(k) - planar_closed_form(p.time_at(k), A, B, C)));
  CHECK(err <= 1e-8);
  const EigenDriftInfo d = eigen_drift_info(p);
  CHECK(d.drift <= 1e-9);
  CHECK(d.trace_drift <= 1e-9);
}

TEST_CASE("random flows keep spectrum, symmetry and trace") {
  std::mt19937 rng(20240812);
  for (int trial = 0; trial < 4; ++trial) {
    const int n = 4;
    const testutil::SkewFun gamma = testutil::random_skew_fun(rng, n);
    const Mat g0 = testutil::random_symmetric(rng, n);
    const MatrixPath p = solve_lax([&](double t) { return gamma(t); }, g0, 0.0, 1.0, 1e-3);
    CHECK(eigen_drift(p) <= 1e-7);
    CHECK(symmetry_drift(p) <= 1e-9);
    CHECK(eigen_drift_info(p).trace_drift <= 1e-9);
  }
}

TEST_CASE("halving the step cuts the drift by about 2^4") {
  std::mt19937 rng(5150);
  const testutil::SkewFun gamma = testutil::random_skew_fun(rng, 3, 1.2);
  const Mat g0 = testutil::random_symmetric(rng, 3, 2.0);
  const double coarse = eigen_drift(solve_lax([&](double t) { return gamma(t); }, g0, 0.0, 1.0, 0.02));
  const double fine = eigen_drift(solve_lax([&](double t) { return gamma(t); }, g0, 0.0, 1.0, 0.01));
  CHECK(coarse / fine > 8.0);
}

TEST_CASE("eigen drift measurements") {
  {
    std::vector<Mat> ms(11, Mat::identity(2) * 1.5);
    CHECK(eigen_drift(MatrixPath(0.0, 0.1, ms)) == 0.0);
  }
  {
    // g(t) = diag(1, 1+t) is not a Lax path: drift equals the window length.
    std::vector<Mat> ms;
    for (int i = 0; i <= 10; ++i) {
      Mat m(2, 2);
      m(0, 0) = 1.0;
      m(1, 1) = 1.0 + 0.1 * i;
      ms.push_back(m);
    }
    CHECK(eigen_drift(MatrixPath(0.0, 0.1, ms)) == Approx(1.0).margin(1e-14));
  }
  {
    // Sorted eigenvalues collide somewhere on the path: flagged.
    std::vector<Mat> ms;
    for (int i = 0; i <= 10; ++i) {
      Mat m(2, 2);
      m(0, 0) = 0.1 * i;
      m(1, 1) = 1.0 - 0.1 * i;
      ms.push_back(m);
    }
    CHECK(eigen_drift_info(MatrixPath(0.0, 0.1, ms)).crossing_flag);
  }
}

TEST_CASE("input validation") {
  const Mat g0 = Mat::identity(2);
  CHECK_THROWS_AS(solve_lax([](double) { return Mat::identity(2); }, g0, 0.0, 1.0, 1e-2),
                  std::invalid_argument);  // not skew
  CHECK_THROWS_AS(solve_lax([](double) { return Mat(2, 2); }, g0, 0.0, 1.0, 0.0),
                  std::invalid_argument);  // bad step
  Mat asym(2, 2);
  asym(0, 1) = 1.0;
  CHECK_THROWS_AS(solve_lax([](double) { return Mat(2, 2); }, asym, 0.0, 1.0, 1e-2),
                  std::invalid_argument);  // g0 not symmetric
}
