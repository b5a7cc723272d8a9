#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "altkin/decouple.hpp"
#include "altkin/lax.hpp"
#include "testutil.hpp"

using namespace altkin;
using Catch::Approx;

namespace {

MatrixPath rotation_path(double t0, double t1, double h, double omega = 1.0) {
  return MatrixPath::sample(
      [omega](double t) {
        Mat r(2, 2);
        r(0, 0) = std::cos(omega * t);
        r(0, 1) = -std::sin(omega * t);
        r(1, 0) = std::sin(omega * t);
        r(1, 1) = std::cos(omega * t);
        return r;
      },
      t0, t1, h, /*orthogonal=*/true);
}

std::shared_ptr<EmSystem> oscillator_1d(double k) {
  return std::make_shared<EmSystem>(
      1, Expression::constant(0.5 * k) * pow(Expression::position(1, 1), 2.0),
      std::vector<Expression>{Expression::constant(0.0)});
}

}  // namespace

TEST_CASE("eigenvalue grouping") {
  const BlockStructure b = group_eigenvalues({3.0, 1.0, 3.0 + 1e-9});
  REQUIRE(b.blocks.size() == 2);
  CHECK(b.blocks[0].eigenvalue == 1.0);
  CHECK(b.blocks[0].indices == std::vector<int>{1});
  CHECK(b.blocks[1].indices == std::vector<int>{0, 2});
  CHECK(b.block_of(0) == b.block_of(2));
  CHECK(b.block_of(1) != b.block_of(0));
}

TEST_CASE("diagonalizing a constant diagonal path is the identity") {
  Mat d(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = 1.0;
  const MatrixPath g(0.0, 0.1, std::vector<Mat>(11, d));
  const DiagonalizeResult r = diagonalize_path(g);
  CHECK(r.eigenvalues[0] == 3.0);
  CHECK(r.eigenvalues[1] == 1.0);
  for (int k = 0; k < r.P.size(); ++k) CHECK(max_abs(r.P.at(k) - Mat::identity(2)) == 0.0);
}

TEST_CASE("diagonalizer follows a smooth rotation") {
  std::mt19937 rng(6);
  Mat g0(3, 3);
  g0(0, 0) = 2.0;
  g0(1, 1) = -1.0;
  g0(2, 2) = 0.5;
  const testutil::SkewFun gamma = testutil::random_skew_fun(rng, 3);
  const MatrixPath g = solve_lax([&](double t) { return gamma(t); }, g0, 0.0, 1.0, 1e-3);
  const DiagonalizeResult r = diagonalize_path(g);
  CHECK(r.P.orthogonal_tag());
  for (int k = 0; k < g.size(); k += 50) {
    const Mat diag = transpose(r.P.at(k)) * g.at(k) * r.P.at(k);
    double off = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (i != j) off = std::max(off, std::abs(diag(i, j)));
    CHECK(off <= 1e-8);
    // Continuity: consecutive frames stay close.
    if (k > 0) CHECK(max_abs(r.P.at(k) - r.P.at(k - 1)) < 0.05);
  }
  // Eigenvalues are reported in the column order of P and stay put.
  Vec sorted = r.eigenvalues;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted[0] == Approx(-1.0).margin(1e-7));
  CHECK(sorted[1] == Approx(0.5).margin(1e-7));
  CHECK(sorted[2] == Approx(2.0).margin(1e-7));
}

TEST_CASE("drifting paths are rejected") {
  std::vector<Mat> ms;
  for (int i = 0; i <= 10; ++i) {
    Mat m(2, 2);
    m(0, 0) = 1.0;
    m(1, 1) = 2.0 + 0.01 * i;
    ms.push_back(m);
  }
  CHECK_THROWS_AS(diagonalize_path(MatrixPath(0.0, 0.1, ms)), std::runtime_error);
}

TEST_CASE("transformed connection") {
  {
    // Constant identity frame: nothing changes.
    const MatrixPath p(0.0, 0.1, std::vector<Mat>(11, Mat::identity(2)), true);
    const MatrixPath gamma = MatrixPath::sample(
        [](double t) {
          Mat m(2, 2);
          m(0, 1) = std::sin(t);
          m(1, 0) = -std::sin(t);
          return m;
        },
        0.0, 1.0, 0.1);
    const MatrixPath tr = transformed_connection(gamma, p);
    for (int k = 0; k < tr.size(); ++k)
      CHECK(max_abs(tr.at(k) - gamma.value(tr.time_at(k))) <= 1e-12);
  }
  {
    // Zero connection seen from a rotating frame: P^T Pdot, still skew.
    const MatrixPath p = rotation_path(0.0, 1.0, 1e-3);
    const MatrixPath zero = MatrixPath(0.0, 0.5, std::vector<Mat>(3, Mat(2, 2)));
    const MatrixPath tr = transformed_connection(zero, p);
    Mat gen(2, 2);
    gen(0, 1) = -1.0;
    gen(1, 0) = 1.0;
    for (int k = 0; k < tr.size(); ++k) {
      CHECK(max_abs(tr.at(k) - gen) <= 1e-6);
      CHECK(max_abs(tr.at(k) + transpose(tr.at(k))) <= 1e-6);
    }
  }
}

TEST_CASE("an already-decoupled system shows no cross coupling under the identity") {
  auto sys = std::make_shared<DirectSumSystem>(
      std::vector<SystemPtr>{oscillator_1d(1.0), oscillator_1d(2.0)});
  const MatrixPath p(0.0, 0.25, std::vector<Mat>(9, Mat::identity(2)), true);
  BlockStructure blocks;
  blocks.blocks = {{1.0, {0}}, {2.0, {1}}};
  const auto pts = sample_cloud(2, 0.0, 2.0, {});
  const DecouplingReport rep = check_decoupling(*sys, p, blocks, pts);
  CHECK(rep.residual() <= 1e-12);
}

TEST_CASE("composing oscillators through a rotating frame") {
  const MatrixPath p = rotation_path(0.0, 1.0, 1e-3);
  const Composition comp = compose_coupled({oscillator_1d(1.0), oscillator_1d(2.5)}, {1.0, 2.0}, p);

  // The composed multiplier passes the whole condition set.
  VerifyOptions opt;
  opt.cloud.count = 12;
  const ConditionReport rep = verify_all(*comp.system, comp.multiplier, opt);
  for (const auto& c : rep.conditions) {
    INFO(c.name << " residual " << c.residual);
    CHECK(c.pass);
    CHECK(c.residual <= 1e-6);
  }

  // The composed system still carries the unit multiplier.
  const ConditionReport unit = verify_all(*comp.system, MultiplierCandidate::constant(Mat::identity(2)), opt);
  CHECK(unit.all_pass());

  // Round trip: diagonalize the multiplier path and measure decoupling.
  const MatrixPath gpath = MatrixPath::sample(
      [&](double t) { return comp.multiplier.value(t); }, 0.0, 1.0, 1e-3);
  const DiagonalizeResult diag = diagonalize_path(gpath);
  Vec lam = diag.eigenvalues;
  std::sort(lam.begin(), lam.end());
  CHECK(lam[0] == Approx(1.0).margin(1e-7));
  CHECK(lam[1] == Approx(2.0).margin(1e-7));
  const auto pts = sample_cloud(2, 0.05, 0.95, {});
  const DecouplingReport drep =
      check_decoupling(*comp.system, diag.P, group_eigenvalues(diag.eigenvalues), pts);
  CHECK(drep.residual() <= 1e-5);
}

TEST_CASE("composition validates its inputs") {
  const MatrixPath p = rotation_path(0.0, 1.0, 0.1);
  CHECK_THROWS_AS(compose_coupled({oscillator_1d(1.0), oscillator_1d(2.0)}, {1.0, 1.0}, p),
                  std::invalid_argument);
  CHECK_THROWS_AS(compose_coupled({oscillator_1d(1.0), oscillator_1d(2.0)}, {1.0, 0.0}, p),
                  std::invalid_argument);
  CHECK_THROWS_AS(compose_coupled({oscillator_1d(1.0)}, {1.0}, p), std::invalid_argument);
}

TEST_CASE("identity composition is the subsystem itself") {
  const MatrixPath p(0.0, 0.25, std::vector<Mat>(9, Mat::identity(1)), true);
  const Composition comp = compose_coupled({oscillator_1d(1.3)}, {1.0}, p);
  std::mt19937 rng(4);
  for (int k = 0; k < 5; ++k) {
    const EvalPoint q = testutil::random_point(rng, 1);
    EvalPoint q2 = q;
    q2.t = 0.3 + 0.4 * (k / 5.0);  // stay inside the frame window
    const Vec f = comp.system->force(q2);
    CHECK(f[0] == Approx(-1.3 * q2.x[0]).margin(1e-9));
  }
}

TEST_CASE("singular transforms are reported") {
  auto sys = std::make_shared<DirectSumSystem>(
      std::vector<SystemPtr>{oscillator_1d(1.0), oscillator_1d(2.0)});
  std::vector<Mat> ms(9, Mat(2, 2));  // all-zero transform
  BlockStructure blocks;
  blocks.blocks = {{1.0, {0}}, {2.0, {1}}};
  const auto pts = sample_cloud(2, 0.0, 2.0, {4, 0, 1.0});
  CHECK_THROWS_AS(
      check_decoupling(*sys, MatrixPath(0.0, 0.25, ms), blocks, pts, /*orthogonal=*/false),
      std::runtime_error);
}
