#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <thread>

#include "altkin/expr.hpp"
#include "testutil.hpp"

using namespace altkin;
using Catch::Approx;

TEST_CASE("parse produces the expected tree") {
  const Expression e = Expression::parse("sin(t)*x2", 2);
  const Expression want = sin(Expression::time(2)) * Expression::position(2, 2);
  CHECK(e.structurally_equal(want));

  const Expression e2 = Expression::parse("x1^2 + xdot1", 1);
  const Expression want2 =
      pow(Expression::position(1, 1), 2.0) + Expression::velocity(1, 1);
  CHECK(e2.structurally_equal(want2));
}

TEST_CASE("parse errors carry positions and reasons") {
  CHECK_THROWS_AS(Expression::parse("x3", 2), ParseError);
  CHECK_THROWS_WITH(Expression::parse("x3", 2), Catch::Matchers::ContainsSubstring("out of range"));
  CHECK_THROWS_AS(Expression::parse("foo(t)", 2), ParseError);
  CHECK_THROWS_AS(Expression::parse("sin(t", 2), ParseError);
  CHECK_THROWS_AS(Expression::parse("1 + ", 2), ParseError);
  CHECK_THROWS_AS(Expression::parse("2 ** 3", 2), ParseError);
  CHECK_THROWS_AS(Expression::parse("x1 x2", 2), ParseError);
  CHECK_THROWS_AS(Expression::parse("x0", 2), ParseError);
  CHECK_THROWS_AS(Expression::parse("t", 0), ParseError);
  try {
    Expression::parse("x1 + @", 2);
    FAIL("expected ParseError");
  } catch (const ParseError& err) {
    CHECK(err.position == 5);
  }
}

TEST_CASE("eval matches hand values") {
  CHECK(Expression::parse("x1^2", 1).eval({0.0, {3.0}, {0.0}}) == 9.0);
  CHECK(Expression::parse("sin(t)", 1).eval({0.0, {0.0}, {0.0}}) == 0.0);
  CHECK(Expression::parse("2*x1*x2 - t", 2).eval({1.0, {2.0, 3.0}, {0.0, 0.0}}) == 11.0);
  CHECK(Expression::parse("-2^2", 1).eval({0.0, {0.0}, {0.0}}) == 4.0);  // '-' folds into the literal
  CHECK(Expression::parse("neg(2)^2", 1).eval({0.0, {0.0}, {0.0}}) == 4.0);
}

TEST_CASE("domain errors are reported, not NaN") {
  const EvalPoint at_minus1{0.0, {-1.0}, {0.0}};
  CHECK_THROWS_AS(Expression::parse("log(x1)", 1).eval(at_minus1), EvalError);
  CHECK_THROWS_AS(Expression::parse("sqrt(x1)", 1).eval(at_minus1), EvalError);
  CHECK_THROWS_AS(Expression::parse("x1^0.5", 1).eval(at_minus1), EvalError);
  CHECK_THROWS_AS(Expression::parse("1/x1", 1).eval({0.0, {0.0}, {0.0}}), EvalError);
  CHECK_THROWS_AS(Expression::parse("x1^-1", 1).eval({0.0, {0.0}, {0.0}}), EvalError);
  // Integer exponents of negative bases are fine.
  CHECK(Expression::parse("x1^3", 1).eval(at_minus1) == -1.0);
  CHECK(Expression::parse("x1^-2", 1).eval({0.0, {2.0}, {0.0}}) == 0.25);
}

TEST_CASE("derivatives at hand-checked points") {
  const EvalPoint p{0.0, {3.0}, {0.0}};
  CHECK(Expression::parse("x1^2", 1).deriv(p, Var::x(0)) == 6.0);

  const Expression xy = Expression::parse("x1*x2", 2);
  const EvalPoint q{0.7, {0.3, -0.8}, {0.0, 0.0}};
  CHECK(xy.deriv2(q, Var::x(0), Var::x(1)) == 1.0);
  CHECK(Expression::parse("x1^2", 1).deriv2(p, Var::x(0), Var::x(0)) == 2.0);
}

namespace {

std::vector<Var> all_vars(int dim) {
  std::vector<Var> vs{Var::time()};
  for (int i = 0; i < dim; ++i) {
    vs.push_back(Var::x(i));
    vs.push_back(Var::xdot(i));
  }
  return vs;
}

}  // namespace

TEST_CASE("AD agrees with central finite differences") {
  std::mt19937 rng(20240811);
  const int dim = 2;
  const auto vars = all_vars(dim);
  long compared = 0;
  for (int trial = 0; trial < 40; ++trial) {
    auto [e, p] = testutil::random_bounded_case(rng, dim, 3);
    INFO("expression: " << e.str());
    // Assert wherever the oracle's own step-halving agrees with itself.
    for (Var w : vars) {
      if (const auto fd = testutil::fd1_checked(e, p, w)) {
        const double ad = e.deriv(p, w);
        CHECK(std::abs(ad - *fd) <= 1e-6 * std::max({1.0, std::abs(ad), std::abs(*fd)}));
        ++compared;
      }
    }
    for (size_t i = 0; i < vars.size(); ++i)
      for (size_t j = i; j < vars.size(); ++j) {
        if (const auto fd = testutil::fd2_checked(e, p, vars[i], vars[j])) {
          const double ad = e.deriv2(p, vars[i], vars[j]);
          CHECK(std::abs(ad - *fd) <= 1e-6 * std::max({1.0, std::abs(ad), std::abs(*fd)}));
          ++compared;
        }
      }
  }
  CHECK(compared >= 400);  // the gate must not hollow the suite out
}

TEST_CASE("derivatives are linear in the expression") {
  std::mt19937 rng(7);
  const int dim = 2;
  for (int trial = 0; trial < 20; ++trial) {
    const Expression e1 = testutil::random_expression(rng, dim, 3);
    const Expression e2 = testutil::random_expression(rng, dim, 3);
    const double al = 1.25, be = -0.75;
    const Expression combo =
        Expression::constant(al) * e1 + Expression::constant(be) * e2;
    const EvalPoint p = testutil::random_point(rng, dim);
    for (Var w : all_vars(dim)) {
      const double lhs = combo.deriv(p, w);
      const double rhs = al * e1.deriv(p, w) + be * e2.deriv(p, w);
      CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
    }
  }
}

TEST_CASE("mixed partials are symmetric") {
  std::mt19937 rng(99);
  const int dim = 2;
  const auto vars = all_vars(dim);
  for (int trial = 0; trial < 25; ++trial) {
    auto [e, p] = testutil::random_bounded_case(rng, dim, 3);
    for (size_t i = 0; i < vars.size(); ++i)
      for (size_t j = i + 1; j < vars.size(); ++j)
        CHECK(std::abs(e.deriv2(p, vars[i], vars[j]) - e.deriv2(p, vars[j], vars[i])) <= 1e-12);
  }
}

TEST_CASE("print then parse reproduces the tree") {
  std::mt19937 rng(4242);
  for (int trial = 0; trial < 200; ++trial) {
    const Expression e = testutil::random_expression(rng, 3, 4);
    const Expression back = Expression::parse(e.str(), 3);
    if (!back.structurally_equal(e)) {
      INFO("printed: " << e.str());
      FAIL("round trip changed the tree");
    }
  }
  // Numeric literals survive the round trip bit-exactly.
  for (double v : {0.1, -3.0, 1.0 / 3.0, 2.5e-17, 12345.678901234567}) {
    const Expression c = Expression::constant(v);
    CHECK(Expression::parse(c.str(), 1).structurally_equal(c));
  }
}

TEST_CASE("one tree can be evaluated from many threads") {
  const Expression e = Expression::parse("sin(t)*x1 + exp(0.3*xdot1) - x1^3", 1);
  const EvalPoint p{0.4, {0.6}, {-0.2}};
  const double want = e.eval(p);
  std::vector<std::thread> workers;
  std::vector<double> results(4, 0.0);
  for (int k = 0; k < 4; ++k)
    workers.emplace_back([&, k] {
      double acc = want;
      for (int i = 0; i < 2000; ++i) acc = e.eval(p);
      results[k] = acc;
    });
  for (auto& w : workers) w.join();
  for (double r : results) CHECK(r == want);
}
