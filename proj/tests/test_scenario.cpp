#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "altkin/scenario.hpp"

using namespace altkin;
using Catch::Approx;

namespace {

json minimal_em() {
  json j;
  j["schema_version"] = 1;
  j["system"] = {{"type", "em"},
                 {"n", 2},
                 {"V", "0.5*x1^2 + x2^2"},
                 {"A", json::array({"0", "0"})}};
  j["multiplier"] = {{"exprs", json::array({json::array({"1", "0"}), json::array({"0", "2"})})}};
  return j;
}

}  // namespace

TEST_CASE("scenario: load, build and verify an expression system") {
  const Scenario s = load_scenario(minimal_em());
  const BuiltScenario b = build_scenario(s);
  REQUIRE(b.n == 2);
  REQUIRE(b.multiplier.has_value());
  const ConditionReport rep = verify_all(*b.system, *b.multiplier, s.verify_options());
  CHECK(rep.all_pass());
}

TEST_CASE("scenario: schema and input errors") {
  {
    json j = minimal_em();
    j["schema_version"] = 2;
    CHECK_THROWS_AS(load_scenario(j), ScenarioError);
  }
  {
    json j = minimal_em();
    j.erase("system");
    CHECK_THROWS_AS(load_scenario(j), ScenarioError);
  }
  {
    json j = minimal_em();
    j["system"]["type"] = "unknown";
    CHECK_THROWS_AS(build_scenario(load_scenario(j)), ScenarioError);
  }
  {
    json j = minimal_em();
    j["system"]["A"] = json::array({"0"});  // wrong component count
    CHECK_THROWS_AS(build_scenario(load_scenario(j)), ScenarioError);
  }
  {
    json j = minimal_em();
    j["system"]["V"] = "x3";  // index out of range for n=2
    CHECK_THROWS_AS(build_scenario(load_scenario(j)), ScenarioError);
  }
  {
    json j = minimal_em();
    j["system"]["V"] = "0.5*xdot1^2";  // velocity dependence
    CHECK_THROWS_AS(build_scenario(load_scenario(j)), ScenarioError);
  }
  {
    json j = minimal_em();
    j["multiplier"] = {{"exprs", json::array({json::array({"1"})})}};  // 1x1 vs n=2
    CHECK_THROWS_AS(build_scenario(load_scenario(j)), ScenarioError);
  }
  {
    json j = minimal_em();
    j["window"] = {{"t0", 1.0}, {"t1", 0.0}};
    CHECK_THROWS_AS(load_scenario(j), ScenarioError);
  }
}

TEST_CASE("scenario: families build with their built-in multipliers") {
  json j;
  j["schema_version"] = 1;
  j["system"] = {{"type", "family_n2"}, {"sigma", "0.4"}, {"k", "0"}, {"m", "1"},
                 {"A", 1.2},            {"B", 1.0},       {"C", 3.0}};
  const BuiltScenario b = build_scenario(load_scenario(j));
  REQUIRE(b.multiplier.has_value());
  REQUIRE(b.blocks.has_value());
  CHECK(b.n == 2);
  CHECK(b.transform_path);

  json j3;
  j3["schema_version"] = 1;
  j3["system"] = {{"type", "sec5"}, {"a", "1"}, {"theta", "t"}};
  const BuiltScenario b3 = build_scenario(load_scenario(j3));
  CHECK(b3.n == 3);
  const Vec w = sorted_eigenvalues(b3.multiplier->value(0.0));
  CHECK(w[0] == Approx(0.0).margin(1e-12));
  CHECK(w[2] == Approx(2.0).margin(1e-12));
}

TEST_CASE("scenario: prop3 construction from expression frames") {
  json j;
  j["schema_version"] = 1;
  j["system"] = {
      {"type", "prop3"},
      {"n", 3},
      {"W", "(x1 - x2)^3"},
      {"S", json::array({json::array({1.0, 1.0, 0.0}), json::array({1.0, 1.0, 0.0}),
                         json::array({0.0, 0.0, 1.0})})},
      {"U", json::array({json::array({"1", "0", "0"}),
                         json::array({"0", "cos(t)", "neg(sin(t))"}),
                         json::array({"0", "sin(t)", "cos(t)"})})}};
  const BuiltScenario b = build_scenario(load_scenario(j));
  const ConditionReport rep = verify_all(*b.system, *b.multiplier, Scenario{}.verify_options());
  CHECK(rep.all_pass());
  CHECK(rep.singular_warning);

  // A non-orthogonal U is an input error.
  json bad = j;
  bad["system"]["U"] = json::array({json::array({"2", "0", "0"}),
                                    json::array({"0", "1", "0"}),
                                    json::array({"0", "0", "1"})});
  CHECK_THROWS_AS(build_scenario(load_scenario(bad)), ScenarioError);
}

TEST_CASE("scenario: composition of one-dimensional systems") {
  json j;
  j["schema_version"] = 1;
  j["system"] = {
      {"type", "compose"},
      {"subsystems",
       json::array({json{{"type", "em"}, {"n", 1}, {"V", "0.5*x1^2"}, {"A", json::array({"0"})}},
                    json{{"type", "em"}, {"n", 1}, {"V", "0.25*x1^4"}, {"A", json::array({"0"})}}})},
      {"lambdas", json::array({1.0, 2.0})},
      {"P", json::array({json::array({"cos(t)", "neg(sin(t))"}),
                         json::array({"sin(t)", "cos(t)"})})}};
  const BuiltScenario b = build_scenario(load_scenario(j));
  CHECK(b.n == 2);
  REQUIRE(b.blocks.has_value());
  const ConditionReport rep = verify_all(*b.system, *b.multiplier, Scenario{}.verify_options());
  CHECK(rep.all_pass());
}

TEST_CASE("scenario: multiplier from an inline path") {
  json j = minimal_em();
  json data = json::array();
  for (int k = 0; k <= 10; ++k)
    data.push_back(json::array({1.0, 0.0, 0.0, 2.0}));
  j["multiplier"] = {{"path", {{"t0", 0.0}, {"h", 0.1}, {"data", data}}}};
  const BuiltScenario b = build_scenario(load_scenario(j));
  REQUIRE(b.multiplier.has_value());
  CHECK(b.multiplier->kind() == MultiplierCandidate::Kind::Path);
  CHECK(b.multiplier->value(0.55)(1, 1) == Approx(2.0).margin(1e-12));
}

TEST_CASE("scenario: overrides land in the verify options") {
  json j = minimal_em();
  j["window"] = {{"t0", 0.5}, {"t1", 2.5}, {"h", 0.01}};
  j["samples"] = 7;
  j["seed"] = 3;
  j["tol"] = 1e-4;
  const Scenario s = load_scenario(j);
  const VerifyOptions o = s.verify_options();
  CHECK(o.t0 == 0.5);
  CHECK(o.t1 == 2.5);
  CHECK(o.cloud.count == 7);
  CHECK(o.cloud.seed == 3);
  REQUIRE(o.tol_override.has_value());
  CHECK(*o.tol_override == 1e-4);
}
