#pragma once

#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "altkin/decouple.hpp"
#include "altkin/families.hpp"
#include "altkin/helmholtz.hpp"
#include "altkin/timeonly.hpp"

namespace altkin {

using json = nlohmann::ordered_json;

struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Scenario file: a system description (expressions or a named family),
/// an optional candidate multiplier, the time window and sampling knobs.
struct Scenario {
  json system;                       // {"type": ..., ...}
  std::optional<json> multiplier;    // exprs / path / path_csv
  std::optional<json> g0;            // start matrix for the flow command
  double t0 = 0.0, t1 = 1.0, h = 1e-3;
  int grid_steps = 200;
  int samples = 20;
  unsigned seed = 0;
  std::optional<double> tol;
  Tolerances tols;

  VerifyOptions verify_options() const {
    VerifyOptions o;
    o.t0 = t0;
    o.t1 = t1;
    o.grid_steps = grid_steps;
    o.cloud.count = samples;
    o.cloud.seed = seed;
    o.tols = tols;
    o.tol_override = tol;
    return o;
  }
};

/// Everything a command needs after interpreting a scenario.
struct BuiltScenario {
  int n = 0;
  SystemPtr system;
  std::optional<MultiplierCandidate> multiplier;
  std::optional<BlockStructure> blocks;  // known block split, when a family provides one
  // Optional family decoupling transform x = P(t) y, sampled on demand.
  std::function<MatrixPath(double, double, double)> transform_path;
  bool transform_orthogonal = false;
};

namespace detail {

inline const json& require(const json& j, const char* key, const char* ctx) {
  if (!j.contains(key))
    throw ScenarioError(std::string("scenario: missing \"") + key + "\" in " + ctx);
  return j.at(key);
}

inline Expression parse_expr(const json& j, int dim, const char* ctx) {
  if (!j.is_string()) throw ScenarioError(std::string("scenario: ") + ctx + " must be a string");
  try {
    return Expression::parse(j.get<std::string>(), dim);
  } catch (const ParseError& e) {
    throw ScenarioError(std::string("scenario: cannot parse ") + ctx + ": " + e.what());
  }
}

inline Mat parse_matrix(const json& j, const char* ctx) {
  if (!j.is_array() || j.empty())
    throw ScenarioError(std::string("scenario: ") + ctx + " must be a non-empty array of rows");
  const int n = static_cast<int>(j.size());
  Mat m(n, static_cast<int>(j.at(0).size()));
  for (int i = 0; i < n; ++i) {
    const auto& row = j.at(i);
    if (static_cast<int>(row.size()) != m.cols())
      throw ScenarioError(std::string("scenario: ragged matrix in ") + ctx);
    for (int k = 0; k < m.cols(); ++k) m(i, k) = row.at(k).get<double>();
  }
  return m;
}

inline std::vector<std::vector<Expression>> parse_expr_matrix(const json& j, const char* ctx) {
  if (!j.is_array() || j.empty())
    throw ScenarioError(std::string("scenario: ") + ctx + " must be an array of rows");
  std::vector<std::vector<Expression>> rows;
  for (const auto& jr : j) {
    std::vector<Expression> row;
    for (const auto& cell : jr) row.push_back(parse_expr(cell, 1, ctx));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline MatrixPath parse_path(const json& j, const char* ctx) {
  if (j.contains("path_csv")) return MatrixPath::read_csv_file(j.at("path_csv").get<std::string>());
  if (j.contains("path")) {
    const json& p = j.at("path");
    const double t0 = require(p, "t0", ctx).get<double>();
    const double h = require(p, "h", ctx).get<double>();
    const json& data = require(p, "data", ctx);
    std::vector<Mat> ms;
    for (const auto& row : data) {
      const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(row.size()))));
      Mat m(n, n);
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) m(i, k) = row.at(i * n + k).get<double>();
      ms.push_back(std::move(m));
    }
    return MatrixPath(t0, h, std::move(ms));
  }
  throw ScenarioError(std::string("scenario: ") + ctx + " needs \"path\" or \"path_csv\"");
}

inline json path_to_json(const MatrixPath& p) {
  json out;
  out["t0"] = p.t0();
  out["h"] = p.step();
  json data = json::array();
  for (int k = 0; k < p.size(); ++k) {
    json row = json::array();
    for (int i = 0; i < p.rows(); ++i)
      for (int j2 = 0; j2 < p.cols(); ++j2) row.push_back(p.at(k)(i, j2));
    data.push_back(std::move(row));
  }
  out["data"] = std::move(data);
  return out;
}

}  // namespace detail

inline Scenario load_scenario(const json& j) {
  Scenario s;
  if (!j.contains("schema_version") || j.at("schema_version").get<int>() != 1)
    throw ScenarioError("scenario: expected schema_version 1");
  s.system = detail::require(j, "system", "scenario");
  if (j.contains("multiplier")) s.multiplier = j.at("multiplier");
  if (j.contains("g0")) s.g0 = j.at("g0");
  if (j.contains("window")) {
    const json& w = j.at("window");
    if (w.contains("t0")) s.t0 = w.at("t0").get<double>();
    if (w.contains("t1")) s.t1 = w.at("t1").get<double>();
    if (w.contains("h")) s.h = w.at("h").get<double>();
  }
  if (j.contains("grid_steps")) s.grid_steps = j.at("grid_steps").get<int>();
  if (j.contains("samples")) s.samples = j.at("samples").get<int>();
  if (j.contains("seed")) s.seed = j.at("seed").get<unsigned>();
  if (j.contains("tol")) s.tol = j.at("tol").get<double>();
  if (j.contains("tolerances")) {
    const json& t = j.at("tolerances");
    if (t.contains("exact")) s.tols.exact = t.at("exact").get<double>();
    if (t.contains("sampled")) s.tols.sampled = t.at("sampled").get<double>();
  }
  if (!(s.t1 > s.t0) || s.h <= 0.0) throw ScenarioError("scenario: bad time window");
  return s;
}

inline Scenario load_scenario_file(const std::string& filename) {
  std::ifstream in(filename);
  if (!in) throw ScenarioError("cannot open scenario file " + filename);
  json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("scenario: invalid JSON: ") + e.what());
  }
  return load_scenario(j);
}

inline BuiltScenario build_scenario(const Scenario& s) {
  BuiltScenario out;
  const std::string type = detail::require(s.system, "type", "system").get<std::string>();

  if (type == "em") {
    const int n = detail::require(s.system, "n", "em system").get<int>();
    if (n < 1) throw ScenarioError("scenario: n must be >= 1");
    Expression v = detail::parse_expr(detail::require(s.system, "V", "em system"), n, "V");
    const json& ja = detail::require(s.system, "A", "em system");
    if (static_cast<int>(ja.size()) != n)
      throw ScenarioError("scenario: A must have n components");
    std::vector<Expression> a;
    for (int i = 0; i < n; ++i) a.push_back(detail::parse_expr(ja.at(i), n, "A component"));
    out.n = n;
    try {
      out.system = std::make_shared<EmSystem>(n, v, a);
    } catch (const std::invalid_argument& e) {
      throw ScenarioError(std::string("scenario: ") + e.what());
    }
  } else if (type == "family_n2") {
    families::N2Family fam;
    fam.sigma = detail::parse_expr(detail::require(s.system, "sigma", "family_n2"), 1, "sigma");
    fam.k = detail::parse_expr(detail::require(s.system, "k", "family_n2"), 1, "k");
    fam.m = detail::parse_expr(detail::require(s.system, "m", "family_n2"), 1, "m");
    fam.A = detail::require(s.system, "A", "family_n2").get<double>();
    fam.B = detail::require(s.system, "B", "family_n2").get<double>();
    fam.C = detail::require(s.system, "C", "family_n2").get<double>();
    families::N2Build b = families::n2_build(fam, s.t0, s.t1);
    out.n = 2;
    out.system = b.system;
    out.multiplier = b.multiplier;
    out.blocks = b.blocks;
    out.transform_path = [b](double t0, double t1, double h) {
      return b.transform_inverse_path(t0, t1, h);
    };
    out.transform_orthogonal = false;
  } else if (type == "family_n3") {
    families::N3Family fam;
    fam.a = detail::parse_expr(detail::require(s.system, "a", "family_n3"), 1, "a");
    fam.c1 = detail::require(s.system, "c1", "family_n3").get<double>();
    fam.c2 = detail::require(s.system, "c2", "family_n3").get<double>();
    fam.f = detail::parse_expr(detail::require(s.system, "f", "family_n3"), 2, "f");
    Expression upot =
        detail::parse_expr(detail::require(s.system, "U_pot", "family_n3"), 2, "U_pot");
    Expression zpot =
        detail::parse_expr(detail::require(s.system, "Z_pot", "family_n3"), 1, "Z_pot");
    families::N3Build b = families::n3_build(fam, upot, zpot, s.t0, s.t1);
    out.n = 3;
    out.system = b.system;
    out.multiplier = b.multiplier;
    out.blocks = b.blocks;
    out.transform_path = [b](double t0, double t1, double h) {
      return b.transform_inverse_path(t0, t1, h);
    };
    out.transform_orthogonal = false;
  } else if (type == "sec5") {
    Expression a = detail::parse_expr(detail::require(s.system, "a", "sec5"), 1, "a");
    Expression theta = detail::parse_expr(detail::require(s.system, "theta", "sec5"), 1, "theta");
    const auto pts = sample_cloud(3, s.t0, s.t1, {s.samples, s.seed, 1.0});
    families::Sec5Build b = families::sec5_build(a, theta, s.t0, s.t1, pts);
    out.n = 3;
    out.system = b.construction.system;
    out.multiplier = b.construction.multiplier;
  } else if (type == "prop3") {
    const int n = detail::require(s.system, "n", "prop3").get<int>();
    Expression w = detail::parse_expr(detail::require(s.system, "W", "prop3"), n, "W");
    const Mat sm = detail::parse_matrix(detail::require(s.system, "S", "prop3"), "S");
    const json& ju = detail::require(s.system, "U", "prop3");
    const auto pts = sample_cloud(n, s.t0, s.t1, {s.samples, s.seed, 1.0});
    Construction c = [&] {
      if (ju.is_array()) {
        TimeMatrix u = TimeMatrix::from_exprs(detail::parse_expr_matrix(ju, "U"));
        for (double t : {s.t0, 0.5 * (s.t0 + s.t1), s.t1})
          if (max_abs(transpose(u(t)) * u(t) - Mat::identity(n)) > 1e-7)
            throw ScenarioError("scenario: U is not orthogonal on the window");
        return construct_system(n, w, sm, u, pts);
      }
      MatrixPath up = detail::parse_path(ju, "U");
      return construct_system(
          n, w, sm, MatrixPath(up.t0(), up.step(), up.samples(), /*orthogonal=*/true), pts);
    }();
    out.n = n;
    out.system = c.system;
    out.multiplier = c.multiplier;
  } else if (type == "compose") {
    const json& jsubs = detail::require(s.system, "subsystems", "compose");
    std::vector<SystemPtr> subs;
    Vec lambdas;
    for (const auto& jsub : jsubs) {
      Scenario sub = s;
      sub.system = jsub;
      BuiltScenario bs = build_scenario(sub);
      subs.push_back(bs.system);
    }
    for (const auto& jl : detail::require(s.system, "lambdas", "compose"))
      lambdas.push_back(jl.get<double>());
    const json& jp = detail::require(s.system, "P", "compose");
    MatrixPath p = [&] {
      if (jp.is_array()) {
        TimeMatrix ptm = TimeMatrix::from_exprs(detail::parse_expr_matrix(jp, "P"));
        return MatrixPath::sample([&ptm](double t) { return ptm(t); }, s.t0, s.t1, s.h,
                                  /*orthogonal=*/true);
      }
      MatrixPath raw = detail::parse_path(jp, "P");
      return MatrixPath(raw.t0(), raw.step(), raw.samples(), /*orthogonal=*/true);
    }();
    Composition comp = compose_coupled(subs, lambdas, p);
    out.n = p.rows();
    out.system = comp.system;
    out.multiplier = comp.multiplier;
    out.blocks = comp.blocks;
  } else {
    throw ScenarioError("scenario: unknown system type \"" + type + "\"");
  }

  // A multiplier given in the scenario file overrides a family's built-in.
  if (s.multiplier) {
    const json& jm = *s.multiplier;
    const bool claims_constant = jm.contains("constant") && jm.at("constant").get<bool>();
    if (jm.contains("exprs")) {
      auto rows = detail::parse_expr_matrix(jm.at("exprs"), "multiplier");
      out.multiplier = MultiplierCandidate::from_exprs(std::move(rows), claims_constant);
    } else if (jm.contains("path") || jm.contains("path_csv")) {
      out.multiplier =
          MultiplierCandidate::from_path(detail::parse_path(jm, "multiplier"), claims_constant);
    } else {
      throw ScenarioError("scenario: multiplier needs \"exprs\", \"path\" or \"path_csv\"");
    }
    if (out.multiplier->dim() != out.n)
      throw ScenarioError("scenario: multiplier dimension does not match the system");
  }
  return out;
}

}  // namespace altkin
