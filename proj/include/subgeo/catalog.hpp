#pragma once

// The four worked examples: setups, printed values with provenance, and the
// comparison run that separates oracle failures from printed-value divergence.

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "identities.hpp"
#include "manifest.hpp"
#include "rng.hpp"
#include "soliton.hpp"
#include "submersion.hpp"

namespace subgeo {

inline constexpr const char* kPaperPrinted = "paper-printed";
inline constexpr const char* kDerivedOracle = "derived-oracle";

struct ExpectedVector {
  std::string name;
  std::string tensor;  // T | A | gUU_H
  std::vector<double> E, Ep;
  bool unit_arguments = false;
  bool orthonormal_output = false;
  std::vector<std::string> expected;
  std::string provenance = kPaperPrinted;
};

struct ExpectedRicci {
  std::size_t i = 0, j = 0;  // coordinate basis
  std::string expr;
  std::string provenance = kPaperPrinted;
};

struct ExpectedFlag {
  std::string name;
  bool value = true;
  std::string provenance = kPaperPrinted;
};

struct ExpectedScalar {
  std::string name;  // scalar_curvature | anisotropy | tension
  std::string expr;
  std::string provenance = kDerivedOracle;
};

/// Printed soliton constant with free coefficients a1..a6 (X1 = a1 e1 + a2 e2, Y1 = a3 e1 + a4 e2, Z1 = a5 e1 + a6 e2).
struct MuFormula {
  std::string expr;  // over coordinates then a1..a6
};

struct ExpectedValues {
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::string> christoffels;  // (k,i,j), i <= j
  std::string dilation;
  std::vector<ExpectedVector> oneill_values;
  std::vector<ExpectedRicci> ricci_values;
  std::vector<ExpectedRicci> ricci_oracle;
  std::vector<ExpectedFlag> flags;
  std::vector<ExpectedScalar> scalars;
  std::optional<MuFormula> mu_formula;
  std::vector<std::string> notes;
};

struct CatalogExample {
  std::string id;
  std::string title;
  VerificationJob job;
  ExpectedValues expected;
  std::vector<Point> default_points;
};

inline const std::vector<std::string>& example_ids() {
  static const std::vector<std::string> ids = {"5.1", "5.2", "5.3", "5.4"};
  return ids;
}

/// Manifest text shipped for each example.
inline std::string example_manifest(const std::string& id) {
  if (id == "5.1")
    return "total.dim = 2\n"
           "total.coords = x1, x2\n"
           "total.metric = exp(-2*x2), 0; 0, 1\n"
           "base.dim = 1\n"
           "base.coords = y1\n"
           "base.metric = 1\n"
           "map.components = x1\n"
           "fields.xi = total: 0, 0\n"
           "soliton.xi = xi\n"
           "soliton.mu = 1\n"
           "checks = structure, G2.12, G2.13, G2.14, G2.15, P3.1, E3.3, fit_mu\n"
           "points.list = 0, 0; 1, 0.5; -1, 1; 0.5, -0.5; -0.5, 0.25; 2, -1; -2, 0.75; 0.25, 1.5; -1.5, -0.25; "
           "1.25, -1.25; 0.75, 0.1; -0.3, -0.8\n"
           "tolerance = 1e-6\n";
  if (id == "5.2")
    return "total.dim = 2\n"
           "total.coords = x1, x2\n"
           "total.metric = exp(2*x1), 0; 0, 1\n"
           "total.domain = x1 != 0\n"
           "base.dim = 1\n"
           "base.coords = y1\n"
           "base.metric = 1\n"
           "base.domain = y1 != 0\n"
           "map.components = x1\n"
           "fields.xi = total: 0, 0\n"
           "soliton.xi = xi\n"
           "soliton.mu = 0\n"
           "checks = structure, G2.12, G2.13, G2.14, G2.15, P3.1, E3.3, fit_mu\n"
           "points.list = 0.5, 0; 1, 0.5; -1, 1; 0.25, -0.5; -0.5, 0.25; 1.5, -1; -1.25, 0.75; 0.75, 1.5; "
           "-0.75, -0.25; 0.1, -1.25; -0.1, 0.1; 1.2, -0.8\n"
           "tolerance = 1e-6\n";
  if (id == "5.3")
    return "total.dim = 3\n"
           "total.coords = x1, x2, x3\n"
           "total.metric = x3^-2, 0, 0; 0, x3^-2, 0; 0, 0, x3^-2\n"
           "total.domain = x3 > 1\n"
           "base.dim = 2\n"
           "base.coords = y1, y2\n"
           "base.metric = 1, 0; 0, 1\n"
           "base.domain = y2 > 1\n"
           "map.components = x2, x3\n"
           "fields.xi = total: 0, 0, 0\n"
           "soliton.xi = xi\n"
           "soliton.mu = 2\n"
           "checks = structure, G2.12, G2.13, G2.14, G2.15, P3.1, E3.3, fit_mu\n"
           "points.list = 0, 0, 1.5; 0.5, -0.5, 1.5; -1, 1, 1.5; 1, 0.25, 1.5; 0, 0, 2; 0.5, -0.5, 2; -1, 1, 2; "
           "1, 0.25, 2; 0, 0, 3; 0.5, -0.5, 3; -1, 1, 3; 1, 0.25, 3\n"
           "tolerance = 1e-6\n";
  if (id == "5.4")
    return "total.dim = 3\n"
           "total.coords = x1, x2, x3\n"
           "total.metric = 4, 0, 0; 0, 4, 0; 0, 0, 4\n"
           "base.dim = 2\n"
           "base.coords = y1, y2\n"
           "base.metric = 1, 0; 0, 1\n"
           "map.components = x1, x3\n"
           "fields.xi = total: 0, 0, 0\n"
           "soliton.xi = xi\n"
           "soliton.mu = 0\n"
           "checks = all\n"
           "points.list = 0, 0, 0; 1, 0.5, -0.5; -1, 1, 2; 0.5, -1.5, 1; -2, 0.25, -1; 1.5, 2, 0.75; "
           "-0.5, -0.5, -2; 2, -1, 1.25; -1.25, 1.75, 0.5; 0.75, -2, -1.5; 0.1, 0.2, 0.3; -1.8, -0.6, 1.9\n"
           "tolerance = 1e-6\n";
  throw std::invalid_argument("unknown example id '" + id + "'");
}

inline std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::string> zero_christoffels(std::size_t m) {
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::string> out;
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i; j < m; ++j) out[{k, i, j}] = "0";
  return out;
}

inline CatalogExample load_example(const std::string& id) {
  CatalogExample ex;
  ex.id = id;
  ex.job = parse_manifest(example_manifest(id));
  ex.default_points = ex.job.points;
  auto& e = ex.expected;
  const std::size_t m = ex.job.setup.m();
  e.christoffels = zero_christoffels(m);
  if (id == "5.1") {
    ex.title = "homothetic, totally geodesic fibers, integrable horizontal distribution";
    e.christoffels[{1, 0, 0}] = "exp(-2*x2)";
    e.christoffels[{0, 0, 1}] = "-1";
    e.dilation = "exp(x2)";
    e.oneill_values = {{"A_X X, X = e1", "A", {1, 0}, {1, 0}, false, false, {"0", "exp(-2*x2)"}},
                       {"T_U U, U = e2", "T", {0, 1}, {0, 1}, false, false, {"0", "0"}},
                       {"T_U X, U = e2, X = e1", "T", {0, 1}, {1, 0}, false, false, {"0", "0"}}};
    e.ricci_values = {{0, 0, "-exp(-6*x2) - exp(-2*x2) - exp(-4*x2) + 1"}, {1, 1, "-2*exp(-2*x2) - 1"}, {0, 1, "0"}};
    e.ricci_oracle = {{0, 0, "-exp(-2*x2)", kDerivedOracle}, {1, 1, "-1", kDerivedOracle}, {0, 1, "0", kDerivedOracle}};
    e.flags = {{"homothetic", true}, {"fibers_totally_geodesic", true}, {"horizontal_integrable", true}};
    e.scalars = {{"scalar_curvature", "-2"}, {"anisotropy", "0"}};
    e.mu_formula = MuFormula{
        "((2*a1*a3*(a6 + exp(-2*x2)) - a4*a5*(a1 + a2) + 2*a1*a3*(1 + exp(-4*x2)))*exp(-2*x2) - 2*a1*a3 + "
        "2*a2*a4*(1 + 2*exp(-2*x2))) / (2*(a1*a3*exp(-2*x2) + a2*a4))"};
    e.notes = {"domain x1 != 0, x2 != 0 not imposed; every quantity is smooth on the whole plane"};
  } else if (id == "5.2") {
    ex.title = "totally geodesic and umbilical fibers, integrable and totally geodesic horizontal distribution";
    e.christoffels[{0, 0, 0}] = "1";
    e.dilation = "exp(-x1)";
    e.oneill_values = {{"A_X X, X = e1", "A", {1, 0}, {1, 0}, false, false, {"0", "0"}},
                       {"T_U U, U = e2", "T", {0, 1}, {0, 1}, false, false, {"0", "0"}}};
    e.ricci_values = {{0, 0, "(1 - 2*exp(2*x1))*(exp(2*x1) - 1)"}, {1, 1, "0"}, {0, 1, "0"}};
    e.ricci_oracle = {{0, 0, "0", kDerivedOracle}, {1, 1, "0", kDerivedOracle}, {0, 1, "0", kDerivedOracle}};
    e.flags = {{"fibers_totally_geodesic", true},
               {"fibers_totally_umbilical", true},
               {"horizontal_integrable", true},
               {"horizontal_totally_geodesic", true},
               {"homothetic", false},
               {"lambda_vertical_constant", true}};
    e.scalars = {{"scalar_curvature", "0"}, {"anisotropy", "0"}};
    e.mu_formula = MuFormula{"(a1*a3*(1 - 2*exp(2*x1))*(1 - exp(2*x1)) - a1*a3*a5*exp(2*x1)) / (a1*a3*exp(2*x1) + a2*a4)"};
    e.notes = {"umbilical fibers read as T = 0 with H = 0"};
  } else if (id == "5.3") {
    ex.title = "totally umbilical fibers, integrable and totally geodesic horizontal distribution";
    e.christoffels[{0, 0, 2}] = "-x3^-1";
    e.christoffels[{1, 1, 2}] = "-x3^-1";
    e.christoffels[{2, 0, 0}] = "x3^-1";
    e.christoffels[{2, 1, 1}] = "x3^-1";
    e.christoffels[{2, 2, 2}] = "-x3^-1";
    e.dilation = "x3";
    e.oneill_values = {
        {"T_U U, U unit along e1", "T", {1, 0, 0}, {1, 0, 0}, true, true, {"0", "0", "1"}},
        {"g(U,U) H, U = e1", "gUU_H", {1, 0, 0}, {1, 0, 0}, false, true, {"0", "0", "x3^-2"}},
        {"A_X X, X = e2", "A", {0, 1, 0}, {0, 1, 0}, false, false, {"0", "0", "0"}},
        {"A_X X, X = e3", "A", {0, 0, 1}, {0, 0, 1}, false, false, {"0", "0", "0"}},
        {"A_X X, X = 0.6 e2 + 0.8 e3", "A", {0, 0.6, 0.8}, {0, 0.6, 0.8}, false, false, {"0", "0", "0"}}};
    e.ricci_oracle = {{0, 0, "-2*x3^-2", kDerivedOracle}, {1, 1, "-2*x3^-2", kDerivedOracle},
                      {2, 2, "-2*x3^-2", kDerivedOracle}, {0, 1, "0", kDerivedOracle},
                      {0, 2, "0", kDerivedOracle},        {1, 2, "0", kDerivedOracle}};
    e.flags = {{"fibers_totally_umbilical", true},
               {"horizontal_integrable", true},
               {"horizontal_totally_geodesic", true}};
    e.scalars = {{"scalar_curvature", "-6"}, {"anisotropy", "0"}};
    e.notes = {"T_U U = e3 and g(U,U) H = x3^-2 e3 hold with unit U and e3 read in the orthonormal frame"};
  } else if (id == "5.4") {
    ex.title = "homothetic, totally geodesic fibers and horizontal distribution, totally geodesic map";
    e.dilation = "1/2";
    e.oneill_values = {{"T_U U, U = e2", "T", {0, 1, 0}, {0, 1, 0}, false, false, {"0", "0", "0"}},
                       {"A_X X, X = e1", "A", {1, 0, 0}, {1, 0, 0}, false, false, {"0", "0", "0"}},
                       {"A_X X, X = e3", "A", {0, 0, 1}, {0, 0, 1}, false, false, {"0", "0", "0"}},
                       {"A_X X, X = 0.6 e1 + 0.8 e3", "A", {0.6, 0, 0.8}, {0.6, 0, 0.8}, false, false, {"0", "0", "0"}}};
    e.ricci_oracle = {{0, 0, "0", kDerivedOracle}, {1, 1, "0", kDerivedOracle}, {2, 2, "0", kDerivedOracle}};
    e.flags = {{"homothetic", true},
               {"fibers_totally_geodesic", true},
               {"horizontal_totally_geodesic", true},
               {"map_totally_geodesic", true}};
    e.scalars = {{"scalar_curvature", "0"}, {"anisotropy", "0"}, {"tension", "0"}};
  } else {
    throw std::invalid_argument("unknown example id '" + id + "'");
  }
  return ex;
}

/// Default list first, then seeded samples inside a box around it until count is reached.
inline std::vector<Point> example_points(const CatalogExample& ex, std::size_t count, std::uint64_t seed) {
  std::vector<Point> out;
  for (std::size_t i = 0; i < ex.default_points.size() && out.size() < count; ++i) out.push_back(ex.default_points[i]);
  if (out.size() == count) return out;
  const std::size_t m = ex.job.setup.m();
  std::vector<std::pair<double, double>> box(m);
  for (std::size_t c = 0; c < m; ++c) {
    double lo = 1e300, hi = -1e300;
    for (const auto& p : ex.default_points) {
      lo = std::min(lo, p.coords[c]);
      hi = std::max(hi, p.coords[c]);
    }
    if (!(lo < hi)) hi = lo + 1.0;
    box[c] = {lo, hi};
  }
  auto extra = sample_box(ex.job.setup, box, count - out.size(), seed);
  out.insert(out.end(), extra.begin(), extra.end());
  return out;
}

struct InfoRecord {
  std::string name;
  std::vector<double> point;
  std::vector<TermRecord> values;
};

struct ExampleReport {
  std::string id;
  std::vector<ResidualReport> records;
  std::vector<InfoRecord> informational;
  StructureFlags flags;
  std::vector<std::string> notes;
};

namespace detail {

inline double eval_at(const std::string& text, const std::vector<std::string>& coords, const Point& p) {
  auto e = parse_expression(text, coords);
  return eval<double>(e, p.span());
}

/// Accumulates per-point comparisons into one record per expected value.
struct Comparator {
  std::string example_id, name, provenance;
  double tol;
  ResidualReport r;
  double worst_rel = -1.0;

  Comparator(std::string ex, std::string nm, std::string prov, double t)
      : example_id(std::move(ex)), name(std::move(nm)), provenance(std::move(prov)), tol(t) {
    r.kind = "example";
    r.identity_id = example_id + ":" + name;
    r.provenance = provenance;
  }

  void add(const Point& p, std::size_t idx, const std::vector<double>& computed, const std::vector<double>& expected) {
    Sample s{p.coords, computed, expected, 0.0};
    double scale = 0.0;
    for (std::size_t i = 0; i < computed.size(); ++i) {
      s.abs_residual = std::max(s.abs_residual, std::abs(computed[i] - expected[i]));
      scale = std::max({scale, std::abs(computed[i]), std::abs(expected[i])});
    }
    double rel = s.abs_residual / (1.0 + scale);
    if (rel > worst_rel) {
      worst_rel = rel;
      r.point = p.coords;
      r.point_index = idx;
      r.lhs = computed;
      r.rhs = expected;
      r.abs_residual = s.abs_residual;
      r.rel_residual = rel;
    }
    r.samples.push_back(std::move(s));
  }

  ResidualReport finish() {
    if (r.rel_residual <= tol) {
      r.verdict = "pass";
    } else if (provenance == kPaperPrinted) {
      r.verdict = "paper-divergent";
      r.note = "printed value disagrees with the intrinsic computation";
    } else {
      r.verdict = "fail";
    }
    return r;
  }
};

inline std::vector<double> to_orthonormal(const SubmersionPoint& sp, const std::vector<double>& v) {
  // diagonal metrics only: component along e_i / |e_i|
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * std::sqrt(sp.g(i, i));
  return out;
}

}  // namespace detail

inline ExampleReport run_example(const CatalogExample& ex, double tol, const std::vector<Point>& points,
                                 std::uint64_t seed = 42) {
  using detail::Comparator;
  const auto& s = ex.job.setup;
  const auto& coords = s.total.coord_names;
  const auto& e = ex.expected;
  const std::size_t m = s.m();
  ExampleReport rep;
  rep.id = ex.id;
  rep.notes = e.notes;

  std::vector<SubmersionPoint> sps;
  for (const auto& p : points) sps.push_back(analyze(s, p));

  auto each = [&](Comparator c, auto&& fn) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      auto [computed, expected] = fn(sps[i], points[i]);
      c.add(points[i], i, computed, expected);
    }
    rep.records.push_back(c.finish());
  };

  for (const auto& [key, text] : e.christoffels) {
    auto [k, i, j] = key;
    std::string name = "Gamma^" + std::to_string(k + 1) + "_" + std::to_string(i + 1) + std::to_string(j + 1);
    each(Comparator(ex.id, name, kPaperPrinted, tol), [&](const SubmersionPoint& sp, const Point& p) {
      return std::pair{std::vector<double>{sp.con(k, i, j)}, std::vector<double>{detail::eval_at(text, coords, p)}};
    });
  }
  each(Comparator(ex.id, "lambda", kPaperPrinted, tol), [&](const SubmersionPoint& sp, const Point& p) {
    return std::pair{std::vector<double>{std::sqrt(sp.lsq)}, std::vector<double>{detail::eval_at(e.dilation, coords, p)}};
  });
  for (const auto& v : e.oneill_values) {
    each(Comparator(ex.id, v.name, v.provenance, tol), [&](const SubmersionPoint& sp, const Point& p) {
      auto E = v.E, Ep = v.Ep;
      if (v.unit_arguments) {
        E = scaled(E, 1.0 / gnorm(sp, E));
        Ep = scaled(Ep, 1.0 / gnorm(sp, Ep));
      }
      std::vector<double> out;
      if (v.tensor == "T") out = T_of(sp, E, Ep);
      else if (v.tensor == "A") out = A_of(sp, E, Ep);
      else out = scaled(sp.H, gdot(sp, E, E));
      if (v.orthonormal_output) out = detail::to_orthonormal(sp, out);
      std::vector<double> want;
      for (const auto& t : v.expected) want.push_back(detail::eval_at(t, coords, p));
      return std::pair{out, want};
    });
  }
  auto ricci_entry = [&](const ExpectedRicci& r, const std::string& label) {
    std::string name = label + "(e" + std::to_string(r.i + 1) + ",e" + std::to_string(r.j + 1) + ")";
    each(Comparator(ex.id, name, r.provenance, tol), [&](const SubmersionPoint& sp, const Point& p) {
      std::vector<double> ei(m, 0.0), ej(m, 0.0);
      ei[r.i] = 1.0;
      ej[r.j] = 1.0;
      return std::pair{std::vector<double>{ricci_of(sp, ei, ej)}, std::vector<double>{detail::eval_at(r.expr, coords, p)}};
    });
  };
  for (const auto& r : e.ricci_values) ricci_entry(r, "Ric");
  for (const auto& r : e.ricci_oracle) ricci_entry(r, "Ric oracle");
  for (const auto& sc : e.scalars) {
    each(Comparator(ex.id, sc.name, sc.provenance, tol), [&](const SubmersionPoint& sp, const Point& p) {
      double v = 0.0;
      if (sc.name == "scalar_curvature") v = scalar_of(sp);
      else if (sc.name == "anisotropy") v = sp.dilation.anisotropy;
      else if (sc.name == "tension") v = hnorm(sp, tension_direct(sp));
      return std::pair{std::vector<double>{v}, std::vector<double>{detail::eval_at(sc.expr, coords, p)}};
    });
  }

  rep.flags = StructureFlags{};
  for (const auto& sp : sps) fold_flags(rep.flags, point_violations(sp));
  finalize_flags(rep.flags, tol);
  for (const auto& f : e.flags) {
    Comparator c(ex.id, "flag " + f.name, f.provenance, tol);
    std::size_t i = 0;
    rep.flags.for_each([&](const char* name, const Flag& fl) {
      if (f.name != name) return;
      c.add(points.empty() ? Point() : points[0], 0, {fl.holds ? 1.0 : 0.0}, {f.value ? 1.0 : 0.0});
      c.r.terms.push_back({"max_violation", fl.max_violation});
      ++i;
    });
    if (i != 1) throw std::logic_error("unknown structure flag " + f.name);
    rep.records.push_back(c.finish());
  }

  if (e.mu_formula) {
    std::vector<std::string> vars = coords;
    for (int k = 1; k <= 6; ++k) vars.push_back("a" + std::to_string(k));
    auto formula = parse_expression(e.mu_formula->expr, vars);
    SplitMix64 rng(seed);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& sp = sps[i];
      std::vector<double> a(6);
      for (auto& v : a) v = rng.uniform(-1.0, 1.0);
      std::vector<double> env = points[i].coords;
      env.insert(env.end(), a.begin(), a.end());
      double printed = eval<double>(formula, std::span<const double>(env));
      std::vector<double> X1{a[0], a[1]}, Y1{a[2], a[3]};
      VectorFieldSpec Z1{{make_const(a[4]), make_const(a[5])}};
      auto nz = nabla_field_matrix(sp.con, Z1, points[i].span());
      double gxy = gdot(sp, X1, Y1);
      double solved = -(0.5 * lie_g(sp.g, nz, X1, Y1) + ricci_of(sp, X1, Y1)) / gxy;
      InfoRecord info{ex.id + ":mu formula", points[i].coords, {}};
      for (int k = 0; k < 6; ++k) info.values.push_back({"a" + std::to_string(k + 1), a[k]});
      info.values.push_back({"printed mu", printed});
      info.values.push_back({"mu solving the soliton equation on X1, Y1, Z1", solved});
      rep.informational.push_back(std::move(info));
    }
  }
  return rep;
}

inline ExampleReport run_example(const std::string& id, double tol, const std::vector<Point>& points,
                                 std::uint64_t seed = 42) {
  return run_example(load_example(id), tol, points, seed);
}

}  // namespace subgeo
