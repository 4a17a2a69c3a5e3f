// One PASS/FAIL line per acceptance criterion; nonzero exit if any fails.

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "subgeo/subgeo.hpp"
#include "support/corpus.hpp"
#include "support/expr_corpus.hpp"
#include "support/fd_oracle.hpp"

using namespace subgeo;

namespace {

struct Check {
  bool ok = true;
  std::string why;
  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      why = what;
    }
  }
  void le(double v, double tol, const std::string& what) {
    if (!(v <= tol)) require(false, what + " = " + std::to_string(v) + " > " + std::to_string(tol));
  }
};

const std::vector<std::string> X2 = {"x1", "x2"};
const std::vector<std::string> X3 = {"x1", "x2", "x3"};

std::vector<double> e(std::size_t m, std::size_t i) {
  std::vector<double> v(m, 0.0);
  v[i] = 1.0;
  return v;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<Point> random_points(std::size_t m, double lo, double hi, std::size_t count, std::uint64_t seed,
                                 std::size_t pos_axis = 99, double pos_lo = 0.0) {
  SplitMix64 rng(seed);
  std::vector<Point> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> x(m);
    for (std::size_t c = 0; c < m; ++c) x[c] = c == pos_axis ? rng.uniform(pos_lo, pos_lo + hi - lo) : rng.uniform(lo, hi);
    out.emplace_back(x);
  }
  return out;
}

ChartManifold hyp2() { return make_chart(X2, {{"x2^-2", "0"}, {"0", "x2^-2"}}, "x2 > 0"); }
ChartManifold flat2() { return make_chart(X2, {{"1", "0"}, {"0", "1"}}); }

std::vector<corpus::Spec> corpus_specs(bool unit) {
  std::vector<corpus::Spec> out;
  for (auto [n, k] : {std::pair<std::size_t, std::size_t>{1, 1}, {1, 2}, {2, 1}, {2, 2}, {1, 3}, {2, 1}}) {
    corpus::Spec s;
    s.n = n;
    s.k = k;
    s.unit_dilation = unit;
    out.push_back(s);
  }
  return out;
}

// ----------------------------------------------------------------- criteria

Check c1() {
  Check c;
  auto ex = load_example("5.1");
  const auto& s = ex.job.setup;
  for (const auto& p : example_points(ex, 20, 42)) {
    double x2 = p.coords[1];
    auto sp = analyze(s, p);
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
          double want = 0.0;
          if (k == 1 && i == 0 && j == 0) want = std::exp(-2 * x2);
          if (k == 0 && i + j == 1) want = -1.0;
          c.le(std::abs(sp.con(k, i, j) - want), 1e-9, "Christoffel");
        }
    c.le(std::abs(std::sqrt(sp.lsq) - std::exp(x2)), 1e-9 * std::exp(x2), "lambda");
    c.le(sp.dilation.anisotropy, 1e-10, "anisotropy");
    auto A = A_of(sp, e(2, 0), e(2, 0));
    c.le(std::abs(A[0]) + std::abs(A[1] - std::exp(-2 * x2)), 1e-9, "A_X X");
    for (double v : sp.T) c.le(std::abs(v), 1e-9, "T");
  }
  return c;
}

Check c2() {
  Check c;
  for (const auto& id : {"5.3", "5.4"}) {
    auto ex = load_example(id);
    auto pts = example_points(ex, 10, 42);
    auto rep = run_example(ex, 1e-9, pts, 42);
    for (const auto& r : rep.records) c.require(r.verdict == "pass", std::string(id) + " " + r.identity_id + " " + r.verdict);
    auto flags = structure_flags(ex.job.setup, pts, 1e-9);
    const auto& s = ex.job.setup;
    if (std::string(id) == "5.3") {
      c.require(flags.horizontal_integrable.holds && flags.horizontal_totally_geodesic.holds, "5.3 horizontal flags");
      c.require(flags.fibers_totally_umbilical.holds && !flags.fibers_totally_geodesic.holds, "5.3 fiber flags");
      for (const auto& p : pts) {
        auto sp = analyze(s, p);
        double x3 = p.coords[2];
        // unit vertical U = x3 d1: T_U U = e3 (unit), g(d1,d1) H = x3^-2 e3
        auto U = std::vector<double>{x3, 0, 0};
        auto T = T_of(sp, U, U);
        c.le(std::abs(T[0]) + std::abs(T[1]) + std::abs(T[2] - x3), 1e-9, "5.3 T_U U");
        auto gH = scaled(sp.H, sp.g(0, 0));
        c.le(std::abs(gH[2] * (1.0 / x3) - std::pow(x3, -2.0)), 1e-9, "5.3 g(U,U)H");
        for (const auto& X : sp.X) c.le(gnorm(sp, A_of(sp, X, X)), 1e-9, "5.3 A_X X");
      }
    } else {
      c.require(flags.map_totally_geodesic.holds, "5.4 map totally geodesic");
      for (const auto& p : pts) {
        auto sp = analyze(s, p);
        for (double v : sp.con.gamma) c.le(std::abs(v), 1e-9, "5.4 Christoffel");
        c.le(std::abs(std::sqrt(sp.lsq) - 0.5), 1e-9, "5.4 lambda");
      }
    }
  }
  return c;
}

Check c3() {
  Check c;
  corpus::Gen gen(31337);
  std::size_t setups = 0;
  for (auto spec : corpus_specs(true)) {
    auto s = gen.make(spec);
    ++setups;
    for (int t = 0; t < 20; ++t) {
      auto sp = analyze(s, gen.point(s.m()));
      for (const auto& r : verify_identities(s, sp, {"G2.12", "G2.13", "G2.14", "G2.15"}, 1e-6)) {
        c.require(r.verdict == "pass", r.identity_id + " " + r.verdict);
        c.le(r.rel_residual, 1e-6, r.identity_id);
      }
    }
  }
  c.require(setups >= 5, "fewer than five setups");
  for (const auto& id : example_ids()) {
    auto ex = load_example(id);
    for (const auto& p : example_points(ex, 20, 42))
      for (const auto& r : verify_curvature_identity("G2.12", ex.job.setup, p)) {
        c.require(r.verdict == "pass", id + " G2.12 " + r.verdict);
        c.le(r.rel_residual, 1e-6, id + " G2.12");
      }
  }
  return c;
}

Check c4() {
  Check c;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
  auto H3 = load_example("5.3").job.setup.total;
  struct Form {
    ChartManifold M;
    double k;  // Ric = k g
    std::vector<Point> pts;
  };
  std::vector<Form> forms = {{hyp2(), -1.0, random_points(2, -2, 2, 20, 1, 1, 0.3)},
                             {H3, -2.0, random_points(3, -2, 2, 20, 2, 2, 1.2)}};
  for (const auto& f : forms) {
    const std::size_t m = f.M.dim;
    double s_want = f.k * double(m);
    for (const auto& p : f.pts) {
      auto g = metric_matrix(f.M, p);
      auto ric = ricci_coordinates(curvature_at<double>(f.M, p.span()));
      auto fdric = fd::ricci(f.M, p.coords);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          c.le(std::abs(ric(i, j) - f.k * g(i, j)) / std::max(1.0, std::abs(f.k * g(i, j))), 1e-6, "Ric jet");
          c.le(std::abs(fdric[i * m + j] - f.k * g(i, j)) / std::max(1.0, std::abs(f.k * g(i, j))), 1e-6, "Ric fd");
        }
      c.le(rel(scalar_curvature(f.M, p), s_want), 1e-6, "s jet");
      c.le(rel(fd::scalar(f.M, p.coords), s_want), 1e-6, "s fd");
    }
  }
  return c;
}

Check c5() {
  Check c;
  for (const auto& id : {"5.1", "5.2"}) {
    auto ex = load_example(id);
    auto rep = run_example(ex, 1e-9, example_points(ex, 20, 42), 42);
    std::vector<std::string> divergent;
    for (const auto& r : rep.records) {
      if (r.verdict == "paper-divergent") {
        divergent.push_back(r.identity_id);
        c.require(r.identity_id.find(":Ric(") != std::string::npos, "non-Ricci divergent entry " + r.identity_id);
        for (const auto& s : r.samples) {
          if (std::string(id) == "5.2") c.le(std::abs(s.lhs[0]), 1e-9, "5.2 intrinsic Ricci");
          if (r.identity_id == "5.1:Ric(e2,e2)" && s.point[1] == 0.0) {
            c.le(std::abs(s.lhs[0] + 1.0), 1e-9, "5.1 intrinsic Ric(e2,e2) at x2=0");
            c.le(std::abs(s.rhs[0] + 3.0), 1e-9, "5.1 printed Ric(e2,e2) at x2=0");
          }
        }
      } else {
        c.require(r.verdict == "pass", std::string(id) + " " + r.identity_id + " " + r.verdict);
      }
    }
    std::vector<std::string> want = std::string(id) == "5.1"
                                         ? std::vector<std::string>{"5.1:Ric(e1,e1)", "5.1:Ric(e2,e2)"}
                                         : std::vector<std::string>{"5.2:Ric(e1,e1)"};
    c.require(divergent == want, std::string(id) + " divergent set");
    auto full = run_example_job(id, {}, 1e-9, 20, 42);
    c.require(full.counts().fail == 0 && full.exit_code() == 0, std::string(id) + " fail channel used");
  }
  return c;
}

Check c6() {
  Check c;
  auto h = fit_mu(hyp2(), zero_field(2), random_points(2, -2, 2, 20, 3, 1, 0.3));
  c.le(std::abs(h.mu - 1.0), 1e-6, "hyperbolic mu");
  c.le(h.max_residual, 1e-6, "hyperbolic residual");
  c.require(h.classification == "expanding", "hyperbolic class");
  auto ex3 = load_example("5.3");
  auto h3 = fit_mu(ex3.job.setup.total, zero_field(3), example_points(ex3, 20, 42));
  c.le(std::abs(h3.mu - 2.0), 1e-6, "5.3 mu");
  c.le(h3.max_residual, 1e-6, "5.3 residual");
  c.require(h3.classification == "expanding", "5.3 class");
  auto ex4 = load_example("5.4");
  auto f = fit_mu(ex4.job.setup.total, zero_field(3), example_points(ex4, 20, 42));
  c.le(std::abs(f.mu), 1e-6, "flat mu");
  c.le(f.max_residual, 1e-6, "flat residual");
  c.require(f.classification == "steady", "flat class");
  auto xi = vector_field({"x1/2", "x2/2"}, X2);
  auto e1 = coordinate_field(2, 0), e2 = coordinate_field(2, 1);
  for (const auto& p : random_points(2, -4, 4, 20, 4))
    for (const auto& [a, b] : {std::pair{e1, e1}, std::pair{e1, e2}, std::pair{e2, e2}})
      c.le(std::abs(soliton_residual(flat2(), xi, -0.5, p, a, b)), 1e-10, "shrinker");
  c.require(fit_mu(flat2(), xi, random_points(2, -4, 4, 5, 5)).classification == "shrinking", "shrinker class");
  return c;
}

Check c7() {
  Check c;
  auto ex = load_example("5.4");
  const auto& s = ex.job.setup;
  auto pts = example_points(ex, 20, 42);
  double mu = fit_mu(s.total, zero_field(3), pts).mu;
  c.le(std::abs(mu), 1e-12, "fitted mu");
  for (const auto& r : scalar_mu_consistency(s, {zero_field(3), mu}, pts)) {
    c.require(r.verdict == "pass", "Thm4.7 " + r.verdict);
    c.le(std::abs(r.lhs[0]), 1e-9, "s");
    c.le(std::abs(r.rhs[0]), 1e-9, "-mu m");
  }
  for (const auto& r : harmonicity_report(s, {zero_field(3), mu}, pts)) c.require(r.verdict == "pass", r.identity_id + " " + r.verdict);
  for (const auto& p : pts) {
    c.le(norm(tension_field(s, p).components), 1e-9, "tension");
    c.le(std::abs(fiber_scalar_at(analyze(s, p))), 1e-9, "fiber scalar");
  }
  // Hessian symmetry on the catalog scalar fields
  struct F {
    std::string id, f;
  };
  for (const auto& [id, f] : std::vector<F>{{"5.1", "exp(-2*x2)"}, {"5.1", "x1*x2"}, {"5.2", "exp(-2*x1)"}, {"5.2", "x1^2*x2"},
                                            {"5.3", "x3^-2"}, {"5.3", "x2*x3"}, {"5.4", "4"}, {"5.4", "x1*x3"}}) {
    auto e = load_example(id);
    auto sf = scalar_field(f, e.job.setup.total.coord_names);
    for (const auto& p : example_points(e, 20, 42))
      c.le(verify_hessian_symmetry(e.job.setup.total, sf, p).abs_residual, 1e-9, "L2.2 " + id + " " + f);
  }
  auto rot = conformal_field_fit(s.total, vector_field({"-x2", "x1", "0"}, X3), pts);
  c.require(rot.is_killing, "rotation Killing");
  c.le(rot.max_residual, 1e-10, "rotation residual");
  auto dil = conformal_field_fit(s.total, vector_field({"x1", "x2", "x3"}, X3), pts);
  c.le(dil.max_residual, 1e-10, "dilation residual");
  for (const auto& [p, v] : dil.f_values) c.le(std::abs(v - 1.0), 1e-10, "dilation f");
  return c;
}

Check c8() {
  Check c;
  // AD against finite differences
  SplitMix64 rng(8);
  for (const auto& text : corpus::expressions()) {
    auto f = scalar_field(text, X3);
    for (int t = 0; t < 5; ++t) {
      std::vector<double> x(3), u(3);
      for (auto& v : x) v = rng.uniform(0.5, 1.5);
      for (auto& v : u) v = rng.uniform(-1, 1);
      Point p(x);
      auto r = eval_with_derivatives(f, p, {{u, p}}, 2);
      auto at = [&](double s) {
        std::vector<double> y(3);
        for (int i = 0; i < 3; ++i) y[i] = x[i] + s * u[i];
        return eval<double>(*f.ast, std::span<const double>(y));
      };
      double d1 = (at(1e-5) - at(-1e-5)) / 2e-5;
      double d2 = (at(1e-4) - 2 * at(0) + at(-1e-4)) / 1e-8;
      c.le(std::abs(r.first.at(0) - d1) / std::max(1.0, std::abs(d1)), 1e-6, "AD order 1 " + text);
      c.le(std::abs((r.second.at({0, 0})) - d2) / std::max(1.0, std::abs(d2)), 1e-4, "AD order 2 " + text);
    }
    auto back = parse_expression(to_string(f.ast), X3);
    c.require(same_ast(f.ast, back), "AST round trip " + text);
  }
  // connection, curvature, projectors, O'Neill tensors on random conformal setups
  corpus::Gen gen(88);
  for (auto spec : corpus_specs(false)) {
    auto s = gen.make(spec);
    const std::size_t m = s.m();
    for (int t = 0; t < 3; ++t) {
      auto sp = analyze(s, gen.point(m));
      auto jet = flat_partials<double>([&](auto xs) { return metric_at(s.total, xs).data(); }, sp.p.span());
      double rscale = 1.0;
      for (double v : sp.R.r) rscale = std::max(rscale, std::abs(v));
      auto low = [&](std::size_t a, std::size_t k, std::size_t i, std::size_t j) {
        double v = 0.0;
        for (std::size_t l = 0; l < m; ++l) v += sp.g(a, l) * sp.R(l, k, i, j);
        return v;
      };
      for (std::size_t k = 0; k < m; ++k)
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < m; ++j) {
            c.le(std::abs(sp.con(k, i, j) - sp.con(k, j, i)), 1e-8, "torsion");
            double rhs = 0.0;
            for (std::size_t l = 0; l < m; ++l) rhs += sp.con(l, k, i) * sp.g(l, j) + sp.con(l, k, j) * sp.g(i, l);
            c.le(std::abs(jet.d[k][i * m + j] - rhs), 1e-8, "metric compatibility");
            for (std::size_t a = 0; a < m; ++a) {
              c.le(std::abs(low(a, k, i, j) + low(k, a, i, j)) / rscale, 1e-8, "curvature skew");
              c.le(std::abs(low(a, k, i, j) - low(i, j, a, k)) / rscale, 1e-8, "pair symmetry");
              c.le(std::abs(sp.R(a, k, i, j) + sp.R(a, i, j, k) + sp.R(a, j, k, i)) / rscale, 1e-8, "Bianchi");
            }
          }
      auto HH = sp.Ph * sp.Ph;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) c.le(std::abs(HH(i, j) - sp.Ph(i, j)), 1e-10, "projector idempotence");
      std::vector<std::vector<double>> fr = sp.U;
      fr.insert(fr.end(), sp.X.begin(), sp.X.end());
      for (const auto& E : fr)
        for (const auto& F : fr)
          for (const auto& G : fr) {
            c.le(std::abs(gdot(sp, T_of(sp, E, F), G) + gdot(sp, F, T_of(sp, E, G))), 1e-9, "T skew");
            c.le(std::abs(gdot(sp, A_of(sp, E, F), G) + gdot(sp, F, A_of(sp, E, G))), 1e-9, "A skew");
          }
      for (const auto& U : sp.U) {
        for (const auto& V : sp.U) c.le(gnorm(sp, sp.Pv * T_of(sp, U, V)), 1e-9, "T reversal");
        for (const auto& X : sp.X) c.le(gnorm(sp, sp.Ph * T_of(sp, U, X)), 1e-9, "T reversal");
      }
      for (const auto& X : sp.X) {
        for (const auto& Y : sp.X) c.le(gnorm(sp, sp.Ph * A_of(sp, X, Y)), 1e-9, "A reversal");
        for (const auto& U : sp.U) c.le(gnorm(sp, sp.Pv * A_of(sp, X, U)), 1e-9, "A reversal");
      }
      for (const auto& r : verify_identities(s, sp, {"E3.3"}, 1e-8)) c.require(r.verdict == "pass", "E3.3 " + r.verdict);
    }
  }
  // manifest round trip and json determinism
  for (const auto& id : example_ids()) {
    auto a = parse_manifest(example_manifest(id));
    auto printed = print_manifest(a);
    c.require(print_manifest(parse_manifest(printed)) == printed, "manifest round trip " + id);
  }
  auto j1 = render_json(run_example_job("5.1", {"all"}, 1e-6, 10, 42));
  auto j2 = render_json(run_example_job("5.1", {"all"}, 1e-6, 10, 42));
  c.require(j1 == j2, "json determinism");
  c.require(canonical_json(nlohmann::json::parse(j1)) == j1, "json re-render");
  return c;
}

Check c9() {
  Check c;
  corpus::Gen gen(99);
  for (auto spec : corpus_specs(true)) {
    auto s = gen.make(spec);
    for (int t = 0; t < 10; ++t)
      for (const auto& r : verify_identities(s, analyze(s, gen.point(s.m())), {"G2.16", "R3.13"}, 1e-6)) {
        if (r.verdict == "hypothesis-not-met") continue;
        c.require(r.verdict == "pass", "unit-dilation " + r.identity_id + " " + r.verdict);
        c.le(r.rel_residual, 1e-6, "unit-dilation " + r.identity_id);
      }
  }
  auto ex4 = load_example("5.4");
  for (const auto& p : example_points(ex4, 20, 42))
    for (const auto& r : verify_identities(ex4.job.setup, analyze(ex4.job.setup, p), {"G2.16", "R3.13"}, 1e-6))
      c.require(r.verdict == "pass", "5.4 " + r.identity_id + " " + r.verdict);
  std::size_t flagged = 0;
  for (const auto& id : {"5.1", "5.2", "5.3"}) {
    auto ex = load_example(id);
    for (const auto& p : example_points(ex, 20, 42))
      for (const auto& r : verify_identities(ex.job.setup, analyze(ex.job.setup, p), {"G2.16", "R3.13"}, 1e-6)) {
        bool flag = std::find(r.flags.begin(), r.flags.end(), "convention-sensitive") != r.flags.end();
        c.require(flag, std::string(id) + " " + r.identity_id + " missing convention flag");
        c.require(!r.terms.empty(), std::string(id) + " " + r.identity_id + " missing terms");
        c.require(r.verdict != "fail", std::string(id) + " " + r.identity_id + " fail");
        flagged += flag;
      }
  }
  c.require(flagged > 0, "no flagged records");
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria = {
      {"1 example 5.1 transcription", c1},     {"2 examples 5.3/5.4 structure", c2},
      {"3 fundamental equations", c3},         {"4 space-form oracles", c4},
      {"5 discrepancy detection", c5},         {"6 soliton machinery", c6},
      {"7 theorem instances on 5.4", c7},      {"8 property suites", c8},
      {"9 general-dilation identities", c9}};
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Check c;
    try {
      c = fn();
    } catch (const std::exception& e) {
      c.ok = false;
      c.why = std::string("exception: ") + e.what();
    }
    std::printf("%s criterion %s%s%s\n", c.ok ? "PASS" : "FAIL", name.c_str(), c.ok ? "" : ": ", c.why.c_str());
    failed += !c.ok;
  }
  return failed == 0 ? 0 : 1;
}
