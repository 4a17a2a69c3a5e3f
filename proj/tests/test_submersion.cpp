#include <gtest/gtest.h>

#include <cmath>

#include "subgeo/subgeo.hpp"
#include "support/corpus.hpp"

using namespace subgeo;

namespace {

SubmersionSetup example(const std::string& id) { return load_example(id).job.setup; }

double vnorm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> e(std::size_t m, std::size_t i) {
  std::vector<double> v(m, 0.0);
  v[i] = 1.0;
  return v;
}

struct Case {
  SubmersionSetup s;
  std::vector<Point> pts;
};

std::vector<Case> random_cases(std::uint64_t seed, bool unit_dilation, std::size_t npts) {
  corpus::Gen gen(seed);
  std::vector<Case> out;
  for (auto [n, k] : {std::pair<std::size_t, std::size_t>{1, 1}, {1, 2}, {2, 1}, {2, 2}, {1, 3}}) {
    corpus::Spec sp;
    sp.n = n;
    sp.k = k;
    sp.unit_dilation = unit_dilation;
    Case c{gen.make(sp), {}};
    for (std::size_t i = 0; i < npts; ++i) c.pts.push_back(gen.point(n + k));
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

// ------------------------------------------------------------- examples

TEST(Submersion, Example51SplitAndLift) {
  auto s = example("5.1");
  Point p({0.3, -0.4});
  auto [v, h] = vertical_horizontal_split(s, p, {e(2, 1), p});
  EXPECT_NEAR(v.components[1], 1.0, 1e-15);
  EXPECT_NEAR(vnorm(h.components), 0.0, 1e-15);
  auto [v1, h1] = vertical_horizontal_split(s, p, {e(2, 0), p});
  EXPECT_NEAR(vnorm(v1.components), 0.0, 1e-15);
  EXPECT_NEAR(h1.components[0], 1.0, 1e-15);
  auto lift = horizontal_lift(s, coordinate_field(1, 0), p).components;
  EXPECT_NEAR(lift[0], 1.0, 1e-15);
  EXPECT_NEAR(lift[1], 0.0, 1e-15);
  auto z = horizontal_lift(s, zero_field(1), p).components;
  EXPECT_EQ(vnorm(z), 0.0);
}

TEST(Submersion, Example53LiftOfSecondBaseField) {
  auto s = example("5.3");
  Point p({0.2, 1.5, 2.5});
  auto lift = horizontal_lift(s, coordinate_field(2, 1), p).components;
  EXPECT_NEAR(lift[0], 0.0, 1e-14);
  EXPECT_NEAR(lift[1], 0.0, 1e-14);
  EXPECT_NEAR(lift[2], 1.0, 1e-14);
}

TEST(Submersion, Example51Tensors) {
  auto s = example("5.1");
  SplitMix64 rng(5);
  for (int t = 0; t < 20; ++t) {
    double x2 = rng.uniform(-1.5, 1.5);
    Point p({rng.uniform(-2, 2), x2});
    auto d = dilation(s, p);
    EXPECT_NEAR(std::sqrt(d.lambda_sq), std::exp(x2), 1e-9 * std::exp(x2));
    EXPECT_LE(d.anisotropy, 1e-10);
    auto A = oneill_A(s, p, e(2, 0), e(2, 0)).components;
    EXPECT_NEAR(A[0], 0.0, 1e-9);
    EXPECT_NEAR(A[1], std::exp(-2 * x2), 1e-9);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) EXPECT_LE(vnorm(oneill_T(s, p, e(2, i), e(2, j)).components), 1e-9);
    EXPECT_LE(vnorm(mean_curvature(s, p).components), 1e-12);
    EXPECT_LE(vnorm(cov_deriv_T(s, p, e(2, 0), e(2, 1), e(2, 1)).components), 1e-9);
  }
}

TEST(Submersion, HorizontalTArgumentsAndVerticalAArgumentsVanish) {
  for (const auto& id : example_ids()) {
    auto ex = load_example(id);
    const auto& s = ex.job.setup;
    for (const auto& p : ex.default_points) {
      auto sp = analyze(s, p);
      for (const auto& X : sp.X)
        for (std::size_t j = 0; j < s.m(); ++j) EXPECT_LE(gnorm(sp, T_of(sp, X, e(s.m(), j))), 1e-12) << id;
      for (const auto& U : sp.U)
        for (std::size_t j = 0; j < s.m(); ++j) EXPECT_LE(gnorm(sp, A_of(sp, U, e(s.m(), j))), 1e-12) << id;
    }
  }
}

TEST(Submersion, Example54IsFlatAndTotallyGeodesic) {
  auto s = example("5.4");
  Point p({0.1, -0.7, 1.9});
  auto sp = analyze(s, p);
  for (double v : sp.con.gamma) EXPECT_EQ(v, 0.0);
  EXPECT_NEAR(sp.lsq, 0.25, 1e-15);
  for (double v : sp.T) EXPECT_LE(std::abs(v), 1e-15);
  for (double v : sp.A) EXPECT_LE(std::abs(v), 1e-15);
  for (double v : sp.nA) EXPECT_LE(std::abs(v), 1e-15);
  for (double v : tension_field(s, p).components) EXPECT_LE(std::abs(v), 1e-15);
  auto b = second_fundamental_form(s, coordinate_field(2, 0), coordinate_field(2, 1), p).components;
  EXPECT_LE(vnorm(b), 1e-15);
  auto hm = horizontal_mean_curvature(s, p);
  EXPECT_LE(vnorm(hm.via_A.components), 1e-15);
  EXPECT_LE(vnorm(hm.via_formula.components), 1e-15);
  EXPECT_TRUE(hm.integrable);
}

TEST(Submersion, OneDimensionalFibersHaveNoFiberCurvature) {
  for (const auto& id : example_ids()) {
    auto ex = load_example(id);
    for (const auto& p : ex.default_points) {
      auto sp = analyze(ex.job.setup, p);
      EXPECT_EQ(fiber_scalar_at(sp), 0.0) << id;
      EXPECT_EQ(fiber_ricci_at(sp, sp.U[0], sp.U[0]), 0.0) << id;
    }
  }
}

TEST(Submersion, ExampleStructureFlags) {
  auto flags = [](const std::string& id) {
    auto ex = load_example(id);
    return structure_flags(ex.job.setup, ex.default_points, 1e-9);
  };
  auto f1 = flags("5.1");
  EXPECT_TRUE(f1.fibers_totally_geodesic.holds);
  EXPECT_TRUE(f1.horizontal_integrable.holds);
  EXPECT_TRUE(f1.homothetic.holds);
  auto f3 = flags("5.3");
  EXPECT_TRUE(f3.fibers_totally_umbilical.holds);
  EXPECT_TRUE(f3.horizontal_totally_geodesic.holds);
  EXPECT_TRUE(f3.horizontal_integrable.holds);
  EXPECT_FALSE(f3.fibers_totally_geodesic.holds);
  auto f4 = flags("5.4");
  EXPECT_TRUE(f4.map_totally_geodesic.holds);
  EXPECT_TRUE(f4.fibers_totally_geodesic.holds);
}

TEST(Submersion, RankDeficientPointIsRejected) {
  auto total = make_chart({"x1", "x2"}, {{"1", "0"}, {"0", "1"}});
  auto base = make_chart({"y1"}, {{"1"}});
  auto s = make_setup(total, base, {"x1^2"});
  EXPECT_THROW(analyze(s, Point({0.0, 1.0})), NotASubmersion);
  EXPECT_NO_THROW(analyze(s, Point({1.0, 1.0})));
}

TEST(Submersion, IsometricIdentityHasNoTension) {
  auto total = make_chart({"x1", "x2", "x3"}, {{"1", "0", "0"}, {"0", "1", "0"}, {"0", "0", "1"}});
  auto base = make_chart({"y1", "y2"}, {{"1", "0"}, {"0", "1"}});
  auto s = make_setup(total, base, {"x1", "x2"});
  auto sp = analyze(s, Point({0.3, 0.1, -2.0}));
  for (double v : tension_direct(sp)) EXPECT_EQ(v, 0.0);
  for (double v : tension_formula(sp)) EXPECT_EQ(v, 0.0);
}

// -------------------------------------------------------------- properties

TEST(SubmersionProperty, ProjectorsAreComplementaryOrthogonalIdempotents) {
  for (const auto& c : random_cases(101, false, 4))
    for (const auto& p : c.pts) {
      auto sp = analyze(c.s, p);
      const std::size_t m = sp.m;
      auto HH = sp.Ph * sp.Ph;
      auto VV = sp.Pv * sp.Pv;
      auto VH = sp.Pv * sp.Ph;
      auto gH = sp.g * sp.Ph;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          EXPECT_LE(std::abs(HH(i, j) - sp.Ph(i, j)), 1e-10);
          EXPECT_LE(std::abs(VV(i, j) - sp.Pv(i, j)), 1e-10);
          EXPECT_LE(std::abs(VH(i, j)), 1e-10);
          EXPECT_LE(std::abs(gH(i, j) - gH(j, i)), 1e-10);
          EXPECT_LE(std::abs(sp.Ph(i, j) + sp.Pv(i, j) - (i == j ? 1.0 : 0.0)), 1e-10);
        }
      // kernel of dF is exactly the vertical space
      for (const auto& U : sp.U) EXPECT_LE(vnorm(sp.J * U), 1e-10);
    }
}

TEST(SubmersionProperty, OneillTensorsAreSkewAndReverseDistributions) {
  for (const auto& c : random_cases(202, false, 3))
    for (const auto& p : c.pts) {
      auto sp = analyze(c.s, p);
      std::vector<std::vector<double>> fr = sp.U;
      fr.insert(fr.end(), sp.X.begin(), sp.X.end());
      for (const auto& E : fr)
        for (const auto& F : fr) {
          for (const auto& G : fr) {
            EXPECT_LE(std::abs(gdot(sp, T_of(sp, E, F), G) + gdot(sp, F, T_of(sp, E, G))), 1e-9);
            EXPECT_LE(std::abs(gdot(sp, A_of(sp, E, F), G) + gdot(sp, F, A_of(sp, E, G))), 1e-9);
          }
        }
      for (const auto& U : sp.U) {
        for (const auto& V : sp.U) EXPECT_LE(gnorm(sp, sp.Pv * T_of(sp, U, V)), 1e-9);
        for (const auto& X : sp.X) EXPECT_LE(gnorm(sp, sp.Ph * T_of(sp, U, X)), 1e-9);
      }
      for (const auto& X : sp.X) {
        for (const auto& Y : sp.X) EXPECT_LE(gnorm(sp, sp.Ph * A_of(sp, X, Y)), 1e-9);
        for (const auto& U : sp.U) EXPECT_LE(gnorm(sp, sp.Pv * A_of(sp, X, U)), 1e-9);
      }
      // T_U V symmetric on vertical pairs
      for (const auto& U : sp.U)
        for (const auto& V : sp.U) EXPECT_LE(gnorm(sp, T_of(sp, U, V) - T_of(sp, V, U)), 1e-9);
    }
}

TEST(SubmersionProperty, TensionFormulaMatchesTraceOfSecondFundamentalForm) {
  for (const auto& c : random_cases(303, false, 3))
    for (const auto& p : c.pts) {
      auto sp = analyze(c.s, p);
      auto a = tension_formula(sp), b = tension_direct(sp);
      for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-8 * (1.0 + std::abs(b[i])));
    }
}

namespace {

void expect_verdict(const std::vector<ResidualReport>& rs, const std::string& verdict, double max_rel = -1.0) {
  ASSERT_FALSE(rs.empty());
  for (const auto& r : rs) {
    EXPECT_EQ(r.verdict, verdict) << r.identity_id << " " << r.tuple << " rel " << r.rel_residual;
    if (max_rel >= 0) EXPECT_LE(r.rel_residual, max_rel) << r.identity_id << " " << r.tuple;
  }
}

}  // namespace

TEST(SubmersionProperty, AFormulaOnConformalSetups) {
  for (const auto& c : random_cases(404, false, 3))
    for (const auto& p : c.pts) expect_verdict(verify_identities(c.s, analyze(c.s, p), {"E3.3"}, 1e-8), "pass", 1e-8);
}

TEST(Identities, FundamentalEquationsCloseAtUnitDilation) {
  for (const auto& c : random_cases(505, true, 3))
    for (const auto& p : c.pts)
      expect_verdict(verify_identities(c.s, analyze(c.s, p), {"G2.12", "G2.13", "G2.14", "G2.15", "G2.16"}, 1e-6),
                     "pass", 1e-6);
}

TEST(Identities, GaussEquationHoldsOnConformalSetups) {
  for (const auto& c : random_cases(606, false, 3))
    for (const auto& p : c.pts) expect_verdict(verify_curvature_identity("G2.12", c.s, p), "pass", 1e-6);
}

TEST(Identities, GeneralDilationBreakdownIsFlaggedAndItemized) {
  for (const auto& c : random_cases(707, false, 2))
    for (const auto& p : c.pts) {
      auto sp = analyze(c.s, p);
      for (const auto& id : {"G2.16", "R3.13"}) {
        auto rs = verify_identities(c.s, sp, {id}, 1e-6);
        for (const auto& r : rs) {
          if (r.verdict == "hypothesis-not-met") continue;
          EXPECT_NE(std::find(r.flags.begin(), r.flags.end(), "convention-sensitive"), r.flags.end()) << id;
          EXPECT_FALSE(r.terms.empty()) << id;
          EXPECT_NE(r.verdict, "fail") << id;
        }
      }
    }
}

// With lambda depending on the fiber, the computed sum of A-terms carries a
// factor n where the printed right side carries n^2.
TEST(Identities, LemmaOneFirstItemDiffersByFactorN) {
  corpus::Gen gen(808);
  for (std::size_t n : {2, 3}) {
    corpus::Spec spc;
    spc.n = n;
    spc.k = 1;
    spc.unit_dilation = false;
    spc.flat_connection = true;
    spc.dilation_on_fiber = true;
    auto s = gen.make(spc);
    for (int t = 0; t < 3; ++t) {
      auto sp = analyze(s, gen.point(n + 1));
      auto rs = verify_identities(s, sp, {"L3.1.i"}, 1e-6);
      ASSERT_EQ(rs.size(), 1u);
      const auto& r = rs[0];
      for (const auto& h : r.hypotheses) EXPECT_TRUE(h.ok) << h.name;
      ASSERT_GT(std::abs(r.rhs[0]), 1e-6);
      EXPECT_NEAR(r.lhs[0], r.rhs[0] / double(n), 1e-8 * (1.0 + std::abs(r.rhs[0])));
      EXPECT_EQ(r.verdict, "paper-divergent");
    }
  }
}

TEST(Identities, HessianSymmetry) {
  auto ex1 = load_example("5.1");
  auto ex3 = load_example("5.3");
  auto flat = make_chart({"x1", "x2"}, {{"1", "0"}, {"0", "1"}});
  EXPECT_LE(verify_hessian_symmetry(flat, scalar_field("x1^3*x2 - x2^2", {"x1", "x2"}), Point({0.3, 0.2})).abs_residual, 1e-12);
  for (const auto& p : ex1.default_points)
    EXPECT_LE(verify_hessian_symmetry(ex1.job.setup.total, scalar_field("exp(-2*x2)", {"x1", "x2"}), p).abs_residual, 1e-9);
  for (const auto& p : ex3.default_points)
    EXPECT_LE(verify_hessian_symmetry(ex3.job.setup.total, scalar_field("x3^-2", {"x1", "x2", "x3"}), p).abs_residual, 1e-9);
}

TEST(Identities, LemmaTwoOneOnConstantDilation) {
  auto ex = load_example("5.4");
  for (const auto& p : ex.default_points) expect_verdict(verify_lemma_2_1(ex.job.setup, p), "pass", 1e-9);
  auto total = make_chart({"x1", "x2"}, {{"1", "0"}, {"0", "1"}});
  auto base = make_chart({"y1", "y2"}, {{"1", "0"}, {"0", "1"}});
  EXPECT_THROW(make_setup(total, base, {"x1", "x2"}), std::invalid_argument);
}

TEST(Identities, Example54AllIdentitiesPass) {
  auto ex = load_example("5.4");
  for (const auto& p : ex.default_points) {
    auto rs = verify_identities(ex.job.setup, analyze(ex.job.setup, p), identity_ids(), 1e-9);
    for (const auto& r : rs) EXPECT_TRUE(r.verdict == "pass" || r.verdict == "hypothesis-not-met") << r.identity_id;
  }
}
