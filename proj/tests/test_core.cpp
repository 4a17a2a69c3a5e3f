#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "subgeo/subgeo.hpp"
#include "support/corpus.hpp"
#include "support/expr_corpus.hpp"
#include "support/fd_oracle.hpp"

using namespace subgeo;

namespace {

const std::vector<std::string> X3 = {"x1", "x2", "x3"};
const std::vector<std::string> X2 = {"x1", "x2"};

TangentVector axis(std::size_t m, std::size_t i) {
  std::vector<double> v(m, 0.0);
  v[i] = 1.0;
  return {v, Point(std::vector<double>(m, 0.0))};
}

ChartManifold euclid(std::size_t m) {
  std::vector<std::string> c;
  std::vector<std::vector<std::string>> g(m, std::vector<std::string>(m, "0"));
  for (std::size_t i = 0; i < m; ++i) {
    c.push_back("x" + std::to_string(i + 1));
    g[i][i] = "1";
  }
  return make_chart(c, g);
}

ChartManifold ex51() { return make_chart(X2, {{"exp(-2*x2)", "0"}, {"0", "1"}}); }
ChartManifold ex53() { return make_chart(X3, {{"x3^-2", "0", "0"}, {"0", "x3^-2", "0"}, {"0", "0", "x3^-2"}}, "x3 > 0"); }
ChartManifold ex54() { return make_chart(X3, {{"4", "0", "0"}, {"0", "4", "0"}, {"0", "0", "4"}}); }
ChartManifold hyp2() { return make_chart(X2, {{"x2^-2", "0"}, {"0", "x2^-2"}}, "x2 > 0"); }

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

// ------------------------------------------------------------------ jets

TEST(Jet, PolynomialSecondOrder) {
  auto f = scalar_field("x1^2", {"x1"});
  auto r = eval_with_derivatives(f, Point({3.0}), {axis(1, 0)}, 2);
  EXPECT_DOUBLE_EQ(r.value, 9.0);
  EXPECT_DOUBLE_EQ(r.first.at(0), 6.0);
  EXPECT_DOUBLE_EQ((r.second.at({0, 0})), 2.0);
}

TEST(Jet, ChainRuleAtZero) {
  auto f = scalar_field("exp(-2*x2)", X2);
  auto r = eval_with_derivatives(f, Point({0.0, 0.0}), {axis(2, 1)}, 2);
  EXPECT_DOUBLE_EQ(r.value, 1.0);
  EXPECT_DOUBLE_EQ(r.first.at(0), -2.0);
  EXPECT_NEAR((r.second.at({0, 0})), 4.0, 1e-14);
  const double h = 1e-4;
  double fd2 = (std::exp(-2 * h) - 2.0 + std::exp(2 * h)) / (h * h);
  EXPECT_NEAR((r.second.at({0, 0})), fd2, 1e-6);
}

TEST(Jet, InverseSquareMatchesCentralDifference) {
  auto f = scalar_field("x3^-2", X3);
  auto r = eval_with_derivatives(f, Point({0.0, 0.0, 2.0}), {axis(3, 2)}, 1);
  EXPECT_DOUBLE_EQ(r.value, 0.25);
  EXPECT_DOUBLE_EQ(r.first.at(0), -0.25);
  const double h = 1e-5;
  double fd1 = (std::pow(2.0 + h, -2) - std::pow(2.0 - h, -2)) / (2 * h);
  EXPECT_LE(rel(r.first.at(0), fd1), 1e-6);
}

TEST(Jet, RejectsBadOrderAndArity) {
  auto f = scalar_field("x1", {"x1"});
  EXPECT_THROW(eval_with_derivatives(f, Point({1.0}), {axis(1, 0)}, 3), std::invalid_argument);
  EXPECT_THROW(eval_with_derivatives(f, Point({1.0, 2.0}), {}, 1), std::invalid_argument);
}

// AD against central differences over the expression corpus, mixed directions included.
TEST(JetProperty, AutodiffMatchesFiniteDifferences) {
  SplitMix64 rng(7);
  for (const auto& text : corpus::expressions()) {
    auto f = scalar_field(text, X3);
    for (int trial = 0; trial < 6; ++trial) {
      std::vector<double> x(3), u(3), v(3);
      for (auto& c : x) c = rng.uniform(0.5, 1.5);
      for (auto& c : u) c = rng.uniform(-1.0, 1.0);
      for (auto& c : v) c = rng.uniform(-1.0, 1.0);
      Point p(x);
      auto r = eval_with_derivatives(f, p, {{u, p}, {v, p}}, 2);
      auto at = [&](double s, double t) {
        std::vector<double> y(3);
        for (int i = 0; i < 3; ++i) y[i] = x[i] + s * u[i] + t * v[i];
        return eval<double>(*f.ast, std::span<const double>(y));
      };
      const double h1 = 1e-5, h2 = 1e-4;
      double d1 = (at(h1, 0) - at(-h1, 0)) / (2 * h1);
      double d2 = (at(h2, h2) - at(h2, -h2) - at(-h2, h2) + at(-h2, -h2)) / (4 * h2 * h2);
      EXPECT_LE(rel(r.first.at(0), d1), 1e-6) << text;
      EXPECT_LE(rel((r.second.at({0, 1})), d2), 1e-4) << text;
    }
  }
}

// ---------------------------------------------------------------- parsing

TEST(Expr, GrammarShapes) {
  EXPECT_EQ(to_string(parse_expression("exp(-2*x2)", X2)), to_string(make_call(Fn::Exp, make_binary(Op::Mul, make_const(-2), make_var(1, "x2")))));
  auto p = parse_expression("x3^-2", X3);
  ASSERT_EQ(p->op, Op::Pow);
  EXPECT_EQ(p->num, -2);
  EXPECT_EQ(p->den, 1);
  EXPECT_EQ(p->a->op, Op::Var);
  auto c = parse_expression("4", X3);
  ASSERT_EQ(c->op, Op::Const);
  EXPECT_EQ(c->value, 4.0);
}

TEST(Expr, SyntaxErrorCarriesPosition) {
  try {
    parse_expression("x1 + * x2", X2);
    FAIL() << "no error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line, 1u);
    EXPECT_EQ(e.column, 6u);
    EXPECT_FALSE(e.expected.empty());
  }
}

TEST(Expr, UnknownIdentifierAndNonConstantExponent) {
  EXPECT_THROW(parse_expression("x1 + y7", X2), ParseError);
  EXPECT_THROW(parse_expression("x1^x2", X2), ParseError);
  EXPECT_THROW(parse_expression("exp(x1", X2), ParseError);
  EXPECT_THROW(parse_expression("", X2), ParseError);
}

TEST(Expr, DomainViolationsNameSubexpression) {
  auto bad = [](const std::string& t, std::vector<double> x) {
    auto e = parse_expression(t, X2);
    try {
      eval<double>(*e, std::span<const double>(x));
    } catch (const EvalError& err) {
      return err.subexpression;
    }
    return std::string("<none>");
  };
  EXPECT_NE(bad("1 + log(x1)", {0.0, 1.0}).find("log"), std::string::npos);
  EXPECT_NE(bad("sqrt(x1)", {-1.0, 1.0}).find("sqrt"), std::string::npos);
  EXPECT_NE(bad("x2/x1", {0.0, 1.0}), "<none>");
  EXPECT_NE(bad("x1^-1", {0.0, 1.0}), "<none>");
  EXPECT_EQ(bad("exp(x1)", {0.0, 1.0}), "<none>");
}

TEST(Expr, PrintParseRoundTripIsExact) {
  for (const auto& text : corpus::expressions()) {
    auto a = parse_expression(text, X3);
    auto b = parse_expression(to_string(a), X3);
    EXPECT_TRUE(same_ast(a, b)) << text << " -> " << to_string(a);
    EXPECT_EQ(to_string(a), to_string(b));
  }
}

TEST(Expr, RandomInputNeverCrashes) {
  const std::string alphabet = "x123+-*/^() .e5sinexplogcosqrt";
  SplitMix64 rng(99);
  int parsed = 0;
  for (int t = 0; t < 3000; ++t) {
    std::string s;
    std::size_t len = 1 + rng.next() % 16;
    for (std::size_t i = 0; i < len; ++i) s += alphabet[rng.next() % alphabet.size()];
    try {
      auto e = parse_expression(s, X3);
      ++parsed;
      EXPECT_TRUE(same_ast(e, parse_expression(to_string(e), X3))) << s;
    } catch (const ParseError&) {
    }
  }
  EXPECT_GT(parsed, 0);
}

TEST(Expr, PredicateDomain) {
  auto p = parse_predicate("x3 > 1 && x1 != 0", X3);
  std::vector<double> a{1.0, 0.0, 2.0}, b{0.0, 0.0, 2.0}, c{1.0, 0.0, 0.5};
  EXPECT_TRUE(p.holds(a));
  EXPECT_FALSE(p.holds(b));
  EXPECT_FALSE(p.holds(c));
}

// ---------------------------------------------------------- vector calculus

TEST(Calculus, Jacobians) {
  auto j1 = jacobian({scalar_field("x1", X2)}, Point({0.3, -2.0}));
  EXPECT_EQ(j1(0, 0), 1.0);
  EXPECT_EQ(j1(0, 1), 0.0);
  auto id = jacobian({scalar_field("x1", X2), scalar_field("x2", X2)}, Point({1.0, 2.0}));
  EXPECT_EQ(id(0, 0), 1.0);
  EXPECT_EQ(id(1, 1), 1.0);
  EXPECT_EQ(id(0, 1), 0.0);
  auto j3 = jacobian({scalar_field("x2", X3), scalar_field("x3", X3)}, Point({1.0, 2.0, 3.0}));
  double want[2][3] = {{0, 1, 0}, {0, 0, 1}};
  for (int a = 0; a < 2; ++a)
    for (int c = 0; c < 3; ++c) EXPECT_EQ(j3(a, c), want[a][c]);
}

TEST(Calculus, LieBrackets) {
  auto X = vector_field({"x2", "0"}, X2);
  auto Y = coordinate_field(2, 1);
  Point p({1.0, 1.0});
  auto b = lie_bracket(X, Y, p).components;
  EXPECT_DOUBLE_EQ(b[0], -1.0);
  EXPECT_DOUBLE_EQ(b[1], 0.0);
  auto z = lie_bracket(X, X, p).components;
  EXPECT_EQ(z[0], 0.0);
  auto e = lie_bracket(coordinate_field(2, 0), coordinate_field(2, 1), p).components;
  EXPECT_EQ(e[0], 0.0);
  EXPECT_EQ(e[1], 0.0);
}

// ---------------------------------------------------------- riemannian core

TEST(Riemann, MetricValues) {
  auto g = metric_matrix(ex51(), Point({0.0, 0.0}));
  EXPECT_EQ(g(0, 0), 1.0);
  EXPECT_EQ(g(1, 1), 1.0);
  EXPECT_EQ(g(0, 1), 0.0);
  auto g4 = metric_matrix(ex54(), Point({0.3, 7.0, -1.0}));
  for (int i = 0; i < 3; ++i) EXPECT_EQ(g4(i, i), 4.0);
  EXPECT_THROW(metric_matrix(make_chart(X2, {{"1", "2"}, {"2", "1"}}), Point({0.0, 0.0})), DegenerateMetric);
  EXPECT_THROW(metric_matrix(ex53(), Point({0.0, 0.0, -1.0})), OutsideDomain);
}

TEST(Riemann, Example51Christoffels) {
  SplitMix64 rng(3);
  for (int t = 0; t < 20; ++t) {
    double x2 = rng.uniform(-2, 2);
    auto c = christoffel_symbols(ex51(), Point({rng.uniform(-2, 2), x2}));
    // Gamma^2_11, Gamma^1_12
    EXPECT_NEAR(c(1, 0, 0), std::exp(-2 * x2), 1e-12);
    EXPECT_NEAR(c(0, 0, 1), -1.0, 1e-12);
    EXPECT_NEAR(c(0, 1, 0), -1.0, 1e-12);
    EXPECT_NEAR(c(0, 0, 0), 0.0, 1e-12);
    EXPECT_NEAR(c(1, 1, 1), 0.0, 1e-12);
    EXPECT_NEAR(c(1, 0, 1), 0.0, 1e-12);
  }
}

TEST(Riemann, CovariantDerivatives) {
  auto e1 = coordinate_field(2, 0), e2 = coordinate_field(2, 1);
  auto d = covariant_derivative(ex51(), e1, e1, Point({0.0, 0.5})).components;
  EXPECT_NEAR(d[0], 0.0, 1e-14);
  EXPECT_NEAR(d[1], std::exp(-1.0), 1e-14);
  auto flat = covariant_derivative(euclid(2), e1, e2, Point({1.0, 2.0})).components;
  EXPECT_EQ(flat[0], 0.0);
  EXPECT_EQ(flat[1], 0.0);
}

TEST(Riemann, FlatCurvatureVanishes) {
  auto e = [](int i) { return coordinate_field(3, i); };
  auto X = vector_field({"x2", "x1*x3", "1"}, X3);
  for (const auto& M : {euclid(3), ex54()}) {
    auto r = riemann_tensor(M, X, e(1), e(2), Point({0.3, 0.2, 0.1})).components;
    for (double v : r) EXPECT_NEAR(v, 0.0, 1e-14);
  }
}

TEST(Riemann, HyperbolicSectionalCurvature) {
  auto M = hyp2();
  Point p({0.0, 1.0});
  auto e1 = coordinate_field(2, 0), e2 = coordinate_field(2, 1);
  auto r = riemann_tensor(M, e1, e2, e2, p).components;
  auto g = metric_matrix(M, p);
  EXPECT_NEAR(inner(g, r, std::vector<double>{1.0, 0.0}), -1.0, 1e-10);
  // the field-level and tensor-level curvature agree
  auto R = curvature_at<double>(M, p.span());
  auto r2 = R.apply(std::vector<double>{1, 0}, std::vector<double>{0, 1}, std::vector<double>{0, 1});
  EXPECT_NEAR(r2[0], r[0], 1e-12);
  EXPECT_NEAR(r2[1], r[1], 1e-12);
}

TEST(Riemann, SpaceFormOracles) {
  SplitMix64 rng(11);
  for (int t = 0; t < 20; ++t) {
    Point p2({rng.uniform(-3, 3), rng.uniform(0.2, 3)});
    auto M = hyp2();
    EXPECT_LE(rel(scalar_curvature(M, p2), -2.0), 1e-6);
    auto g = metric_matrix(M, p2);
    auto R = curvature_at<double>(M, p2.span());
    auto ric = ricci_coordinates(R);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) EXPECT_LE(std::abs(ric(i, j) + g(i, j)), 1e-6 * std::max(1.0, g(i, j)));

    Point p3({rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(0.2, 3)});
    auto H3 = ex53();
    EXPECT_LE(rel(scalar_curvature(H3, p3), -6.0), 1e-6);
    auto g3 = metric_matrix(H3, p3);
    auto ric3 = ricci_coordinates(curvature_at<double>(H3, p3.span()));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) EXPECT_LE(std::abs(ric3(i, j) + 2 * g3(i, j)), 1e-6 * std::max(1.0, g3(i, j)));
  }
  EXPECT_EQ(scalar_curvature(euclid(3), Point({1.0, 2.0, 3.0})), 0.0);
}

TEST(Riemann, RicciFieldLevelMatchesCoordinateTensor) {
  auto M = ex51();
  Point p({0.2, 0.0});
  // orthonormal e2 = d/dx2 at x2 = 0
  EXPECT_NEAR(ricci(M, coordinate_field(2, 1), coordinate_field(2, 1), p), -1.0, 1e-10);
  EXPECT_NEAR(ricci(euclid(2), coordinate_field(2, 0), coordinate_field(2, 1), p), 0.0, 1e-15);
}

TEST(Riemann, GradientDivergenceHessianLaplacian) {
  Point p({0.4, -0.3});
  auto g = gradient(euclid(2), scalar_field("x1", X2), p).components;
  EXPECT_EQ(g[0], 1.0);
  EXPECT_EQ(g[1], 0.0);
  auto g51 = gradient(ex51(), scalar_field("x2", X2), p).components;
  EXPECT_NEAR(g51[0], 0.0, 1e-15);
  EXPECT_NEAR(g51[1], 1.0, 1e-15);
  auto gc = gradient(ex51(), scalar_field("7", X2), p).components;
  EXPECT_EQ(gc[0], 0.0);
  EXPECT_EQ(gc[1], 0.0);

  EXPECT_NEAR(divergence(euclid(2), coordinate_field(2, 0), p), 0.0, 1e-15);
  EXPECT_NEAR(divergence(euclid(2), vector_field({"x1", "x2"}, X2), p), 2.0, 1e-14);

  EXPECT_NEAR(hessian(euclid(2), scalar_field("x1^2", X2), coordinate_field(2, 0), coordinate_field(2, 0), p), 2.0, 1e-14);
  EXPECT_NEAR(laplacian(euclid(2), scalar_field("x1^2 + x2^2", X2), p), 4.0, 1e-13);
  EXPECT_NEAR(laplacian(ex54(), scalar_field("3*x1 - x2 + 2", X3), Point({1.0, 2.0, 3.0})), 0.0, 1e-14);
}

// (1/sqrt det g) d_i(sqrt det g X^i) by central differences
TEST(Riemann, DivergenceMatchesCoordinateFormula) {
  auto M = ex53();
  auto X = vector_field({"x1*x2", "sin(x3)", "1"}, X3);
  for (std::vector<double> x : {std::vector<double>{0.0, 0.0, 2.0}, {0.5, -0.2, 1.3}}) {
    auto vol = [&](std::vector<double> y, int i) {
      double s = std::pow(y[2], -3.0);
      return s * eval<double>(*X.components[i], std::span<const double>(y));
    };
    const double h = 1e-5;
    double d = 0.0;
    for (int i = 0; i < 3; ++i) {
      auto yp = x, ym = x;
      yp[i] += h;
      ym[i] -= h;
      d += (vol(yp, i) - vol(ym, i)) / (2 * h);
    }
    d /= std::pow(x[2], -3.0);
    EXPECT_NEAR(divergence(M, X, Point(x)), d, 1e-7);
  }
}

// trace of Hessian in coordinates: g^ij (d_ij f - Gamma^k_ij d_k f)
TEST(Riemann, LaplacianMatchesTraceOracle) {
  auto M = ex51();
  auto f = scalar_field("exp(-2*x2)", X2);
  Point p({0.1, 0.35});
  double x2 = 0.35;
  // d_2 f = -2e^{-2x2}, d_22 f = 4e^{-2x2}; g^11 Gamma^2_11 d_2 f contributes
  double df2 = -2 * std::exp(-2 * x2), d22 = 4 * std::exp(-2 * x2);
  double oracle = d22 - std::exp(2 * x2) * (std::exp(-2 * x2) * df2);
  EXPECT_NEAR(laplacian(M, f, p), oracle, 1e-9);
}

TEST(Riemann, KillingFieldsAndZero) {
  Point p({0.7, -1.1});
  auto rot = vector_field({"-x2", "x1"}, X2);
  auto e1 = coordinate_field(2, 0), e2 = coordinate_field(2, 1);
  for (const auto& [a, b] : {std::pair{e1, e1}, std::pair{e1, e2}, std::pair{e2, e2}}) {
    EXPECT_NEAR(lie_derivative_metric(euclid(2), rot, a, b, p), 0.0, 1e-14);
    EXPECT_EQ(lie_derivative_metric(ex51(), zero_field(2), a, b, p), 0.0);
  }
  // translation along x1 is Killing for the 5.1 metric
  EXPECT_NEAR(lie_derivative_metric(ex51(), e1, e1, e1, p), 0.0, 1e-14);
}

TEST(Riemann, Orthonormalize) {
  Point p({1.0, 2.0, 3.0});
  auto f = orthonormalize(ex54(), p, {axis(3, 0), axis(3, 1), axis(3, 2)});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(f.vectors[i].components[j], i == j ? 0.5 : 0.0, 1e-15);
  auto e = orthonormalize(euclid(2), Point({0.0, 0.0}), {axis(2, 0), axis(2, 1)});
  EXPECT_EQ(e.vectors[0].components, (std::vector<double>{1, 0}));
  EXPECT_THROW(orthonormalize(euclid(2), Point({0.0, 0.0}), {axis(2, 0), axis(2, 0)}), std::exception);
}

// ------------------------------------------------------------ properties

class RandomMetrics : public ::testing::Test {
 protected:
  std::vector<std::pair<ChartManifold, std::vector<Point>>> cases() {
    std::vector<std::pair<ChartManifold, std::vector<Point>>> out;
    corpus::Gen gen(2024);
    for (std::size_t m : {2, 3, 4}) {
      corpus::Spec sp;
      sp.n = m / 2;
      sp.k = m - sp.n;
      sp.unit_dilation = false;
      auto s = gen.make(sp);
      std::vector<Point> pts;
      for (int i = 0; i < 4; ++i) pts.push_back(gen.point(m));
      out.emplace_back(s.total, pts);
    }
    return out;
  }
};

TEST_F(RandomMetrics, ConnectionIsMetricAndTorsionFree) {
  for (const auto& [M, pts] : cases()) {
    const std::size_t m = M.dim;
    for (const auto& p : pts) {
      auto c = christoffel_symbols(M, p);
      auto jet = flat_partials<double>([&](auto xs) { return metric_at(M, xs).data(); }, p.span());
      for (std::size_t k = 0; k < m; ++k)
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < m; ++j) {
            EXPECT_LE(std::abs(c(k, i, j) - c(k, j, i)), 1e-8);
            // d_k g_ij = g(D_k e_i, e_j) + g(e_i, D_k e_j)
            double rhs = 0.0;
            for (std::size_t l = 0; l < m; ++l) rhs += c(l, k, i) * c.g(l, j) + c(l, k, j) * c.g(i, l);
            EXPECT_LE(std::abs(jet.d[k][i * m + j] - rhs), 1e-8);
          }
    }
  }
}

TEST_F(RandomMetrics, CurvatureSymmetriesAndBianchi) {
  for (const auto& [M, pts] : cases()) {
    const std::size_t m = M.dim;
    for (const auto& p : pts) {
      auto R = curvature_at<double>(M, p.span());
      auto g = metric_matrix(M, p);
      auto low = [&](std::size_t a, std::size_t k, std::size_t i, std::size_t j) {
        double s = 0.0;
        for (std::size_t l = 0; l < m; ++l) s += g(a, l) * R(l, k, i, j);
        return s;
      };
      double scale = 0.0;
      for (double v : R.r) scale = std::max(scale, std::abs(v));
      const double tol = 1e-8 * std::max(1.0, scale);
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t k = 0; k < m; ++k)
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) {
              EXPECT_LE(std::abs(R(a, k, i, j) + R(a, k, j, i)), tol);
              EXPECT_LE(std::abs(low(a, k, i, j) + low(k, a, i, j)), tol);
              EXPECT_LE(std::abs(low(a, k, i, j) - low(i, j, a, k)), tol);
              EXPECT_LE(std::abs(R(a, k, i, j) + R(a, i, j, k) + R(a, j, k, i)), tol);
            }
    }
  }
}

// differential Bianchi: cyclic sum of (D_c R)(a,b) vanishes, derivatives by nested jets
TEST_F(RandomMetrics, SecondBianchi) {
  for (const auto& [M, pts] : cases()) {
    const std::size_t m = M.dim;
    const std::size_t m4 = m * m * m * m;
    for (const auto& p : pts) {
      auto jet = flat_partials<double>([&](auto xs) { return curvature_at(M, xs).r; }, p.span());
      auto c = christoffel_symbols(M, p);
      auto R = curvature_at<double>(M, p.span());
      auto Ridx = [&](std::size_t l, std::size_t k, std::size_t i, std::size_t j) { return ((l * m + k) * m + i) * m + j; };
      // (D_c R)^l_{k i j}
      auto nabla = [&](std::size_t cc, std::size_t l, std::size_t k, std::size_t i, std::size_t j) {
        double v = jet.d[cc][Ridx(l, k, i, j)];
        for (std::size_t n = 0; n < m; ++n) {
          v += c(l, cc, n) * R(n, k, i, j);
          v -= c(n, cc, k) * R(l, n, i, j) + c(n, cc, i) * R(l, k, n, j) + c(n, cc, j) * R(l, k, i, n);
        }
        return v;
      };
      double scale = 1.0;
      for (std::size_t cc = 0; cc < m; ++cc)
        for (std::size_t q = 0; q < m4; ++q) scale = std::max(scale, std::abs(jet.d[cc][q]));
      for (std::size_t l = 0; l < m; ++l)
        for (std::size_t k = 0; k < m; ++k)
          for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b)
              for (std::size_t cc = 0; cc < m; ++cc) {
                double s = nabla(a, l, k, b, cc) + nabla(b, l, k, cc, a) + nabla(cc, l, k, a, b);
                EXPECT_LE(std::abs(s), 1e-8 * scale);
              }
    }
  }
}

TEST_F(RandomMetrics, JetCurvatureMatchesFiniteDifferenceOracle) {
  for (const auto& [M, pts] : cases()) {
    for (const auto& p : pts) {
      auto R = curvature_at<double>(M, p.span());
      auto O = fd::curvature(M, p.coords);
      double scale = 1.0;
      for (double v : O) scale = std::max(scale, std::abs(v));
      for (std::size_t q = 0; q < O.size(); ++q) EXPECT_LE(std::abs(R.r[q] - O[q]), 1e-6 * scale);
      EXPECT_LE(rel(scalar_curvature(M, p), fd::scalar(M, p.coords)), 1e-6);
    }
  }
}
