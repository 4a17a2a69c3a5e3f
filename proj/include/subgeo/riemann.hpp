#pragma once

// Single-chart Riemannian geometry: metric, Levi-Civita connection,
// curvature, and the first-order calculus operators.
//
// Curvature convention: R(X,Y)Z = D_X D_Y Z - D_Y D_X Z - D_[X,Y] Z, so that
// Ric(X,Y) = tr(Z -> R(Z,X)Y) equals (m-1) K g on a space form of curvature K.

#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "calculus.hpp"
#include "expr.hpp"
#include "linalg.hpp"

namespace subgeo {

struct ChartManifold {
  std::size_t dim = 0;
  std::vector<std::string> coord_names;
  std::vector<std::vector<Expr>> metric;  // dim x dim
  std::optional<Predicate> domain;

  bool in_domain(std::span<const double> x) const { return !domain || domain->holds(x); }
};

inline ChartManifold make_chart(std::vector<std::string> coords, const std::vector<std::vector<std::string>>& metric,
                                const std::string& domain = "") {
  ChartManifold M;
  M.dim = coords.size();
  M.coord_names = std::move(coords);
  if (metric.size() != M.dim) throw std::invalid_argument("metric is not square");
  for (const auto& row : metric) {
    if (row.size() != M.dim) throw std::invalid_argument("metric is not square");
    std::vector<Expr> r;
    for (const auto& e : row) r.push_back(parse_expression(e, M.coord_names));
    M.metric.push_back(std::move(r));
  }
  if (!domain.empty()) M.domain = parse_predicate(domain, M.coord_names);
  return M;
}

inline std::string format_point(std::span<const double> x) {
  std::ostringstream os;
  os.precision(6);
  os << "(";
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

class DegenerateMetric : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OutsideDomain : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ------------------------------------------------------------------ kernels

/// Upper triangle evaluated, lower mirrored.
template <class S>
Matrix<S> metric_at(const ChartManifold& M, std::span<const S> x) {
  Matrix<S> g(M.dim, M.dim);
  for (std::size_t i = 0; i < M.dim; ++i)
    for (std::size_t j = i; j < M.dim; ++j) {
      g(i, j) = eval(*M.metric[i][j], x);
      if (j != i) g(j, i) = g(i, j);
    }
  return g;
}

/// Gamma^k_ij stored at (k*m + i)*m + j.
template <class S>
struct Connection {
  std::size_t m = 0;
  Matrix<S> g, ginv;
  std::vector<S> gamma;

  const S& operator()(std::size_t k, std::size_t i, std::size_t j) const { return gamma[(k * m + i) * m + j]; }

  /// Gamma(u, v)^k = Gamma^k_ij u^i v^j
  std::vector<S> apply(std::span<const S> u, std::span<const S> v) const {
    std::vector<S> out(m, S(0.0));
    for (std::size_t k = 0; k < m; ++k)
      for (std::size_t i = 0; i < m; ++i) {
        if (primal(u[i]) == 0.0 && !is_dual<S>::value) continue;
        S row(0.0);
        for (std::size_t j = 0; j < m; ++j) row += (*this)(k, i, j) * v[j];
        out[k] += u[i] * row;
      }
    return out;
  }
  std::vector<S> apply(const std::vector<S>& u, const std::vector<S>& v) const {
    return apply(std::span<const S>(u), std::span<const S>(v));
  }
};

template <class S>
Connection<S> connection_at(const ChartManifold& M, std::span<const S> x) {
  const std::size_t m = M.dim;
  auto jet = flat_partials<S>([&](auto xs) { return metric_at(M, xs).data(); }, x);
  Connection<S> c;
  c.m = m;
  c.g = Matrix<S>(m, m, jet.value);
  c.ginv = spd_inverse(c.g);
  auto dg = [&](std::size_t a, std::size_t i, std::size_t j) -> const S& { return jet.d[a][i * m + j]; };
  std::vector<S> lower(m * m * m);  // Gamma_{l,ij}
  for (std::size_t l = 0; l < m; ++l)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i; j < m; ++j) {
        S v = S(0.5) * (dg(i, j, l) + dg(j, i, l) - dg(l, i, j));
        lower[(l * m + i) * m + j] = v;
        lower[(l * m + j) * m + i] = v;
      }
  c.gamma.assign(m * m * m, S(0.0));
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i; j < m; ++j) {
        S acc(0.0);
        for (std::size_t l = 0; l < m; ++l) acc += c.ginv(k, l) * lower[(l * m + i) * m + j];
        c.gamma[(k * m + i) * m + j] = acc;
        c.gamma[(k * m + j) * m + i] = acc;
      }
  return c;
}

/// (R(d_i, d_j) d_k)^l stored at ((l*m + k)*m + i)*m + j; exactly antisymmetric in (i,j).
template <class S>
struct Curvature {
  std::size_t m = 0;
  std::vector<S> r;
  const S& operator()(std::size_t l, std::size_t k, std::size_t i, std::size_t j) const {
    return r[((l * m + k) * m + i) * m + j];
  }

  /// R(X,Y)Z
  std::vector<S> apply(std::span<const S> X, std::span<const S> Y, std::span<const S> Z) const {
    std::vector<S> out(m, S(0.0));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) {
        S w = X[i] * Y[j] - X[j] * Y[i];
        if (primal(w) == 0.0) continue;
        for (std::size_t l = 0; l < m; ++l) {
          S acc(0.0);
          for (std::size_t k = 0; k < m; ++k) acc += (*this)(l, k, i, j) * Z[k];
          out[l] += w * acc;
        }
      }
    return out;
  }
  std::vector<S> apply(const std::vector<S>& X, const std::vector<S>& Y, const std::vector<S>& Z) const {
    return apply(std::span<const S>(X), std::span<const S>(Y), std::span<const S>(Z));
  }
};

template <class S>
Curvature<S> curvature_at(const ChartManifold& M, std::span<const S> x) {
  const std::size_t m = M.dim;
  auto jet = flat_partials<S>([&](auto xs) { return connection_at(M, xs).gamma; }, x);
  auto G = [&](std::size_t k, std::size_t i, std::size_t j) -> const S& { return jet.value[(k * m + i) * m + j]; };
  auto dG = [&](std::size_t c, std::size_t k, std::size_t i, std::size_t j) -> const S& {
    return jet.d[c][(k * m + i) * m + j];
  };
  Curvature<S> R;
  R.m = m;
  R.r.assign(m * m * m * m, S(0.0));
  for (std::size_t l = 0; l < m; ++l)
    for (std::size_t k = 0; k < m; ++k)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
          S p(0.0), q(0.0);
          for (std::size_t n = 0; n < m; ++n) {
            p += G(l, i, n) * G(n, j, k);
            q += G(l, j, n) * G(n, i, k);
          }
          S v = (dG(i, l, j, k) - dG(j, l, i, k)) + (p - q);
          R.r[((l * m + k) * m + i) * m + j] = v;
          R.r[((l * m + k) * m + j) * m + i] = -v;
        }
  return R;
}

/// Ric_{jk} = sum_l R^l_{k l j}, i.e. Ric(X,Y) = Ric_{jk} X^j Y^k.
template <class S>
Matrix<S> ricci_coordinates(const Curvature<S>& R) {
  const std::size_t m = R.m;
  Matrix<S> ric(m, m);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < m; ++k) {
      S acc(0.0);
      for (std::size_t l = 0; l < m; ++l) acc += R(l, k, l, j);
      ric(j, k) = acc;
    }
  return ric;
}

/// Contravariant gradient g^{ij} d_j f.
template <class S>
std::vector<S> gradient_at(const ScalarFieldExpr& f, const Matrix<S>& ginv, std::span<const S> x) {
  auto jet = flat_partials<S>([&](auto xs) { return std::vector{eval(*f.ast, xs)}; }, x);
  std::vector<S> df(x.size());
  for (std::size_t c = 0; c < x.size(); ++c) df[c] = jet.d[c][0];
  return ginv * df;
}

// ------------------------------------------------------------------- frames

struct Frame {
  std::vector<TangentVector> vectors;
  Matrix<double> gram;
};

/// Modified Gram-Schmidt in the g inner product, two passes, input order, no pivoting.
inline std::vector<std::vector<double>> gram_schmidt(const Matrix<double>& g, const std::vector<std::vector<double>>& in,
                                                     double dep_tol = 1e-10) {
  std::vector<std::vector<double>> out;
  for (std::size_t a = 0; a < in.size(); ++a) {
    std::vector<double> v = in[a];
    double n0 = std::sqrt(std::max(inner(g, v, v), 0.0));
    if (!(n0 > 0.0)) throw std::domain_error("dependent input: vector " + std::to_string(a) + " is zero");
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& e : out) {
        double c = inner(g, v, e);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * e[i];
      }
    double n = std::sqrt(std::max(inner(g, v, v), 0.0));
    if (n <= dep_tol * n0) throw std::domain_error("dependent input: vector " + std::to_string(a));
    for (auto& x : v) x /= n;
    out.push_back(std::move(v));
  }
  return out;
}

inline Matrix<double> gram_matrix(const Matrix<double>& g, const std::vector<std::vector<double>>& vs) {
  Matrix<double> gr(vs.size(), vs.size());
  for (std::size_t a = 0; a < vs.size(); ++a)
    for (std::size_t b = 0; b < vs.size(); ++b) gr(a, b) = inner(g, vs[a], vs[b]);
  return gr;
}

// --------------------------------------------------------------- operations

/// Domain, symmetry and positive-definiteness checks for a sample point.
inline Matrix<double> metric_matrix(const ChartManifold& M, const Point& p) {
  if (p.dim() != M.dim) throw std::invalid_argument("point dimension differs from chart dimension");
  if (!M.in_domain(p.span())) throw OutsideDomain("point " + format_point(p.span()) + " outside chart domain");
  Matrix<double> g(M.dim, M.dim);
  double scale = 0.0;
  for (std::size_t i = 0; i < M.dim; ++i)
    for (std::size_t j = 0; j < M.dim; ++j) {
      g(i, j) = eval<double>(*M.metric[i][j], p.span());
      scale = std::max(scale, std::abs(g(i, j)));
    }
  for (std::size_t i = 0; i < M.dim; ++i)
    for (std::size_t j = i + 1; j < M.dim; ++j)
      if (std::abs(g(i, j) - g(j, i)) > 1e-12 * std::max(1.0, scale))
        throw DegenerateMetric("metric not symmetric at " + format_point(p.span()));
  try {
    (void)spd_inverse(g);
  } catch (const NotPositiveDefinite& e) {
    throw DegenerateMetric("degenerate metric at " + format_point(p.span()) + ": " + e.what());
  }
  return metric_at<double>(M, p.span());
}

inline Connection<double> christoffel_symbols(const ChartManifold& M, const Point& p) {
  (void)metric_matrix(M, p);
  return connection_at<double>(M, p.span());
}

inline Frame orthonormalize(const ChartManifold& M, const Point& p, const std::vector<TangentVector>& vectors) {
  Matrix<double> g = metric_matrix(M, p);
  std::vector<std::vector<double>> in;
  for (const auto& v : vectors) in.push_back(v.components);
  auto out = gram_schmidt(g, in);
  Frame f;
  for (auto& v : out) f.vectors.push_back({v, p});
  f.gram = gram_matrix(g, out);
  return f;
}

inline Frame coordinate_frame(const ChartManifold& M, const Point& p) {
  std::vector<TangentVector> seed;
  for (std::size_t i = 0; i < M.dim; ++i) {
    std::vector<double> e(M.dim, 0.0);
    e[i] = 1.0;
    seed.push_back({e, p});
  }
  return orthonormalize(M, p, seed);
}

/// (D_X Y)^k = X^i d_i Y^k + Gamma^k_ij X^i Y^j
template <class S>
std::vector<S> covariant_derivative_at(const ChartManifold& M, const VectorFieldSpec& X, const VectorFieldSpec& Y,
                                       std::span<const S> x) {
  auto c = connection_at<S>(M, x);
  auto xv = eval_field(X, x);
  auto yv = eval_field(Y, x);
  return field_derivative<S>(Y, x, xv) + c.apply(xv, yv);
}

inline TangentVector covariant_derivative(const ChartManifold& M, const VectorFieldSpec& X, const VectorFieldSpec& Y,
                                          const Point& p) {
  (void)metric_matrix(M, p);
  return {covariant_derivative_at<double>(M, X, Y, p.span()), p};
}

/// Field-level R(X,Y)Z = D_X D_Y Z - D_Y D_X Z - D_[X,Y] Z.
inline TangentVector riemann_tensor(const ChartManifold& M, const VectorFieldSpec& X, const VectorFieldSpec& Y,
                                    const VectorFieldSpec& Z, const Point& p) {
  (void)metric_matrix(M, p);
  auto x = p.span();
  auto xv = eval_field<double>(X, x);
  auto yv = eval_field<double>(Y, x);
  auto c = connection_at<double>(M, x);
  auto nabla = [&](const VectorFieldSpec& A, const VectorFieldSpec& B, const std::vector<double>& av) {
    // D_A (D_B Z) at x
    auto inner_field = [&](auto xs) { return covariant_derivative_at(M, B, Z, xs); };
    auto dv = flat_directional<double>(inner_field, x, av);
    auto w = covariant_derivative_at<double>(M, B, Z, x);
    (void)A;
    return dv + c.apply(av, w);
  };
  auto xy = nabla(X, Y, xv);
  auto yx = nabla(Y, X, yv);
  auto br = lie_bracket_at<double>(X, Y, x);
  auto dz = field_derivative<double>(Z, x, br);
  auto zv = eval_field<double>(Z, x);
  auto corr = dz + c.apply(br, zv);
  return {(xy - yx) - corr, p};
}

/// Sum over an orthonormal frame of g(R(e_a, X)Y, e_a), from the coordinate curvature tensor.
inline double ricci_at(const Matrix<double>& g, const Curvature<double>& R, const std::vector<std::vector<double>>& frame,
                       const std::vector<double>& X, const std::vector<double>& Y) {
  double s = 0.0;
  for (const auto& e : frame) s += inner(g, R.apply(e, X, Y), e);
  return s;
}

inline double ricci(const ChartManifold& M, const VectorFieldSpec& X, const VectorFieldSpec& Y, const Point& p) {
  auto g = metric_matrix(M, p);
  auto R = curvature_at<double>(M, p.span());
  std::vector<std::vector<double>> frame;
  for (auto& v : coordinate_frame(M, p).vectors) frame.push_back(v.components);
  return ricci_at(g, R, frame, eval_field<double>(X, p.span()), eval_field<double>(Y, p.span()));
}

inline double scalar_curvature(const ChartManifold& M, const Point& p, const std::vector<TangentVector>& seed = {}) {
  auto g = metric_matrix(M, p);
  auto R = curvature_at<double>(M, p.span());
  Frame f = seed.empty() ? coordinate_frame(M, p) : orthonormalize(M, p, seed);
  std::vector<std::vector<double>> frame;
  for (auto& v : f.vectors) frame.push_back(v.components);
  double s = 0.0;
  for (const auto& e : frame) s += ricci_at(g, R, frame, e, e);
  return s;
}

inline TangentVector gradient(const ChartManifold& M, const ScalarFieldExpr& f, const Point& p) {
  auto g = metric_matrix(M, p);
  return {gradient_at<double>(f, spd_inverse(g), p.span()), p};
}

/// Sum over an orthonormal frame of g(D_{e_a} X, e_a).
inline double divergence(const ChartManifold& M, const VectorFieldSpec& X, const Point& p) {
  auto g = metric_matrix(M, p);
  auto c = connection_at<double>(M, p.span());
  auto xv = eval_field<double>(X, p.span());
  double s = 0.0;
  for (auto& e : coordinate_frame(M, p).vectors) {
    auto d = field_derivative<double>(X, p.span(), e.components) + c.apply(e.components, xv);
    s += inner(g, d, e.components);
  }
  return s;
}

/// D_v grad f at x.
inline std::vector<double> hessian_operator(const ChartManifold& M, const ScalarFieldExpr& f, std::span<const double> x,
                                            const std::vector<double>& v) {
  auto c = connection_at<double>(M, x);
  auto gradf = [&](auto xs) {
    using S = typename decltype(xs)::value_type;
    auto g = metric_at(M, xs);
    return gradient_at<S>(f, spd_inverse(g), xs);
  };
  auto dv = flat_directional<double>(gradf, x, v);
  auto gv = gradient_at<double>(f, c.ginv, x);
  return dv + c.apply(v, gv);
}

inline double hessian(const ChartManifold& M, const ScalarFieldExpr& f, const VectorFieldSpec& X,
                      const VectorFieldSpec& Y, const Point& p) {
  auto g = metric_matrix(M, p);
  auto xv = eval_field<double>(X, p.span());
  auto yv = eval_field<double>(Y, p.span());
  return inner(g, hessian_operator(M, f, p.span(), xv), yv);
}

inline double laplacian(const ChartManifold& M, const ScalarFieldExpr& f, const Point& p) {
  auto g = metric_matrix(M, p);
  double s = 0.0;
  for (auto& e : coordinate_frame(M, p).vectors)
    s += inner(g, hessian_operator(M, f, p.span(), e.components), e.components);
  return s;
}

/// (L_xi g)(X,Y) = g(D_X xi, Y) + g(D_Y xi, X)
inline double lie_derivative_metric(const ChartManifold& M, const VectorFieldSpec& xi, const VectorFieldSpec& X,
                                    const VectorFieldSpec& Y, const Point& p) {
  auto g = metric_matrix(M, p);
  auto c = connection_at<double>(M, p.span());
  auto x = p.span();
  auto xv = eval_field<double>(X, x);
  auto yv = eval_field<double>(Y, x);
  auto zv = eval_field<double>(xi, x);
  auto dx = field_derivative<double>(xi, x, xv) + c.apply(xv, zv);
  auto dy = field_derivative<double>(xi, x, yv) + c.apply(yv, zv);
  return inner(g, dx, yv) + inner(g, dy, xv);
}

}  // namespace subgeo
