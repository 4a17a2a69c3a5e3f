#pragma once

// Points, tangent vectors, expression-backed fields and the jet entry points
// (directional derivatives, Jacobians, Lie brackets).

#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "expr.hpp"
#include "jet.hpp"
#include "linalg.hpp"

namespace subgeo {

struct Point {
  std::vector<double> coords;

  Point() = default;
  explicit Point(std::vector<double> c) : coords(std::move(c)) {
    for (double v : coords)
      if (!std::isfinite(v)) throw std::invalid_argument("point coordinate is not finite");
  }
  std::size_t dim() const { return coords.size(); }
  std::span<const double> span() const { return coords; }
};

struct TangentVector {
  std::vector<double> components;
  Point base;
};

struct ScalarFieldExpr {
  Expr ast;
  std::size_t arity = 0;
};

struct VectorFieldSpec {
  std::vector<Expr> components;
  std::size_t dim() const { return components.size(); }
};

inline ScalarFieldExpr scalar_field(std::string_view text, const std::vector<std::string>& coords) {
  return {parse_expression(text, coords), coords.size()};
}

inline VectorFieldSpec vector_field(const std::vector<std::string>& texts, const std::vector<std::string>& coords) {
  if (texts.size() != coords.size()) throw std::invalid_argument("vector field component count differs from chart dim");
  VectorFieldSpec v;
  for (const auto& t : texts) v.components.push_back(parse_expression(t, coords));
  return v;
}

inline VectorFieldSpec coordinate_field(std::size_t dim, std::size_t axis) {
  VectorFieldSpec v;
  for (std::size_t i = 0; i < dim; ++i) v.components.push_back(make_const(i == axis ? 1.0 : 0.0));
  return v;
}

inline VectorFieldSpec zero_field(std::size_t dim) {
  VectorFieldSpec v;
  for (std::size_t i = 0; i < dim; ++i) v.components.push_back(make_const(0.0));
  return v;
}

template <class S>
std::vector<S> eval_field(const VectorFieldSpec& f, std::span<const S> x) {
  std::vector<S> out;
  out.reserve(f.components.size());
  for (const auto& c : f.components) out.push_back(eval(*c, x));
  return out;
}

// ------------------------------------------------------------ flat jets

/// Value and per-axis first partials of a function returning a flat vector.
template <class S>
struct FlatJet {
  std::vector<S> value;
  std::vector<std::vector<S>> d;  // d[c][k] = d value[k] / d x^c
};

template <class S, class Fn>
FlatJet<S> flat_partials(Fn&& fn, std::span<const S> x) {
  FlatJet<S> out;
  out.d.resize(x.size());
  for (std::size_t c = 0; c < x.size(); ++c) {
    auto xs = seed_axis<S>(x, c);
    std::vector<Dual<S>> r = fn(std::span<const Dual<S>>(xs));
    if (c == 0) {
      out.value.resize(r.size());
      for (std::size_t k = 0; k < r.size(); ++k) out.value[k] = r[k].v;
    }
    out.d[c].resize(r.size());
    for (std::size_t k = 0; k < r.size(); ++k) out.d[c][k] = r[k].d;
  }
  if (x.empty()) {
    std::vector<Dual<S>> r = fn(std::span<const Dual<S>>());
    for (auto& v : r) out.value.push_back(v.v);
  }
  return out;
}

/// Derivative of a flat-vector function along one direction.
template <class S, class Fn>
std::vector<S> flat_directional(Fn&& fn, std::span<const S> x, std::span<const S> dir) {
  auto xs = seed<S>(x, dir);
  std::vector<Dual<S>> r = fn(std::span<const Dual<S>>(xs));
  std::vector<S> out(r.size());
  for (std::size_t k = 0; k < r.size(); ++k) out[k] = r[k].d;
  return out;
}

// ------------------------------------------------------------ operations

/// Value, first and second directional derivatives of a scalar field.
struct JetResult {
  double value = 0.0;
  std::map<std::size_t, double> first;                               // direction index
  std::map<std::pair<std::size_t, std::size_t>, double> second;       // symmetric storage
};

inline void check_point(const ScalarFieldExpr& f, const Point& p) {
  if (p.dim() != f.arity) throw std::invalid_argument("point dimension differs from field arity");
}

inline JetResult eval_with_derivatives(const ScalarFieldExpr& f, const Point& p,
                                       const std::vector<TangentVector>& dirs, int order) {
  check_point(f, p);
  if (order != 1 && order != 2) throw std::invalid_argument("order must be 1 or 2");
  for (const auto& d : dirs)
    if (d.components.size() != p.dim()) throw std::invalid_argument("direction dimension differs from point");
  JetResult r;
  r.value = eval<double>(*f.ast, p.span());
  for (std::size_t a = 0; a < dirs.size(); ++a) {
    auto xs = seed<double>(p.span(), dirs[a].components);
    r.first[a] = eval<Dual<double>>(*f.ast, xs).d;
  }
  if (order == 2) {
    for (std::size_t a = 0; a < dirs.size(); ++a)
      for (std::size_t b = a; b < dirs.size(); ++b) {
        std::vector<Dual<Dual<double>>> xs(p.dim());
        for (std::size_t i = 0; i < p.dim(); ++i)
          xs[i] = Dual<Dual<double>>(Dual<double>(p.coords[i], dirs[b].components[i]),
                                     Dual<double>(dirs[a].components[i], 0.0));
        double v = eval<Dual<Dual<double>>>(*f.ast, xs).d.d;
        r.second[{a, b}] = v;
        r.second[{b, a}] = v;
      }
  }
  return r;
}

/// Rows are map components, columns coordinates.
template <class S>
Matrix<S> jacobian_of(const std::vector<Expr>& comps, std::span<const S> x) {
  Matrix<S> j(comps.size(), x.size());
  for (std::size_t c = 0; c < x.size(); ++c) {
    auto xs = seed_axis<S>(x, c);
    for (std::size_t a = 0; a < comps.size(); ++a)
      j(a, c) = eval<Dual<S>>(*comps[a], std::span<const Dual<S>>(xs)).d;
  }
  return j;
}

inline Matrix<double> jacobian(const std::vector<ScalarFieldExpr>& map, const Point& p) {
  std::vector<Expr> comps;
  for (const auto& f : map) {
    check_point(f, p);
    comps.push_back(f.ast);
  }
  return jacobian_of<double>(comps, p.span());
}

/// Coordinate derivative D_v of a vector field at x.
template <class S>
std::vector<S> field_derivative(const VectorFieldSpec& f, std::span<const S> x, std::span<const S> v) {
  return flat_directional<S>([&](auto xs) { return eval_field(f, xs); }, x, v);
}

template <class S>
std::vector<S> lie_bracket_at(const VectorFieldSpec& X, const VectorFieldSpec& Y, std::span<const S> x) {
  auto xv = eval_field(X, x);
  auto yv = eval_field(Y, x);
  auto dy = field_derivative<S>(Y, x, xv);
  auto dx = field_derivative<S>(X, x, yv);
  return dy - dx;
}

inline TangentVector lie_bracket(const VectorFieldSpec& X, const VectorFieldSpec& Y, const Point& p) {
  if (X.dim() != p.dim() || Y.dim() != p.dim()) throw std::invalid_argument("field dimension differs from point");
  return {lie_bracket_at<double>(X, Y, p.span()), p};
}

}  // namespace subgeo
