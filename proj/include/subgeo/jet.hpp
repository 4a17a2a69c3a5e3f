#pragma once

/**
 * @file jet.hpp
 * @brief Nested truncated-Taylor scalars (dual numbers of dual numbers).
 *
 * A Dual<T> carries a value and one directional derivative, both of kind T.
 * Nesting Dual<Dual<double>> yields mixed second derivatives along two
 * independently seeded directions, Dual<Dual<Dual<double>>> third ones, and
 * so on. Every arithmetic rule is exact, so derivatives carry no truncation
 * error, only rounding.
 */

#include <cmath>
#include <concepts>
#include <span>
#include <type_traits>
#include <vector>

namespace subgeo {

template <class T>
struct Dual {
  T v{};  ///< value
  T d{};  ///< derivative along the seeded direction

  constexpr Dual() = default;
  constexpr Dual(const T& value) : v(value), d() {}
  constexpr Dual(const T& value, const T& deriv) : v(value), d(deriv) {}
  template <std::floating_point F>
    requires(!std::same_as<T, F>)
  constexpr Dual(F c) : v(c), d() {}

  constexpr Dual& operator+=(const Dual& o) {
    v += o.v;
    d += o.d;
    return *this;
  }
  constexpr Dual& operator-=(const Dual& o) {
    v -= o.v;
    d -= o.d;
    return *this;
  }
  constexpr Dual& operator*=(const Dual& o) {
    d = v * o.d + d * o.v;
    v *= o.v;
    return *this;
  }
  constexpr Dual& operator/=(const Dual& o) {
    *this = *this / o;
    return *this;
  }

  friend constexpr Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.d + b.d}; }
  friend constexpr Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d - b.d}; }
  friend constexpr Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
  friend constexpr Dual operator*(const Dual& a, const Dual& b) {
    return {a.v * b.v, a.v * b.d + a.d * b.v};
  }
  friend constexpr Dual operator/(const Dual& a, const Dual& b) {
    T q = a.v / b.v;
    return {q, (a.d - q * b.d) / b.v};
  }
};

template <class T>
struct is_dual : std::false_type {};
template <class T>
struct is_dual<Dual<T>> : std::true_type {};

/// Nesting depth: 0 for double, 1 for Dual<double>, ...
template <class T>
struct jet_depth : std::integral_constant<int, 0> {};
template <class T>
struct jet_depth<Dual<T>> : std::integral_constant<int, 1 + jet_depth<T>::value> {};

inline constexpr double primal(double x) { return x; }
template <class T>
constexpr double primal(const Dual<T>& x) {
  return primal(x.v);
}

using std::cos;
using std::exp;
using std::log;
using std::pow;
using std::sin;
using std::sqrt;

template <class T>
Dual<T> exp(const Dual<T>& x) {
  T e = exp(x.v);
  return {e, e * x.d};
}

template <class T>
Dual<T> log(const Dual<T>& x) {
  return {log(x.v), x.d / x.v};
}

template <class T>
Dual<T> sin(const Dual<T>& x) {
  return {sin(x.v), cos(x.v) * x.d};
}

template <class T>
Dual<T> cos(const Dual<T>& x) {
  return {cos(x.v), -sin(x.v) * x.d};
}

template <class T>
Dual<T> sqrt(const Dual<T>& x) {
  T r = sqrt(x.v);
  return {r, x.d / (2.0 * r)};
}

/// x^r for a constant real exponent. An exponent of exactly zero returns the
/// constant 1, which keeps integer powers finite at x = 0 under any nesting.
template <class T>
Dual<T> pow(const Dual<T>& x, double r) {
  if (r == 0.0) return Dual<T>(1.0);
  return {pow(x.v, r), r * pow(x.v, r - 1.0) * x.d};
}

/// Value and first-order part of a jet one level down.
template <class T>
struct Split {
  T value;
  T tangent;
};

template <class T>
Split<T> split(const Dual<T>& x) {
  return {x.v, x.d};
}

template <class T>
Split<std::vector<T>> split(const std::vector<Dual<T>>& xs) {
  Split<std::vector<T>> out{std::vector<T>(xs.size()), std::vector<T>(xs.size())};
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out.value[i] = xs[i].v;
    out.tangent[i] = xs[i].d;
  }
  return out;
}

/// Seeds x + eps * dir one nesting level up.
template <class S>
std::vector<Dual<S>> seed(std::span<const S> x, std::span<const S> dir) {
  std::vector<Dual<S>> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = Dual<S>(x[i], dir[i]);
  return out;
}

template <class S>
std::vector<Dual<S>> seed_axis(std::span<const S> x, std::size_t axis) {
  std::vector<Dual<S>> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = Dual<S>(x[i], i == axis ? S(1.0) : S(0.0));
  return out;
}

template <class S>
std::vector<Dual<S>> lift(std::span<const S> x) {
  std::vector<Dual<S>> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = Dual<S>(x[i]);
  return out;
}

/// Derivative of fn (scalar- or vector-valued, generic in its scalar kind)
/// at x along dir. Returns {value, derivative}.
template <class S, class Fn>
auto directional(Fn&& fn, std::span<const S> x, std::span<const S> dir) {
  auto xs = seed<S>(x, dir);
  return split(fn(std::span<const Dual<S>>(xs)));
}

/// Coordinate partials of fn at x: element c is d fn / d x^c.
template <class S, class Fn>
auto partials(Fn&& fn, std::span<const S> x) {
  using Result = decltype(split(fn(std::span<const Dual<S>>{})).tangent);
  std::vector<Result> out;
  out.reserve(x.size());
  for (std::size_t c = 0; c < x.size(); ++c) {
    auto xs = seed_axis<S>(x, c);
    out.push_back(split(fn(std::span<const Dual<S>>(xs))).tangent);
  }
  return out;
}

}  // namespace subgeo
