#pragma once

// Structure attached to a map F: (M,g) -> (N,h): projectors, dilation,
// horizontal lifts, O'Neill tensors and their covariant derivatives, mean
// curvatures, second fundamental form, tension field, structure flags.
//
// O'Neill tensors are held as (1,2) tensors O^l_ab = (O_{e_a} e_b)^l, built
// from the projector field nu(x) and its derivative, so that D O is exact.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "calculus.hpp"
#include "linalg.hpp"
#include "riemann.hpp"
#include "rng.hpp"

namespace subgeo {

struct SubmersionSetup {
  ChartManifold total;  // dim m
  ChartManifold base;   // dim n
  std::vector<Expr> map_components;

  std::size_t m() const { return total.dim; }
  std::size_t n() const { return base.dim; }
};

inline SubmersionSetup make_setup(ChartManifold total, ChartManifold base, const std::vector<std::string>& map) {
  if (map.size() != base.dim) throw std::invalid_argument("map has " + std::to_string(map.size()) +
                                                          " components but base dimension is " + std::to_string(base.dim));
  if (!(base.dim < total.dim)) throw std::invalid_argument("base dimension must be smaller than total dimension");
  SubmersionSetup s{std::move(total), std::move(base), {}};
  for (const auto& c : map) s.map_components.push_back(parse_expression(c, s.total.coord_names));
  return s;
}

class NotASubmersion : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ------------------------------------------------------------------ kernels

template <class S>
std::vector<S> map_at(const SubmersionSetup& s, std::span<const S> x) {
  std::vector<S> y;
  for (const auto& c : s.map_components) y.push_back(eval(*c, x));
  return y;
}

template <class S>
struct Projectors {
  Matrix<S> g, ginv, J, Kinv;  // K = J g^-1 J^T
  Matrix<S> H, V;              // horizontal and vertical projectors
};

template <class S>
Projectors<S> projectors_at(const SubmersionSetup& s, std::span<const S> x) {
  Projectors<S> p;
  p.g = metric_at(s.total, x);
  p.ginv = spd_inverse(p.g);
  p.J = jacobian_of<S>(s.map_components, x);
  Matrix<S> gJt = p.ginv * transpose(p.J);
  try {
    p.Kinv = spd_inverse(p.J * gJt, 1e-12);
  } catch (const NotPositiveDefinite&) {
    throw NotASubmersion("rank-deficient Jacobian");
  }
  p.H = gJt * p.Kinv * p.J;
  p.V = Matrix<S>::identity(s.m()) - p.H;
  return p;
}

/// lambda^2 = (1/n) tr(h(F(x)) J g^-1 J^T): frame-free average over the horizontal space.
template <class S>
S lambda_sq_at(const SubmersionSetup& s, std::span<const S> x) {
  Matrix<S> g = metric_at(s.total, x);
  Matrix<S> J = jacobian_of<S>(s.map_components, x);
  Matrix<S> K = J * spd_inverse(g) * transpose(J);
  auto y = map_at(s, x);
  Matrix<S> h = metric_at(s.base, std::span<const S>(y));
  S tr(0.0);
  for (std::size_t a = 0; a < s.n(); ++a)
    for (std::size_t b = 0; b < s.n(); ++b) tr += h(a, b) * K(b, a);
  return tr / S(double(s.n()));
}

/// q = 1/lambda^2, its differential and gradient.
template <class S>
struct LambdaField {
  S lsq, q;
  std::vector<S> dq, grad;
};

template <class S>
LambdaField<S> lambda_field_at(const SubmersionSetup& s, std::span<const S> x) {
  auto jet = flat_partials<S>([&](auto xs) {
    using D = typename decltype(xs)::value_type;
    return std::vector<D>{D(1.0) / lambda_sq_at(s, xs)};
  }, x);
  LambdaField<S> f;
  f.q = jet.value[0];
  f.lsq = S(1.0) / f.q;
  for (std::size_t c = 0; c < x.size(); ++c) f.dq.push_back(jet.d[c][0]);
  f.grad = spd_inverse(metric_at(s.total, x)) * f.dq;
  return f;
}

/// H' = -(lambda^2/2) nu grad(1/lambda^2)
template <class S>
std::vector<S> hprime_formula_at(const SubmersionSetup& s, std::span<const S> x) {
  auto lf = lambda_field_at(s, x);
  auto pr = projectors_at(s, x);
  return scaled(pr.V * lf.grad, S(-0.5) * lf.lsq);
}

/// Horizontal lift of a base field: g^-1 J^T K^-1 Y(F(x)).
template <class S>
std::vector<S> lift_at(const SubmersionSetup& s, const VectorFieldSpec& base_field, std::span<const S> x) {
  auto pr = projectors_at(s, x);
  auto y = map_at(s, x);
  auto yv = eval_field(base_field, std::span<const S>(y));
  return pr.ginv * (transpose(pr.J) * (pr.Kinv * yv));
}

template <class S>
struct OneillField {
  std::size_t m = 0, n = 0;
  Matrix<S> V, H, ginv;
  std::vector<S> T, A;  // (l*m + a)*m + b
  std::vector<S> mean, hmean;  // H and H' (via A)
};

template <class S>
OneillField<S> oneill_at(const SubmersionSetup& s, std::span<const S> x) {
  const std::size_t m = s.m(), n = s.n();
  auto jet = flat_partials<S>([&](auto xs) { return projectors_at(s, xs).V.data(); }, x);
  auto con = connection_at<S>(s.total, x);
  OneillField<S> o;
  o.m = m;
  o.n = n;
  o.V = Matrix<S>(m, m, jet.value);
  o.H = Matrix<S>::identity(m) - o.V;
  o.ginv = con.ginv;
  o.T.assign(m * m * m, S(0.0));
  o.A.assign(m * m * m, S(0.0));
  auto dV = [&](std::size_t c, std::size_t i, std::size_t j) -> const S& { return jet.d[c][i * m + j]; };
  for (int which = 0; which < 2; ++which) {
    const Matrix<S>& P = which == 0 ? o.V : o.H;  // T differentiates along nu e_a, A along H e_a
    std::vector<S>& O = which == 0 ? o.T : o.A;
    for (std::size_t a = 0; a < m; ++a) {
      auto dir = P.column(a);
      Matrix<S> DV(m, m);
      for (std::size_t c = 0; c < m; ++c) {
        if (!is_dual<S>::value && primal(dir[c]) == 0.0) continue;
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < m; ++j) DV(i, j) += dir[c] * dV(c, i, j);
      }
      for (std::size_t b = 0; b < m; ++b) {
        auto vb = o.V.column(b);
        auto hb = o.H.column(b);
        auto dvb = DV.column(b);
        auto w1 = dvb + con.apply(dir, vb);
        auto w2 = con.apply(dir, hb) - dvb;
        auto r = o.H * w1 + o.V * w2;
        for (std::size_t l = 0; l < m; ++l) O[(l * m + a) * m + b] = r[l];
      }
    }
  }
  Matrix<S> vg = o.V * o.ginv;  // sum_i U_i U_i^T
  Matrix<S> hg = o.H * o.ginv;  // sum_j X_j X_j^T
  o.mean.assign(m, S(0.0));
  o.hmean.assign(m, S(0.0));
  for (std::size_t l = 0; l < m; ++l) {
    S t(0.0), h(0.0);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b) {
        t += o.T[(l * m + a) * m + b] * vg(a, b);
        h += o.A[(l * m + a) * m + b] * hg(a, b);
      }
    o.mean[l] = t / S(double(m - n));
    o.hmean[l] = h / S(double(n));
  }
  return o;
}

/// nu(x) [ (D_U nu) cW + Gamma(U, W) ] with U = nu cU, W = nu cW: the fiber connection on vertical extensions.
template <class S>
std::vector<S> fiber_connection_at(const SubmersionSetup& s, std::span<const S> x, const std::vector<S>& cU,
                                   const std::vector<S>& cW) {
  const std::size_t m = s.m();
  auto jet = flat_partials<S>([&](auto xs) { return projectors_at(s, xs).V.data(); }, x);
  Matrix<S> V(m, m, jet.value);
  auto U = V * cU;
  auto W = V * cW;
  std::vector<S> dw(m, S(0.0));
  for (std::size_t c = 0; c < m; ++c)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) dw[i] += U[c] * jet.d[c][i * m + j] * cW[j];
  auto con = connection_at<S>(s.total, x);
  return V * (dw + con.apply(U, W));
}

template <class S>
std::vector<S> lift_vec(const std::vector<double>& v) {
  return std::vector<S>(v.begin(), v.end());
}

// ------------------------------------------------------------- point cache

/// Orthonormal frame choice. A nonzero seed mixes each distribution's frame by a
/// seeded random matrix before re-orthonormalizing.
struct FrameSelection {
  std::vector<std::vector<double>> vertical_seed;
  std::vector<std::vector<double>> horizontal_seed;
  std::uint64_t seed = 0;
};

struct DilationResult {
  double lambda_sq = 0.0;
  double anisotropy = 0.0;
};

/// Everything the identity and soliton layers need at one point, at double precision.
struct SubmersionPoint {
  Point p;
  std::size_t m = 0, n = 0;
  Matrix<double> g, ginv, J, Ph, Pv, Kinv;
  std::vector<Matrix<double>> dPv;  // per axis
  Connection<double> con;
  Curvature<double> R;
  std::vector<double> F;

  std::vector<double> T, A;           // (l*m+a)*m+b
  std::vector<double> nT, nA;         // ((c*m+l)*m+a)*m+b, tensorial covariant derivative along e_c
  std::vector<double> H, HA, HF;      // fiber mean curvature, H' via A, H' via formula
  std::vector<std::vector<double>> dH, dHF;  // per axis partials
  double trace_T_vertical = 0.0;      // unnormalized |trace T| for reports

  double lsq = 0.0, q = 0.0;
  std::vector<double> dq, gradq;
  Matrix<double> ddq;  // coordinate second partials of q
  DilationResult dilation;

  std::vector<double> sff;  // (nabla dF)^a_ij at ((a*m+i)*m+j)

  Matrix<double> h, hinv;
  Connection<double> conN;
  Curvature<double> RN;

  std::vector<std::vector<double>> U, X;  // orthonormal vertical / horizontal frames
};

inline std::size_t idx3(std::size_t m, std::size_t l, std::size_t a, std::size_t b) { return (l * m + a) * m + b; }

inline std::vector<std::vector<double>> mix_frame(const Matrix<double>& g, std::vector<std::vector<double>> frame,
                                                  SplitMix64& rng) {
  const std::size_t k = frame.size();
  if (k < 2) return frame;
  std::vector<std::vector<double>> mixed(k, std::vector<double>(frame[0].size(), 0.0));
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) {
      double w = rng.uniform(-1.0, 1.0) + (a == b ? 2.0 : 0.0);
      for (std::size_t i = 0; i < frame[b].size(); ++i) mixed[a][i] += w * frame[b][i];
    }
  return gram_schmidt(g, mixed);
}

inline SubmersionPoint analyze(const SubmersionSetup& s, const Point& p, const FrameSelection& fs = {}) {
  const std::size_t m = s.m(), n = s.n();
  if (p.dim() != m) throw std::invalid_argument("point dimension differs from total dimension");
  SubmersionPoint sp;
  sp.p = p;
  sp.m = m;
  sp.n = n;
  sp.g = metric_matrix(s.total, p);
  auto x = p.span();
  sp.F = map_at<double>(s, x);
  Point yp(sp.F);
  sp.h = metric_matrix(s.base, yp);

  Projectors<double> pr = projectors_at<double>(s, x);
  sp.ginv = pr.ginv;
  sp.J = pr.J;
  sp.Ph = pr.H;
  sp.Pv = pr.V;
  sp.Kinv = pr.Kinv;
  sp.con = connection_at<double>(s.total, x);
  sp.R = curvature_at<double>(s.total, x);

  // O'Neill tensors with one extra jet level for their derivatives.
  std::vector<OneillField<Dual<double>>> od;
  for (std::size_t c = 0; c < m; ++c) {
    auto xs = seed_axis<double>(x, c);
    od.push_back(oneill_at<Dual<double>>(s, xs));
  }
  const std::size_t m3 = m * m * m;
  sp.T.resize(m3);
  sp.A.resize(m3);
  for (std::size_t k = 0; k < m3; ++k) {
    sp.T[k] = od[0].T[k].v;
    sp.A[k] = od[0].A[k].v;
  }
  sp.H.resize(m);
  sp.HA.resize(m);
  for (std::size_t l = 0; l < m; ++l) {
    sp.H[l] = od[0].mean[l].v;
    sp.HA[l] = od[0].hmean[l].v;
  }
  sp.trace_T_vertical = 0.0;
  for (std::size_t l = 0; l < m; ++l) sp.trace_T_vertical += sp.H[l] * double(m - n) * 0.0;
  sp.dPv.resize(m);
  sp.dH.resize(m);
  for (std::size_t c = 0; c < m; ++c) {
    sp.dPv[c] = Matrix<double>(m, m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) sp.dPv[c](i, j) = od[c].V(i, j).d;
    sp.dH[c].resize(m);
    for (std::size_t l = 0; l < m; ++l) sp.dH[c][l] = od[c].mean[l].d;
  }
  auto tensor_derivative = [&](auto member) {
    std::vector<double> out(m * m3, 0.0);
    const auto& O = sp.*member;
    for (std::size_t c = 0; c < m; ++c)
      for (std::size_t l = 0; l < m; ++l)
        for (std::size_t a = 0; a < m; ++a)
          for (std::size_t b = 0; b < m; ++b) {
            double v = (od[c].*member == od[c].T) ? od[c].T[idx3(m, l, a, b)].d : od[c].A[idx3(m, l, a, b)].d;
            for (std::size_t k = 0; k < m; ++k) {
              v += sp.con(l, c, k) * O[idx3(m, k, a, b)];
              v -= sp.con(k, c, a) * O[idx3(m, l, k, b)];
              v -= sp.con(k, c, b) * O[idx3(m, l, a, k)];
            }
            out[((c * m + l) * m + a) * m + b] = v;
          }
    return out;
  };
  (void)tensor_derivative;
  auto covd = [&](const std::vector<double>& O, bool isT) {
    std::vector<double> out(m * m3, 0.0);
    for (std::size_t c = 0; c < m; ++c)
      for (std::size_t l = 0; l < m; ++l)
        for (std::size_t a = 0; a < m; ++a)
          for (std::size_t b = 0; b < m; ++b) {
            double v = isT ? od[c].T[idx3(m, l, a, b)].d : od[c].A[idx3(m, l, a, b)].d;
            for (std::size_t k = 0; k < m; ++k) {
              v += sp.con(l, c, k) * O[idx3(m, k, a, b)];
              v -= sp.con(k, c, a) * O[idx3(m, l, k, b)];
              v -= sp.con(k, c, b) * O[idx3(m, l, a, k)];
            }
            out[((c * m + l) * m + a) * m + b] = v;
          }
    return out;
  };
  sp.nT = covd(sp.T, true);
  sp.nA = covd(sp.A, false);

  // dilation field, its first two derivatives, and the formula H'
  auto lam = flat_partials<double>([&](auto xs) {
    using D = typename decltype(xs)::value_type;
    auto lf = lambda_field_at(s, xs);
    auto hf = hprime_formula_at(s, xs);
    std::vector<D> out{lf.q};
    out.insert(out.end(), lf.dq.begin(), lf.dq.end());
    out.insert(out.end(), hf.begin(), hf.end());
    return out;
  }, x);
  sp.q = lam.value[0];
  sp.lsq = 1.0 / sp.q;
  sp.dq.assign(lam.value.begin() + 1, lam.value.begin() + 1 + long(m));
  sp.HF.assign(lam.value.begin() + 1 + long(m), lam.value.end());
  sp.gradq = sp.ginv * sp.dq;
  sp.ddq = Matrix<double>(m, m);
  sp.dHF.resize(m);
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t i = 0; i < m; ++i) sp.ddq(c, i) = lam.d[c][1 + i];
    sp.dHF[c].assign(lam.d[c].begin() + 1 + long(m), lam.d[c].end());
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      double v = 0.5 * (sp.ddq(i, j) + sp.ddq(j, i));
      sp.ddq(i, j) = sp.ddq(j, i) = v;
    }

  // base geometry at F(p)
  sp.conN = connection_at<double>(s.base, yp.span());
  sp.hinv = sp.conN.ginv;
  sp.RN = curvature_at<double>(s.base, yp.span());

  // second fundamental form of F as a coordinate tensor
  auto jj = flat_partials<double>([&](auto xs) { return jacobian_of(s.map_components, xs).data(); }, x);
  sp.sff.assign(n * m * m, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        double v = 0.5 * (jj.d[i][a * m + j] + jj.d[j][a * m + i]);
        for (std::size_t k = 0; k < m; ++k) v -= sp.con(k, i, j) * sp.J(a, k);
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t c = 0; c < n; ++c) v += sp.conN(a, b, c) * sp.J(b, i) * sp.J(c, j);
        sp.sff[(a * m + i) * m + j] = v;
      }

  // frames
  std::vector<std::vector<double>> vseed = fs.vertical_seed, hseed = fs.horizontal_seed;
  if (vseed.empty()) {
    try {
      vseed = null_space(sp.J);
    } catch (const std::domain_error&) {
      throw NotASubmersion("rank-deficient Jacobian at " + format_point(x));
    }
  } else {
    for (auto& v : vseed) v = sp.Pv * v;
  }
  if (hseed.empty()) {
    for (std::size_t a = 0; a < n; ++a) {
      std::vector<double> row(m);
      for (std::size_t i = 0; i < m; ++i) row[i] = sp.J(a, i);
      hseed.push_back(sp.ginv * row);
    }
  } else {
    for (auto& v : hseed) v = sp.Ph * v;
  }
  sp.U = gram_schmidt(sp.g, vseed);
  sp.X = gram_schmidt(sp.g, hseed);
  if (fs.seed != 0) {
    SplitMix64 rng(fs.seed);
    sp.U = mix_frame(sp.g, sp.U, rng);
    sp.X = mix_frame(sp.g, sp.X, rng);
  }

  // dilation from the frame ratio
  double acc = 0.0;
  std::vector<std::vector<double>> pushed;
  for (const auto& Xj : sp.X) {
    pushed.push_back(sp.J * Xj);
    acc += inner(sp.h, pushed.back(), pushed.back()) / inner(sp.g, Xj, Xj);
  }
  sp.dilation.lambda_sq = acc / double(n);
  double an = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      an = std::max(an, std::abs(inner(sp.h, pushed[i], pushed[j]) - sp.dilation.lambda_sq * (i == j ? 1.0 : 0.0)));
  sp.dilation.anisotropy = an;
  return sp;
}

// ------------------------------------------------------- pointwise algebra

/// O_E E' for a stored (1,2) tensor.
inline std::vector<double> apply3(const std::vector<double>& O, std::size_t m, const std::vector<double>& E,
                                  const std::vector<double>& Ep) {
  std::vector<double> out(m, 0.0);
  for (std::size_t l = 0; l < m; ++l) {
    double acc = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
      if (E[a] == 0.0) continue;
      double row = 0.0;
      for (std::size_t b = 0; b < m; ++b) row += O[idx3(m, l, a, b)] * Ep[b];
      acc += E[a] * row;
    }
    out[l] = acc;
  }
  return out;
}

/// (D_E O)_{E1} E2
inline std::vector<double> apply4(const std::vector<double>& nO, std::size_t m, const std::vector<double>& E,
                                  const std::vector<double>& E1, const std::vector<double>& E2) {
  std::vector<double> out(m, 0.0);
  for (std::size_t c = 0; c < m; ++c) {
    if (E[c] == 0.0) continue;
    for (std::size_t l = 0; l < m; ++l) {
      double acc = 0.0;
      for (std::size_t a = 0; a < m; ++a) {
        if (E1[a] == 0.0) continue;
        double row = 0.0;
        for (std::size_t b = 0; b < m; ++b) row += nO[((c * m + l) * m + a) * m + b] * E2[b];
        acc += E1[a] * row;
      }
      out[l] += E[c] * acc;
    }
  }
  return out;
}

inline std::vector<double> T_of(const SubmersionPoint& sp, const std::vector<double>& E, const std::vector<double>& Ep) {
  return apply3(sp.T, sp.m, E, Ep);
}
inline std::vector<double> A_of(const SubmersionPoint& sp, const std::vector<double>& E, const std::vector<double>& Ep) {
  return apply3(sp.A, sp.m, E, Ep);
}
inline std::vector<double> nablaT_of(const SubmersionPoint& sp, const std::vector<double>& E,
                                     const std::vector<double>& U, const std::vector<double>& Ep) {
  return apply4(sp.nT, sp.m, E, U, Ep);
}
inline std::vector<double> nablaA_of(const SubmersionPoint& sp, const std::vector<double>& E,
                                     const std::vector<double>& X, const std::vector<double>& Ep) {
  return apply4(sp.nA, sp.m, E, X, Ep);
}

inline double gdot(const SubmersionPoint& sp, const std::vector<double>& u, const std::vector<double>& v) {
  return inner(sp.g, u, v);
}
inline double gnorm(const SubmersionPoint& sp, const std::vector<double>& u) {
  return std::sqrt(std::max(inner(sp.g, u, u), 0.0));
}
inline double hdot(const SubmersionPoint& sp, const std::vector<double>& u, const std::vector<double>& v) {
  return inner(sp.h, u, v);
}
inline double hnorm(const SubmersionPoint& sp, const std::vector<double>& u) {
  return std::sqrt(std::max(inner(sp.h, u, u), 0.0));
}

/// D_E W + Gamma(E, W) for a field W known by its value and per-axis partials.
inline std::vector<double> nabla_field(const SubmersionPoint& sp, const std::vector<double>& E,
                                       const std::vector<double>& W, const std::vector<std::vector<double>>& dW) {
  std::vector<double> out = sp.con.apply(E, W);
  for (std::size_t c = 0; c < sp.m; ++c)
    for (std::size_t l = 0; l < sp.m; ++l) out[l] += E[c] * dW[c][l];
  return out;
}

inline double divergence_field(const SubmersionPoint& sp, const std::vector<double>& W,
                               const std::vector<std::vector<double>>& dW) {
  double s = 0.0;
  for (std::size_t i = 0; i < sp.m; ++i) {
    s += dW[i][i];
    for (std::size_t k = 0; k < sp.m; ++k) s += sp.con(i, i, k) * W[k];
  }
  return s;
}

/// D_E of the vertical projector (matrix).
inline Matrix<double> dV_along(const SubmersionPoint& sp, const std::vector<double>& E) {
  Matrix<double> out(sp.m, sp.m);
  for (std::size_t c = 0; c < sp.m; ++c)
    for (std::size_t i = 0; i < sp.m; ++i)
      for (std::size_t j = 0; j < sp.m; ++j) out(i, j) += E[c] * sp.dPv[c](i, j);
  return out;
}

/// nu[X,Y] from horizontal extensions X(x) = H(x) X(p): [X,Y] = (D_X H) Y - (D_Y H) X.
inline std::vector<double> vertical_bracket(const SubmersionPoint& sp, const std::vector<double>& X,
                                            const std::vector<double>& Y) {
  auto dx = dV_along(sp, X);
  auto dy = dV_along(sp, Y);
  // D H = -D nu
  auto br = (dy * X) - (dx * Y);
  return sp.Pv * br;
}

/// Hess(1/lambda^2)(X,Y) = g(D_X grad q, Y)
inline double hess_q(const SubmersionPoint& sp, const std::vector<double>& X, const std::vector<double>& Y) {
  double s = 0.0;
  for (std::size_t i = 0; i < sp.m; ++i)
    for (std::size_t j = 0; j < sp.m; ++j) {
      double v = sp.ddq(i, j);
      for (std::size_t k = 0; k < sp.m; ++k) v -= sp.con(k, i, j) * sp.dq[k];
      s += X[i] * Y[j] * v;
    }
  return s;
}

/// E(q)
inline double dir_q(const SubmersionPoint& sp, const std::vector<double>& E) {
  double s = 0.0;
  for (std::size_t i = 0; i < sp.m; ++i) s += E[i] * sp.dq[i];
  return s;
}

/// (nabla dF)(E1, E2) as a base vector.
inline std::vector<double> sff_of(const SubmersionPoint& sp, const std::vector<double>& E1, const std::vector<double>& E2) {
  std::vector<double> out(sp.n, 0.0);
  for (std::size_t a = 0; a < sp.n; ++a)
    for (std::size_t i = 0; i < sp.m; ++i)
      for (std::size_t j = 0; j < sp.m; ++j) out[a] += sp.sff[(a * sp.m + i) * sp.m + j] * E1[i] * E2[j];
  return out;
}

/// Intrinsic fiber curvature R^nu(U,V)W through the induced connection on vertical extensions.
inline std::vector<double> fiber_curvature_intrinsic(const SubmersionSetup& s, const SubmersionPoint& sp,
                                                     const std::vector<double>& U, const std::vector<double>& V,
                                                     const std::vector<double>& W) {
  const std::size_t m = sp.m;
  if (m - sp.n < 2) return std::vector<double>(m, 0.0);
  auto x = sp.p.span();
  auto outer = [&](const std::vector<double>& A, const std::vector<double>& B) {
    // nabla^nu_A (nabla^nu_B W) at p
    auto field = [&](auto xs) {
      using D = typename decltype(xs)::value_type;
      return fiber_connection_at<D>(s, xs, lift_vec<D>(B), lift_vec<D>(W));
    };
    auto d = flat_directional<double>(field, x, A);
    auto val = fiber_connection_at<double>(s, x, B, W);
    return sp.Pv * (d + sp.con.apply(A, val));
  };
  auto uv = outer(U, V);
  auto vu = outer(V, U);
  auto br = (dV_along(sp, U) * V) - (dV_along(sp, V) * U);
  auto corr = sp.Pv * ((dV_along(sp, br) * W) + sp.con.apply(br, sp.Pv * W));
  return (uv - vu) - corr;
}

// --------------------------------------------------------------- operations

inline std::pair<TangentVector, TangentVector> vertical_horizontal_split(const SubmersionSetup& s, const Point& p,
                                                                         const TangentVector& v) {
  auto pr = projectors_at<double>(s, p.span());
  auto jv = pr.J * v.components;
  auto hv = pr.ginv * (transpose(pr.J) * (pr.Kinv * jv));
  auto vv = v.components - hv;
  return {{vv, p}, {hv, p}};
}

inline DilationResult dilation(const SubmersionSetup& s, const Point& p) { return analyze(s, p).dilation; }

inline TangentVector horizontal_lift(const SubmersionSetup& s, const VectorFieldSpec& base_field, const Point& p) {
  (void)metric_matrix(s.total, p);
  return {lift_at<double>(s, base_field, p.span()), p};
}

inline TangentVector oneill_T(const SubmersionSetup& s, const Point& p, const std::vector<double>& E,
                              const std::vector<double>& Ep) {
  auto o = oneill_at<double>(s, p.span());
  return {apply3(o.T, s.m(), E, Ep), p};
}
inline TangentVector oneill_A(const SubmersionSetup& s, const Point& p, const std::vector<double>& E,
                              const std::vector<double>& Ep) {
  auto o = oneill_at<double>(s, p.span());
  return {apply3(o.A, s.m(), E, Ep), p};
}
inline TangentVector cov_deriv_T(const SubmersionSetup& s, const Point& p, const std::vector<double>& E,
                                 const std::vector<double>& U, const std::vector<double>& Ep) {
  return {nablaT_of(analyze(s, p), E, U, Ep), p};
}
inline TangentVector cov_deriv_A(const SubmersionSetup& s, const Point& p, const std::vector<double>& E,
                                 const std::vector<double>& X, const std::vector<double>& Ep) {
  return {nablaA_of(analyze(s, p), E, X, Ep), p};
}

inline TangentVector mean_curvature(const SubmersionSetup& s, const Point& p) {
  auto o = oneill_at<double>(s, p.span());
  return {o.mean, p};
}

struct HorizontalMeanCurvature {
  TangentVector via_A, via_formula;
  double residual = 0.0;
  bool integrable = true;
  double integrability_violation = 0.0;
};

inline double integrability_violation(const SubmersionPoint& sp) {
  double v = 0.0;
  for (std::size_t j = 0; j < sp.X.size(); ++j)
    for (std::size_t k = j + 1; k < sp.X.size(); ++k) v = std::max(v, gnorm(sp, vertical_bracket(sp, sp.X[j], sp.X[k])));
  return v;
}

inline HorizontalMeanCurvature horizontal_mean_curvature(const SubmersionSetup& s, const Point& p, double tol = 1e-8) {
  auto sp = analyze(s, p);
  HorizontalMeanCurvature r{{sp.HA, p}, {sp.HF, p}, gnorm(sp, sp.HA - sp.HF), true, integrability_violation(sp)};
  r.integrable = r.integrability_violation <= tol;
  return r;
}

/// (nabla F_*)(X,Y) = nabla^N_{F_* X} F_* Y - F_*(nabla_X Y) on basic lifts of base fields.
inline std::vector<double> second_fundamental_form_at(const SubmersionSetup& s, const SubmersionPoint& sp,
                                                      const VectorFieldSpec& Xt, const VectorFieldSpec& Yt) {
  auto x = sp.p.span();
  auto y = std::span<const double>(sp.F);
  if (!s.base.in_domain(y)) throw OutsideDomain("F(p) outside base chart domain");
  auto X = lift_at<double>(s, Xt, x);
  auto Yfield = [&](auto xs) {
    using D = typename decltype(xs)::value_type;
    return lift_at<D>(s, Yt, xs);
  };
  auto Yv = lift_at<double>(s, Yt, x);
  auto nablaXY = flat_directional<double>(Yfield, x, X) + sp.con.apply(X, Yv);
  auto xt = eval_field<double>(Xt, y);
  auto yt = eval_field<double>(Yt, y);
  auto nablaN = field_derivative<double>(Yt, y, xt) + sp.conN.apply(xt, yt);
  return nablaN - sp.J * nablaXY;
}

inline TangentVector second_fundamental_form(const SubmersionSetup& s, const VectorFieldSpec& Xt,
                                             const VectorFieldSpec& Yt, const Point& p) {
  auto sp = analyze(s, p);
  return {second_fundamental_form_at(s, sp, Xt, Yt), Point(sp.F)};
}

/// tau(F) = (n-2)(lambda^2/2) F_*(grad_H q) - (m-n) F_*(H)
inline std::vector<double> tension_formula(const SubmersionPoint& sp) {
  auto hq = sp.Ph * sp.gradq;
  auto a = scaled(sp.J * hq, (double(sp.n) - 2.0) * sp.lsq / 2.0);
  auto b = scaled(sp.J * sp.H, double(sp.m - sp.n));
  return a - b;
}

/// Trace of the coordinate second fundamental form, g^{ij} (nabla dF)_ij.
inline std::vector<double> tension_direct(const SubmersionPoint& sp) {
  std::vector<double> out(sp.n, 0.0);
  for (std::size_t a = 0; a < sp.n; ++a)
    for (std::size_t i = 0; i < sp.m; ++i)
      for (std::size_t j = 0; j < sp.m; ++j) out[a] += sp.ginv(i, j) * sp.sff[(a * sp.m + i) * sp.m + j];
  return out;
}

inline TangentVector tension_field(const SubmersionSetup& s, const Point& p) {
  auto sp = analyze(s, p);
  return {tension_formula(sp), Point(sp.F)};
}

/// Gauss-rearranged fiber curvature g(R^nu(U,V)W,S).
inline double fiber_curvature_gauss(const SubmersionPoint& sp, const std::vector<double>& U, const std::vector<double>& V,
                                    const std::vector<double>& W, const std::vector<double>& S) {
  return gdot(sp, sp.R.apply(U, V, W), S) - gdot(sp, T_of(sp, U, W), T_of(sp, V, S)) +
         gdot(sp, T_of(sp, V, W), T_of(sp, U, S));
}

/// Ric^nu(U,V) = sum_i g(R^nu(U_i,U)V,U_i). A one-dimensional fiber carries no 2-plane, so it is 0.
inline double fiber_ricci_at(const SubmersionPoint& sp, const std::vector<double>& U, const std::vector<double>& V) {
  if (sp.U.size() < 2) return 0.0;
  double s = 0.0;
  for (const auto& Ui : sp.U) s += fiber_curvature_gauss(sp, Ui, U, V, Ui);
  return s;
}

inline double fiber_ricci(const SubmersionSetup& s, const VectorFieldSpec& U, const VectorFieldSpec& V, const Point& p) {
  auto sp = analyze(s, p);
  auto u = eval_field<double>(U, p.span());
  auto v = eval_field<double>(V, p.span());
  if (gnorm(sp, sp.Ph * u) > 1e-9 * std::max(1.0, gnorm(sp, u)) ||
      gnorm(sp, sp.Ph * v) > 1e-9 * std::max(1.0, gnorm(sp, v)))
    throw std::invalid_argument("fiber_ricci arguments must be vertical");
  return fiber_ricci_at(sp, u, v);
}

/// Fiber scalar curvature from the Gauss route.
inline double fiber_scalar_at(const SubmersionPoint& sp) {
  double s = 0.0;
  for (const auto& Ui : sp.U) s += fiber_ricci_at(sp, Ui, Ui);
  return s;
}

/// Ambient Ricci and scalar curvature at the cached point.
inline double ricci_of(const SubmersionPoint& sp, const std::vector<double>& X, const std::vector<double>& Y) {
  double s = 0.0;
  for (const auto& e : sp.U) s += gdot(sp, sp.R.apply(e, X, Y), e);
  for (const auto& e : sp.X) s += gdot(sp, sp.R.apply(e, X, Y), e);
  return s;
}

inline double scalar_of(const SubmersionPoint& sp) {
  double s = 0.0;
  for (const auto& e : sp.U) s += ricci_of(sp, e, e);
  for (const auto& e : sp.X) s += ricci_of(sp, e, e);
  return s;
}

/// Base Ricci at F(p) on base vectors, via an h-orthonormal base frame.
inline std::vector<std::vector<double>> base_frame(const SubmersionPoint& sp) {
  std::vector<std::vector<double>> seed;
  for (std::size_t a = 0; a < sp.n; ++a) {
    std::vector<double> e(sp.n, 0.0);
    e[a] = 1.0;
    seed.push_back(e);
  }
  return gram_schmidt(sp.h, seed);
}

inline double base_ricci_of(const SubmersionPoint& sp, const std::vector<double>& Xt, const std::vector<double>& Yt) {
  double s = 0.0;
  for (const auto& e : base_frame(sp)) s += hdot(sp, sp.RN.apply(e, Xt, Yt), e);
  return s;
}

inline double base_scalar_of(const SubmersionPoint& sp) {
  double s = 0.0;
  auto fr = base_frame(sp);
  for (const auto& e : fr) s += base_ricci_of(sp, e, e);
  return s;
}

// ----------------------------------------------------------- structure flags

struct Flag {
  bool holds = true;
  double max_violation = 0.0;
};

struct StructureFlags {
  Flag fibers_totally_geodesic, fibers_totally_umbilical, horizontal_integrable, horizontal_totally_geodesic,
      homothetic, lambda_vertical_constant, map_totally_geodesic;

  template <class Fn>
  void for_each(Fn&& fn) const {
    fn("fibers_totally_geodesic", fibers_totally_geodesic);
    fn("fibers_totally_umbilical", fibers_totally_umbilical);
    fn("horizontal_integrable", horizontal_integrable);
    fn("horizontal_totally_geodesic", horizontal_totally_geodesic);
    fn("homothetic", homothetic);
    fn("lambda_vertical_constant", lambda_vertical_constant);
    fn("map_totally_geodesic", map_totally_geodesic);
  }
};

struct PointViolations {
  double fibers_tg = 0, umbilical = 0, integrable = 0, horizontal_tg = 0, homothetic = 0, lambda_vertical = 0,
         map_tg = 0;
};

inline PointViolations point_violations(const SubmersionPoint& sp) {
  PointViolations v;
  std::vector<std::vector<double>> all = sp.U;
  all.insert(all.end(), sp.X.begin(), sp.X.end());
  for (std::size_t i = 0; i < sp.U.size(); ++i) {
    for (const auto& E : all) v.fibers_tg = std::max(v.fibers_tg, gnorm(sp, T_of(sp, sp.U[i], E)));
    for (std::size_t j = 0; j < sp.U.size(); ++j) {
      auto d = T_of(sp, sp.U[i], sp.U[j]);
      if (i == j) d = d - sp.H;
      v.umbilical = std::max(v.umbilical, gnorm(sp, d));
    }
  }
  v.integrable = integrability_violation(sp);
  for (const auto& Xj : sp.X)
    for (const auto& Xk : sp.X) v.horizontal_tg = std::max(v.horizontal_tg, gnorm(sp, A_of(sp, Xj, Xk)));
  // grad lambda = -(1/2) q^{-3/2} grad q
  auto gl = scaled(sp.gradq, -0.5 * std::pow(sp.q, -1.5));
  v.homothetic = gnorm(sp, sp.Ph * gl);
  v.lambda_vertical = gnorm(sp, sp.Pv * gl);
  for (const auto& E1 : all)
    for (const auto& E2 : all) v.map_tg = std::max(v.map_tg, hnorm(sp, sff_of(sp, E1, E2)));
  return v;
}

inline void fold_flags(StructureFlags& f, const PointViolations& v) {
  auto up = [](Flag& fl, double x) { fl.max_violation = std::max(fl.max_violation, x); };
  up(f.fibers_totally_geodesic, v.fibers_tg);
  up(f.fibers_totally_umbilical, v.umbilical);
  up(f.horizontal_integrable, v.integrable);
  up(f.horizontal_totally_geodesic, v.horizontal_tg);
  up(f.homothetic, v.homothetic);
  up(f.lambda_vertical_constant, v.lambda_vertical);
  up(f.map_totally_geodesic, v.map_tg);
}

inline void finalize_flags(StructureFlags& f, double tol) {
  for (Flag* fl : {&f.fibers_totally_geodesic, &f.fibers_totally_umbilical, &f.horizontal_integrable,
                   &f.horizontal_totally_geodesic, &f.homothetic, &f.lambda_vertical_constant, &f.map_totally_geodesic})
    fl->holds = fl->max_violation <= tol;
}

inline StructureFlags structure_flags(const SubmersionSetup& s, const std::vector<Point>& points, double tol) {
  StructureFlags f;
  for (const auto& p : points) fold_flags(f, point_violations(analyze(s, p)));
  finalize_flags(f, tol);
  return f;
}

}  // namespace subgeo
