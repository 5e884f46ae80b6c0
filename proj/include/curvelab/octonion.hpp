#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "curvelab/surface.hpp"

namespace curvelab {

// Octonion with basis 1, e1..e7. The multiplication table is generated from
// the oriented Fano lines
//
//   (1 2 3) (1 4 5) (1 7 6) (2 4 6) (2 5 7) (3 4 7) (3 6 5)
//
// each line read cyclically: e1 e2 = e3, e2 e3 = e1, e3 e1 = e2, and so on;
// products of distinct imaginary units anticommute and e_i^2 = -1.
struct Octonion {
  double re = 0.0;
  std::array<double, 7> im{};

  static Octonion pure(const std::array<double, 7>& v) { return Octonion{0.0, v}; }
};

namespace detail {

struct OctTable {
  // sign[a][b] and idx[a][b] describe e_a * e_b = sign * e_idx, with index 0
  // standing for the real unit.
  std::array<std::array<std::int8_t, 8>, 8> sign{};
  std::array<std::array<std::uint8_t, 8>, 8> idx{};
};

constexpr OctTable make_oct_table() {
  OctTable t{};
  for (int i = 0; i < 8; ++i) {
    t.sign[0][i] = 1;
    t.idx[0][i] = static_cast<std::uint8_t>(i);
    t.sign[i][0] = 1;
    t.idx[i][0] = static_cast<std::uint8_t>(i);
  }
  for (int i = 1; i < 8; ++i) {
    t.sign[i][i] = -1;
    t.idx[i][i] = 0;
  }
  constexpr int lines[7][3] = {{1, 2, 3}, {1, 4, 5}, {1, 7, 6}, {2, 4, 6},
                               {2, 5, 7}, {3, 4, 7}, {3, 6, 5}};
  for (const auto& l : lines) {
    const int a = l[0], b = l[1], c = l[2];
    const int cyc[3][3] = {{a, b, c}, {b, c, a}, {c, a, b}};
    for (const auto& p : cyc) {
      t.sign[p[0]][p[1]] = 1;
      t.idx[p[0]][p[1]] = static_cast<std::uint8_t>(p[2]);
      t.sign[p[1]][p[0]] = -1;
      t.idx[p[1]][p[0]] = static_cast<std::uint8_t>(p[2]);
    }
  }
  return t;
}

inline constexpr OctTable kOctTable = make_oct_table();

}  // namespace detail

inline Octonion cayley_mul(const Octonion& a, const Octonion& b) {
  const auto& T = detail::kOctTable;
  double acc[8] = {};
  double av[8], bv[8];
  av[0] = a.re;
  bv[0] = b.re;
  for (int i = 0; i < 7; ++i) {
    av[i + 1] = a.im[i];
    bv[i + 1] = b.im[i];
  }
  for (int i = 0; i < 8; ++i) {
    if (av[i] == 0.0) continue;
    for (int j = 0; j < 8; ++j) {
      if (bv[j] == 0.0) continue;
      acc[T.idx[i][j]] += T.sign[i][j] * av[i] * bv[j];
    }
  }
  Octonion r;
  r.re = acc[0];
  for (int i = 0; i < 7; ++i) r.im[i] = acc[i + 1];
  return r;
}

inline Octonion conj(const Octonion& a) {
  Octonion r;
  r.re = a.re;
  for (int i = 0; i < 7; ++i) r.im[i] = -a.im[i];
  return r;
}

inline double norm(const Octonion& a) {
  double n2 = a.re * a.re;
  for (double v : a.im) n2 += v * v;
  return std::sqrt(n2);
}

// Seven-dimensional cross product: Im(u * v) for pure imaginary u, v.
inline std::array<double, 7> cross7(const std::array<double, 7>& u,
                                    const std::array<double, 7>& v) {
  Octonion p = cayley_mul(Octonion::pure(u), Octonion::pure(v));
  return p.im;
}

struct TangentPair {
  std::array<double, 7> p{};  // unit base point on the 6-sphere
  std::array<double, 7> v{};  // tangent vector at p
};

// The standard almost complex structure on the 6-sphere: J_p v = p x v.
// Validates its preconditions rather than silently extrapolating.
inline std::array<double, 7> J(const TangentPair& t, double tol = 1e-8) {
  double pn = 0.0, pv = 0.0;
  for (int i = 0; i < 7; ++i) {
    pn += t.p[i] * t.p[i];
    pv += t.p[i] * t.v[i];
  }
  if (std::abs(std::sqrt(pn) - 1.0) > tol)
    throw std::invalid_argument("J: base point is not on the unit sphere");
  double vn = 0.0;
  for (int i = 0; i < 7; ++i) vn += t.v[i] * t.v[i];
  if (std::abs(pv) > tol * std::max(1.0, std::sqrt(vn)))
    throw std::invalid_argument("J: vector is not tangent to the sphere at p");
  return cross7(t.p, t.v);
}

// How far a parametrized surface in the 6-sphere is from being a
// pseudoholomorphic curve at p: with unit oriented tangent frame
// (t1, t2), returns |J_f(p) t1 - t2|. Zero for pseudoholomorphic
// parametrizations, 2 when the orientation is reversed.
inline double pseudoholomorphy_from_derivatives(const std::array<double, 7>& pos,
                                                const std::array<double, 7>& fx,
                                                const std::array<double, 7>& fy) {
  double pn2 = 0.0;
  for (int i = 0; i < 7; ++i) pn2 += pos[i] * pos[i];
  if (std::abs(std::sqrt(pn2) - 1.0) > 1e-8)
    throw std::invalid_argument("pseudoholomorphy: surface does not take values in the unit sphere");
  double nx2 = 0.0;
  for (int i = 0; i < 7; ++i) nx2 += fx[i] * fx[i];
  if (nx2 <= 0.0) throw EvalError("pseudoholomorphy: degenerate tangent at the sample point");
  const double inx = 1.0 / std::sqrt(nx2);
  std::array<double, 7> t1{}, t2{};
  for (int i = 0; i < 7; ++i) t1[i] = fx[i] * inx;
  double proj = 0.0;
  for (int i = 0; i < 7; ++i) proj += fy[i] * t1[i];
  double ny2 = 0.0;
  for (int i = 0; i < 7; ++i) {
    t2[i] = fy[i] - proj * t1[i];
    ny2 += t2[i] * t2[i];
  }
  if (ny2 <= 0.0) throw EvalError("pseudoholomorphy: degenerate tangent plane at the sample point");
  const double iny = 1.0 / std::sqrt(ny2);
  for (int i = 0; i < 7; ++i) t2[i] *= iny;
  std::array<double, 7> jt1 = cross7(pos, t1);
  double r2 = 0.0;
  for (int i = 0; i < 7; ++i) {
    const double d = jt1[i] - t2[i];
    r2 += d * d;
  }
  return std::sqrt(r2);
}

inline double pseudoholomorphy_residual(const SurfaceSpec& spec, Vec2 p) {
  if (spec.dim != 7)
    throw std::invalid_argument("pseudoholomorphy requires a 7-component surface (values in the 6-sphere)");
  VecJet f = eval_jet(spec, p, 1);
  std::array<double, 7> pos{}, fx{}, fy{};
  for (int i = 0; i < 7; ++i) {
    pos[i] = f[i].value();
    fx[i] = f[i].partial(1, 0);
    fy[i] = f[i].partial(0, 1);
  }
  return pseudoholomorphy_from_derivatives(pos, fx, fy);
}

}  // namespace curvelab
