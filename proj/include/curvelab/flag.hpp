#pragma once

// Moving-frame analysis for conformally parametrized surfaces in round
// spheres.  From the partial derivatives of the position map at one point we
// build the orthonormal flag of higher osculating subbundles, the curvature
// ellipse of each subbundle, and the pointwise invariants attached to them
// (semi-axes, normal curvature, higher Hopf coefficients, and the intrinsic
// curvature of each plane subbundle).
//
// The frame construction is generic over the scalar type.  With plain
// doubles it powers the grid samplers; instantiated with a forward-mode dual
// number it yields exact first derivatives of every frame vector, which the
// frame-transport integrator uses to read off connection coefficients
// without finite differencing.  Branching decisions (ranks, pivoting, signs)
// are always taken on the value part of the scalar, so dual sweeps follow
// the same path as the plain evaluation.

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "curvelab/jet.hpp"
#include "curvelab/surface.hpp"

namespace curvelab {

// Hook used by generic code to read the value part of a scalar.  Dual
// number types provide their own overload next to their definition.
inline double scalar_value(double v) { return v; }

namespace vecops {

template <class S>
S dot(const std::vector<S>& u, const std::vector<S>& v) {
  S acc = S(0.0);
  for (std::size_t i = 0; i < u.size(); ++i) acc = acc + u[i] * v[i];
  return acc;
}

// y += a * x
template <class S>
void axpy(const S& a, const std::vector<S>& x, std::vector<S>& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = y[i] + a * x[i];
}

template <class S>
void scale(const S& a, std::vector<S>& x) {
  for (auto& c : x) c = a * c;
}

template <class S>
S pow_nat(S base, int n) {
  S r = S(1.0);
  for (int k = 0; k < n; ++k) r = r * base;
  return r;
}

}  // namespace vecops

// Table of partial derivatives of the position map at a single point:
// at(i, j) holds d^{i+j} f / dx^i dy^j as a dim-vector.
template <class S>
struct DerivTable {
  int dim = 0;
  int order = 0;
  std::vector<std::vector<S>> entry;

  static int index_of(int i, int j) {
    const int d = i + j;
    return d * (d + 1) / 2 + j;
  }

  const std::vector<S>& at(int i, int j) const {
    return entry[static_cast<std::size_t>(index_of(i, j))];
  }
  std::vector<S>& at(int i, int j) {
    return entry[static_cast<std::size_t>(index_of(i, j))];
  }

  static DerivTable zeros(int dim_, int order_) {
    DerivTable t;
    t.dim = dim_;
    t.order = order_;
    t.entry.assign(static_cast<std::size_t>((order_ + 1) * (order_ + 2) / 2),
                   std::vector<S>(static_cast<std::size_t>(dim_), S(0.0)));
    return t;
  }
};

inline DerivTable<double> make_deriv_table(const VecJet& f, int order) {
  if (f.empty()) throw std::invalid_argument("empty jet vector");
  if (order < 1 || order > f.front().order())
    throw std::invalid_argument("derivative table order exceeds jet order");
  auto t = DerivTable<double>::zeros(static_cast<int>(f.size()), order);
  for (int d = 0; d <= order; ++d)
    for (int j = 0; j <= d; ++j) {
      auto& slot = t.at(d - j, j);
      for (std::size_t c = 0; c < f.size(); ++c)
        slot[c] = f[c].partial(d - j, j);
    }
  return t;
}

struct FlagOptions {
  int max_level = 0;           // ellipse levels to compute; 0 = order - 1
  double rank_abs_tol = 1e-7;  // below this the normalized form is rank 0
  double rank_rel_tol = 1e-7;  // sigma_2 / |sigma| threshold for rank 2
};

// Data attached to the flag at step s >= 2 (the bundle N_{s-1} and the
// ellipse generators of the s-th fundamental form).
template <class S>
struct FlagLevel {
  int step = 0;  // s
  int rank = 0;  // dimension of the span of {a, b}: 0, 1 or 2
  std::vector<S> a, b;               // normalized ellipse generators
  std::vector<std::vector<S>> frame; // orthonormal frame of the span (size == rank)
  std::vector<S> xi_re, xi_im;       // projected complex derivative, unnormalized
  S hopf_re = S(0.0), hopf_im = S(0.0);  // bilinear square of xi
};

template <class S>
struct Flag {
  int dim = 0;
  int order = 0;
  S F = S(0.0);        // conformal factor, (|f_x|^2 + |f_y|^2)/2
  S lambda = S(0.0);   // sqrt(F)
  S conf_res = S(0.0); // conformality defect, dimensionless
  std::vector<S> pos, e1, e2;  // unit position and tangent frame
  S w12_x = S(0.0), w12_y = S(0.0);  // tangent connection form on dx, dy
  std::vector<FlagLevel<S>> levels;  // levels[k] is step s = k + 2
  int used = 0;          // ambient directions consumed by the flag so far
  bool exhausted = false;
};

namespace flag_detail {

inline double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / i;
  return r;
}

// Orthonormal projection step: v -= sum_u <v,u> u over the collected basis.
template <class S>
void project_off(const std::vector<std::vector<S>>& basis, std::vector<S>& v) {
  for (const auto& u : basis) {
    S c = vecops::dot(v, u);
    vecops::axpy(S(-1.0) * c, u, v);
  }
}

}  // namespace flag_detail

// Builds the osculating flag from a table of partial derivatives.  Throws
// EvalError when the point is not an immersed point of the parametrization
// (callers that sample grids should catch or pre-screen instead).
template <class S>
Flag<S> build_flag(const DerivTable<S>& d, const FlagOptions& opt = {}) {
  using std::sqrt;
  if (d.order < 1) throw std::invalid_argument("flag needs at least first derivatives");

  Flag<S> out;
  out.dim = d.dim;
  out.order = d.order;

  const std::vector<S>& p = d.at(0, 0);
  const std::vector<S>& fx = d.at(1, 0);
  const std::vector<S>& fy = d.at(0, 1);

  const S e11 = vecops::dot(fx, fx);
  const S e22 = vecops::dot(fy, fy);
  const S e12 = vecops::dot(fx, fy);
  out.F = (e11 + e22) * S(0.5);
  if (!(scalar_value(out.F) > 0.0) ||
      scalar_value(out.F) < 1e-300)
    throw EvalError("flag construction at a non-immersed point");
  out.lambda = sqrt(out.F);
  const S diff = e11 - e22;
  out.conf_res = sqrt(diff * diff + S(4.0) * e12 * e12) / (e11 + e22);

  const S plen2 = vecops::dot(p, p);
  if (scalar_value(plen2) < 1e-300)
    throw EvalError("flag construction needs a nonvanishing position vector");

  std::vector<std::vector<S>> basis;
  basis.reserve(static_cast<std::size_t>(d.dim));

  out.pos = p;
  vecops::scale(S(1.0) / sqrt(plen2), out.pos);
  basis.push_back(out.pos);

  out.e1 = fx;
  flag_detail::project_off(basis, out.e1);
  {
    const S n2 = vecops::dot(out.e1, out.e1);
    if (scalar_value(n2) < 1e-300)
      throw EvalError("flag construction at a non-immersed point");
    vecops::scale(S(1.0) / sqrt(n2), out.e1);
  }
  basis.push_back(out.e1);

  out.e2 = fy;
  flag_detail::project_off(basis, out.e2);
  {
    const S n2 = vecops::dot(out.e2, out.e2);
    if (scalar_value(n2) < 1e-300)
      throw EvalError("flag construction at a non-immersed point");
    vecops::scale(S(1.0) / sqrt(n2), out.e2);
  }
  basis.push_back(out.e2);
  out.used = 3;

  if (d.order >= 2) {
    out.w12_x = vecops::dot(d.at(2, 0), out.e2) / out.lambda;
    out.w12_y = vecops::dot(d.at(1, 1), out.e2) / out.lambda;
  }

  const int max_step =
      (opt.max_level > 0) ? std::min(opt.max_level + 1, d.order) : d.order;
  const S sqrtF = out.lambda;

  for (int s = 2; s <= max_step; ++s) {
    if (out.used >= d.dim) {
      out.exhausted = true;
      break;
    }

    FlagLevel<S> lvl;
    lvl.step = s;
    lvl.xi_re.assign(static_cast<std::size_t>(d.dim), S(0.0));
    lvl.xi_im.assign(static_cast<std::size_t>(d.dim), S(0.0));

    // Complex derivative: 2^{-s} sum_k C(s,k) (-i)^k d^s f / dx^{s-k} dy^k.
    const double inv2s = 1.0 / static_cast<double>(1 << s);
    for (int k = 0; k <= s; ++k) {
      const S c = S(flag_detail::binomial(s, k) * inv2s);
      const auto& part = d.at(s - k, k);
      switch (k & 3) {
        case 0: vecops::axpy(c, part, lvl.xi_re); break;
        case 1: vecops::axpy(S(-1.0) * c, part, lvl.xi_im); break;
        case 2: vecops::axpy(S(-1.0) * c, part, lvl.xi_re); break;
        case 3: vecops::axpy(c, part, lvl.xi_im); break;
      }
    }

    flag_detail::project_off(basis, lvl.xi_re);
    flag_detail::project_off(basis, lvl.xi_im);

    lvl.hopf_re = vecops::dot(lvl.xi_re, lvl.xi_re) - vecops::dot(lvl.xi_im, lvl.xi_im);
    lvl.hopf_im = S(2.0) * vecops::dot(lvl.xi_re, lvl.xi_im);

    // Normalized ellipse generators of the s-th fundamental form.
    const S gen_scale = S(2.0) / vecops::pow_nat(sqrtF, s);
    lvl.a = lvl.xi_re;
    vecops::scale(gen_scale, lvl.a);
    lvl.b = lvl.xi_im;
    vecops::scale(S(-1.0) * gen_scale, lvl.b);

    const double gaa = scalar_value(vecops::dot(lvl.a, lvl.a));
    const double gbb = scalar_value(vecops::dot(lvl.b, lvl.b));
    const double gab = scalar_value(vecops::dot(lvl.a, lvl.b));
    const double mean = 0.5 * (gaa + gbb);
    const double disc = std::sqrt(0.25 * (gaa - gbb) * (gaa - gbb) + gab * gab);
    const double sig1 = std::sqrt(std::max(0.0, mean + disc));
    const double sig2 = std::sqrt(std::max(0.0, mean - disc));

    if (sig1 < opt.rank_abs_tol) {
      lvl.rank = 0;
      out.levels.push_back(std::move(lvl));
      break;  // the form vanishes here; the flag does not continue
    }
    const bool full_rank = sig2 >= opt.rank_rel_tol * std::sqrt(sig1 * sig1 + sig2 * sig2);
    lvl.rank = full_rank ? 2 : 1;
    if (out.used + lvl.rank > d.dim) lvl.rank = d.dim - out.used;

    const bool a_first = gaa >= gbb;
    const std::vector<S>& first = a_first ? lvl.a : lvl.b;
    const std::vector<S>& second = a_first ? lvl.b : lvl.a;

    std::vector<S> ea = first;
    {
      const S n2 = vecops::dot(ea, ea);
      vecops::scale(S(1.0) / sqrt(n2), ea);
    }
    lvl.frame.push_back(ea);
    if (lvl.rank == 2) {
      std::vector<S> eb = second;
      S c = vecops::dot(eb, ea);
      vecops::axpy(S(-1.0) * c, ea, eb);
      const S n2 = vecops::dot(eb, eb);
      vecops::scale(S(1.0) / sqrt(n2), eb);
      // Orient the plane so that the ellipse (cos t) a + (sin t) b is
      // traversed positively; this pins the sign of the normal curvature.
      const double det = scalar_value(vecops::dot(lvl.a, ea)) *
                             scalar_value(vecops::dot(lvl.b, eb)) -
                         scalar_value(vecops::dot(lvl.a, eb)) *
                             scalar_value(vecops::dot(lvl.b, ea));
      if (det < 0.0) vecops::scale(S(-1.0), eb);
      lvl.frame.push_back(eb);
    }

    for (const auto& u : lvl.frame) basis.push_back(u);
    out.used += lvl.rank;
    out.levels.push_back(std::move(lvl));
  }

  if (out.used >= d.dim) out.exhausted = true;
  return out;
}

// ---------------------------------------------------------------------------
// Double-precision post-processing: pointwise invariants of each level.
// ---------------------------------------------------------------------------

// Quotient with an explicit removable-singularity rule: when the denominator
// is below its floor the quotient is 0 if the numerator also vanishes and
// NaN otherwise.
inline double guarded_div(double num, double den, double num_floor = 1e-9,
                          double den_floor = 1e-9) {
  if (std::abs(den) > den_floor) return num / den;
  if (std::abs(num) < num_floor) return 0.0;
  return std::numeric_limits<double>::quiet_NaN();
}

// Invariants of the curvature ellipse at level r (built from the (r+1)-th
// fundamental form).  kappa >= mu >= 0 are the semi-axes; kperp = 2 kappa mu
// is the normal curvature of the plane subbundle with the orientation fixed
// by the frame construction; alpha_sq = 2^r (kappa^2 + mu^2) is the squared
// norm of the full symmetric form.
struct EllipseData {
  int level = 0;
  int rank = 0;
  bool beyond_flag = false;  // level lies past where the flag terminated
  double kappa = 0.0;
  double mu = 0.0;
  double kperp = 0.0;
  double alpha_sq = 0.0;
  double a_plus = 0.0;
  double a_minus = 0.0;
  double eccentricity = 0.0;
  double rho = 0.0;
  double kstar = 0.0;
  std::complex<double> hopf{0.0, 0.0};
  // Three independently computed proxies for kappa^2 - mu^2, used by the
  // isotropy cross-check (they agree up to roundoff at every point).
  double iso_hopf = 0.0;
  double iso_axes = 0.0;
  double iso_norms = 0.0;
};

struct FlagReport {
  int dim = 0;
  int order = 0;
  double F = 0.0;
  double lambda = 0.0;
  double K = std::numeric_limits<double>::quiet_NaN();
  double conf_res = 0.0;
  double min_res = 0.0;   // deviation from the sphere-minimal Laplace identity
  double unit_res = 0.0;  // | |f| - 1 |
  double w12_x = 0.0, w12_y = 0.0;
  bool immersed = false;
  bool conformal = false;
  bool minimal = false;
  std::vector<EllipseData> levels;  // levels[r-1] holds level r
  int tau = 0;             // number of rank-2 subbundles
  bool exhausted = false;
  bool regular = false;
  std::string irregular_reason;
};

struct AnalyzeOptions {
  FlagOptions flag;
  double conformal_tol = 1e-8;
  double immersion_tol = 1e-12;
  double minimal_tol = 1e-8;
};

namespace flag_detail {

inline double gauss_curvature_from_table(const DerivTable<double>& d, double F) {
  const auto& fx = d.at(1, 0);
  const auto& fy = d.at(0, 1);
  const auto& fxx = d.at(2, 0);
  const auto& fxy = d.at(1, 1);
  const auto& fyy = d.at(0, 2);
  const auto& fxxx = d.at(3, 0);
  const auto& fxxy = d.at(2, 1);
  const auto& fxyy = d.at(1, 2);
  const auto& fyyy = d.at(0, 3);
  using vecops::dot;
  const double Fx = dot(fxx, fx) + dot(fxy, fy);
  const double Fy = dot(fxy, fx) + dot(fyy, fy);
  const double Fxx = dot(fxxx, fx) + dot(fxx, fxx) + dot(fxxy, fy) + dot(fxy, fxy);
  const double Fyy = dot(fxyy, fx) + dot(fxy, fxy) + dot(fyyy, fy) + dot(fyy, fyy);
  const double lap_logF = (Fxx + Fyy) / F - (Fx * Fx + Fy * Fy) / (F * F);
  return -0.5 * lap_logF / F;
}

}  // namespace flag_detail

inline FlagReport analyze_table(const DerivTable<double>& d,
                                const AnalyzeOptions& opt = {}) {
  if (d.order < 3)
    throw std::invalid_argument("pointwise analysis needs derivatives to order 3");

  FlagReport rep;
  rep.dim = d.dim;
  rep.order = d.order;

  const auto& p = d.at(0, 0);
  const auto& fx = d.at(1, 0);
  const auto& fy = d.at(0, 1);
  using vecops::dot;

  double plen = std::sqrt(dot(p, p));
  rep.unit_res = std::abs(plen - 1.0);

  const double e11 = dot(fx, fx);
  const double e22 = dot(fy, fy);
  const double e12 = dot(fx, fy);
  rep.F = 0.5 * (e11 + e22);
  rep.lambda = std::sqrt(std::max(0.0, rep.F));
  rep.immersed = rep.F > opt.immersion_tol;
  if (!rep.immersed) {
    rep.conf_res = std::numeric_limits<double>::quiet_NaN();
    rep.min_res = std::numeric_limits<double>::quiet_NaN();
    rep.regular = false;
    rep.irregular_reason = "not immersed";
    const int want = (opt.flag.max_level > 0) ? opt.flag.max_level : d.order - 1;
    for (int r = 1; r <= want; ++r) {
      EllipseData e;
      e.level = r;
      e.beyond_flag = true;
      const double nan = std::numeric_limits<double>::quiet_NaN();
      e.kappa = e.mu = e.kperp = e.alpha_sq = e.a_plus = e.a_minus = nan;
      e.eccentricity = e.rho = e.kstar = nan;
      e.hopf = {nan, nan};
      e.iso_hopf = e.iso_axes = e.iso_norms = nan;
      rep.levels.push_back(e);
    }
    return rep;
  }
  rep.conf_res =
      std::sqrt((e11 - e22) * (e11 - e22) + 4.0 * e12 * e12) / (e11 + e22);
  rep.conformal = rep.conf_res < opt.conformal_tol;

  // Sphere-minimal parametrizations satisfy f_xx + f_yy + 2 F f = 0.
  {
    const auto& fxx = d.at(2, 0);
    const auto& fyy = d.at(0, 2);
    double acc = 0.0;
    for (int c = 0; c < d.dim; ++c) {
      const double rcomp = fxx[static_cast<std::size_t>(c)] +
                           fyy[static_cast<std::size_t>(c)] +
                           2.0 * rep.F * p[static_cast<std::size_t>(c)];
      acc += rcomp * rcomp;
    }
    rep.min_res = std::sqrt(acc) / (2.0 * rep.F * std::max(1.0, plen));
    rep.minimal = rep.min_res < opt.minimal_tol;
  }

  rep.K = flag_detail::gauss_curvature_from_table(d, rep.F);

  Flag<double> flag = build_flag(d, opt.flag);
  rep.w12_x = flag.w12_x;
  rep.w12_y = flag.w12_y;
  rep.exhausted = flag.exhausted;

  const int want = (opt.flag.max_level > 0)
                       ? std::min(opt.flag.max_level, d.order - 1)
                       : d.order - 1;
  bool terminated_nonexhausted = false;
  for (int r = 1; r <= want; ++r) {
    EllipseData e;
    e.level = r;
    const std::size_t k = static_cast<std::size_t>(r - 1);  // step s = r + 1
    if (k < flag.levels.size()) {
      const auto& lvl = flag.levels[k];
      e.rank = lvl.rank;
      const double gaa = dot(lvl.a, lvl.a);
      const double gbb = dot(lvl.b, lvl.b);
      const double gab = dot(lvl.a, lvl.b);
      const double mean = 0.5 * (gaa + gbb);
      const double disc =
          std::sqrt(0.25 * (gaa - gbb) * (gaa - gbb) + gab * gab);
      e.kappa = std::sqrt(std::max(0.0, mean + disc));
      e.mu = std::sqrt(std::max(0.0, mean - disc));
      e.kperp = (lvl.rank == 2) ? 2.0 * e.kappa * e.mu : 0.0;
      e.alpha_sq = std::pow(2.0, r) * (e.kappa * e.kappa + e.mu * e.mu);
      e.a_plus = e.kappa + e.mu;
      e.a_minus = e.kappa - e.mu;
      e.eccentricity =
          (e.kappa > 1e-12)
              ? std::sqrt(std::max(0.0, e.kappa * e.kappa - e.mu * e.mu)) / e.kappa
              : std::numeric_limits<double>::quiet_NaN();
      const double axes_sq = e.kappa * e.kappa + e.mu * e.mu;
      e.rho = (axes_sq > 1e-18)
                  ? e.kperp / axes_sq
                  : std::numeric_limits<double>::quiet_NaN();
      e.hopf = {lvl.hopf_re, lvl.hopf_im};
      e.iso_hopf = 4.0 * std::abs(e.hopf) / vecops::pow_nat(rep.F, r + 1);
      e.iso_axes = e.kappa * e.kappa - e.mu * e.mu;
      const double half_sq = e.alpha_sq / std::pow(2.0, r);
      e.iso_norms =
          std::sqrt(std::max(0.0, half_sq * half_sq - e.kperp * e.kperp));
      if (lvl.rank == 0 && !flag.exhausted) terminated_nonexhausted = true;
    } else if (flag.exhausted) {
      // Past exhaustion every higher form vanishes identically; shape
      // quantities of a vanishing ellipse stay undefined.
      e.rank = 0;
      e.beyond_flag = true;
      e.eccentricity = std::numeric_limits<double>::quiet_NaN();
      e.rho = std::numeric_limits<double>::quiet_NaN();
    } else {
      // The flag stopped early (vanishing form before exhaustion, or the
      // derivative order ran out); higher levels are unknown here.
      e.rank = 0;
      e.beyond_flag = true;
      const double nan = std::numeric_limits<double>::quiet_NaN();
      e.kappa = e.mu = e.kperp = e.alpha_sq = e.a_plus = e.a_minus = nan;
      e.eccentricity = e.rho = nan;
      e.hopf = {nan, nan};
      e.iso_hopf = e.iso_axes = e.iso_norms = nan;
    }
    rep.levels.push_back(e);
  }

  // Intrinsic curvature of each plane subbundle, from the algebraic relation
  // between consecutive levels.
  for (std::size_t k = 0; k < rep.levels.size(); ++k) {
    EllipseData& e = rep.levels[k];
    const int r = e.level;
    const double alpha_next_sq =
        (k + 1 < rep.levels.size()) ? rep.levels[k + 1].alpha_sq
        : rep.exhausted             ? 0.0
                                    : std::numeric_limits<double>::quiet_NaN();
    if (r == 1) {
      e.kstar = e.kperp - 0.5 * guarded_div(alpha_next_sq, e.kperp);
    } else {
      const double kperp_prev = rep.levels[k - 1].kperp;
      const double alpha_prev_sq = rep.levels[k - 1].alpha_sq;
      const double lead =
          guarded_div(e.kperp, kperp_prev * kperp_prev) * alpha_prev_sq /
          std::pow(2.0, r - 2);
      const double tail =
          guarded_div(alpha_next_sq, std::pow(2.0, r) * e.kperp);
      e.kstar = lead - tail;
    }
  }

  rep.tau = 0;
  for (const auto& e : rep.levels)
    if (e.rank == 2) ++rep.tau;

  // Regularity bookkeeping: conformal immersion whose subbundles keep full
  // rank as long as the ambient dimension allows a plane.
  rep.regular = true;
  if (!rep.conformal) {
    rep.regular = false;
    rep.irregular_reason = "not conformal";
  } else if (terminated_nonexhausted) {
    rep.regular = false;
    rep.irregular_reason = "higher fundamental form vanishes before the flag closes";
  } else {
    int used = 3;
    for (const auto& lvl : flag.levels) {
      if (lvl.rank == 2) {
        used += 2;
        continue;
      }
      if (lvl.rank == 1 && rep.dim - used == 1) {
        used += 1;
        continue;
      }
      if (lvl.rank == 0 && flag.exhausted) continue;
      rep.regular = false;
      rep.irregular_reason = "subbundle at level " + std::to_string(lvl.step - 1) +
                             " degenerates to rank " + std::to_string(lvl.rank);
      break;
    }
  }
  return rep;
}

inline FlagReport analyze_jets(const VecJet& f, const AnalyzeOptions& opt = {}) {
  if (f.empty()) throw std::invalid_argument("empty jet vector");
  return analyze_table(make_deriv_table(f, f.front().order()), opt);
}

inline FlagReport analyze_point(const SurfaceSpec& spec, Vec2 p, int order,
                                const AnalyzeOptions& opt = {}) {
  return analyze_jets(eval_jet(spec, p, order), opt);
}

}  // namespace curvelab
