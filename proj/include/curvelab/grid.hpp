#pragma once

// Regular sampling grids over a parameter rectangle, pointwise analysis of a
// surface on a grid, named invariant fields, and the discrete operators
// (central derivatives, five-point Laplacian, dbar) used by the identity
// checks.  Every field carries a validity mask; discrete operators only
// produce a value where their whole stencil is valid, so masks shrink at
// non-periodic boundaries and around excluded nodes.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "curvelab/flag.hpp"
#include "curvelab/octonion.hpp"
#include "curvelab/surface.hpp"

namespace curvelab {

struct Grid {
  int nx = 0, ny = 0;
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  bool periodic_x = false, periodic_y = false;

  // Periodic directions sample one full period without repeating the seam.
  double hx() const { return (x1 - x0) / (periodic_x ? nx : nx - 1); }
  double hy() const { return (y1 - y0) / (periodic_y ? ny : ny - 1); }
  double x(int i) const { return x0 + hx() * i; }
  double y(int j) const { return y0 + hy() * j; }
  int index(int i, int j) const { return j * nx + i; }
  int size() const { return nx * ny; }

  int wrap_x(int i) const {
    if (!periodic_x) return i;
    i %= nx;
    return i < 0 ? i + nx : i;
  }
  int wrap_y(int j) const {
    if (!periodic_y) return j;
    j %= ny;
    return j < 0 ? j + ny : j;
  }
  bool in_range_x(int i) const { return periodic_x || (i >= 0 && i < nx); }
  bool in_range_y(int j) const { return periodic_y || (j >= 0 && j < ny); }
};

inline Grid make_grid(const SurfaceSpec& spec, int nx, int ny) {
  if (nx < 8 || ny < 8) throw std::invalid_argument("grid must be at least 8x8");
  Grid g;
  g.nx = nx;
  g.ny = ny;
  g.x0 = spec.domain.x0;
  g.x1 = spec.domain.x1;
  g.y0 = spec.domain.y0;
  g.y1 = spec.domain.y1;
  if (spec.periodic) {
    // The grid is periodic only when the requested window is exactly one
    // period; a sub- or super-window is sampled as an ordinary rectangle.
    g.periodic_x = std::abs((g.x1 - g.x0) - spec.period_x) < 1e-12 * spec.period_x;
    g.periodic_y = std::abs((g.y1 - g.y0) - spec.period_y) < 1e-12 * spec.period_y;
  }
  return g;
}

template <class T>
struct Field {
  Grid grid;
  std::vector<T> v;
  std::vector<std::uint8_t> valid;

  static Field invalid_like(const Grid& g) {
    Field f;
    f.grid = g;
    f.v.assign(static_cast<std::size_t>(g.size()), T{});
    f.valid.assign(static_cast<std::size_t>(g.size()), 0);
    return f;
  }
  T& at(int i, int j) { return v[static_cast<std::size_t>(grid.index(i, j))]; }
  const T& at(int i, int j) const {
    return v[static_cast<std::size_t>(grid.index(i, j))];
  }
  bool ok(int i, int j) const {
    return valid[static_cast<std::size_t>(grid.index(i, j))] != 0;
  }
  void set(int i, int j, T value, bool is_valid = true) {
    const auto k = static_cast<std::size_t>(grid.index(i, j));
    v[k] = value;
    valid[k] = is_valid ? 1 : 0;
  }
};

using ScalarField = Field<double>;
using ComplexField = Field<std::complex<double>>;

struct FieldStats {
  double sup_abs = 0.0;
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
  int valid_count = 0;
};

inline FieldStats field_stats(const ScalarField& f) {
  FieldStats s;
  for (std::size_t k = 0; k < f.v.size(); ++k) {
    if (!f.valid[k] || !std::isfinite(f.v[k])) continue;
    ++s.valid_count;
    s.sup_abs = std::max(s.sup_abs, std::abs(f.v[k]));
    s.min = std::min(s.min, f.v[k]);
    s.max = std::max(s.max, f.v[k]);
  }
  return s;
}

inline double sup_abs(const ComplexField& f) {
  double s = 0.0;
  for (std::size_t k = 0; k < f.v.size(); ++k)
    if (f.valid[k] && std::isfinite(std::abs(f.v[k])))
      s = std::max(s, std::abs(f.v[k]));
  return s;
}

// ---------------------------------------------------------------------------
// Grid-wide pointwise analysis.
// ---------------------------------------------------------------------------

struct GridAnalysis {
  Grid grid;
  int dim = 0;
  int order = 0;
  std::vector<FlagReport> nodes;  // row-major, one report per node
  std::vector<double> ph_res;     // pseudoholomorphy residual, NaN if undefined

  const FlagReport& at(int i, int j) const {
    return nodes[static_cast<std::size_t>(grid.index(i, j))];
  }
};

namespace grid_detail {

inline FlagReport invalid_report(int dim, int order) {
  FlagReport rep;
  rep.dim = dim;
  rep.order = order;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  rep.F = rep.lambda = rep.K = nan;
  rep.conf_res = rep.min_res = rep.unit_res = nan;
  rep.w12_x = rep.w12_y = nan;
  for (int r = 1; r <= std::max(1, order - 1); ++r) {
    EllipseData e;
    e.level = r;
    e.beyond_flag = true;
    e.kappa = e.mu = e.kperp = e.alpha_sq = e.a_plus = e.a_minus = nan;
    e.eccentricity = e.rho = e.kstar = nan;
    e.hopf = {nan, nan};
    e.iso_hopf = e.iso_axes = e.iso_norms = nan;
    rep.levels.push_back(e);
  }
  return rep;
}

inline double node_ph_res(const VecJet& jets) {
  if (jets.size() != 7) return std::numeric_limits<double>::quiet_NaN();
  std::array<double, 7> pos{}, fx{}, fy{};
  for (int i = 0; i < 7; ++i) {
    pos[i] = jets[static_cast<std::size_t>(i)].value();
    fx[i] = jets[static_cast<std::size_t>(i)].partial(1, 0);
    fy[i] = jets[static_cast<std::size_t>(i)].partial(0, 1);
  }
  try {
    return pseudoholomorphy_from_derivatives(pos, fx, fy);
  } catch (const std::exception&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace grid_detail

inline GridAnalysis analyze_grid(const SurfaceSpec& spec, const Grid& grid,
                                 int order, const AnalyzeOptions& opt = {}) {
  if (order < 3 || order > 10)
    throw std::invalid_argument("analysis order must lie in [3, 10]");
  GridAnalysis out;
  out.grid = grid;
  out.dim = spec.dim;
  out.order = order;
  out.nodes.resize(static_cast<std::size_t>(grid.size()));
  out.ph_res.assign(static_cast<std::size_t>(grid.size()),
                    std::numeric_limits<double>::quiet_NaN());

  const auto run_rows = [&](int j_begin, int j_end) {
    for (int j = j_begin; j < j_end; ++j)
      for (int i = 0; i < grid.nx; ++i) {
        const std::size_t k = static_cast<std::size_t>(grid.index(i, j));
        try {
          const VecJet jets = eval_jet(spec, {grid.x(i), grid.y(j)}, order);
          out.nodes[k] = analyze_table(make_deriv_table(jets, order), opt);
          out.ph_res[k] = grid_detail::node_ph_res(jets);
        } catch (const std::exception&) {
          out.nodes[k] = grid_detail::invalid_report(spec.dim, order);
        }
      }
  };

  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  const int workers = std::max(1, std::min({hw, grid.ny, 16}));
  if (workers == 1) {
    run_rows(0, grid.ny);
  } else {
    std::vector<std::thread> pool;
    const int rows_per = (grid.ny + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int jb = w * rows_per;
      const int je = std::min(grid.ny, jb + rows_per);
      if (jb >= je) break;
      pool.emplace_back(run_rows, jb, je);
    }
    for (auto& t : pool) t.join();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Named fields.
// ---------------------------------------------------------------------------

inline ScalarField map_nodes(const GridAnalysis& a,
                             const std::function<double(const FlagReport&)>& fn) {
  ScalarField f = ScalarField::invalid_like(a.grid);
  for (std::size_t k = 0; k < a.nodes.size(); ++k) {
    const double value = fn(a.nodes[k]);
    f.v[k] = value;
    f.valid[k] = (a.nodes[k].immersed && std::isfinite(value)) ? 1 : 0;
  }
  return f;
}

namespace grid_detail {

// Splits "kappa_2" into {"kappa", 2}; returns level 0 when there is no
// numeric suffix.
inline std::pair<std::string, int> split_level(const std::string& id) {
  const auto pos = id.find_last_of('_');
  if (pos == std::string::npos || pos + 1 == id.size()) return {id, 0};
  int level = 0;
  for (std::size_t k = pos + 1; k < id.size(); ++k) {
    if (id[k] < '0' || id[k] > '9') return {id, 0};
    level = level * 10 + (id[k] - '0');
  }
  return {id.substr(0, pos), level};
}

inline const EllipseData* level_of(const FlagReport& rep, int r) {
  if (r < 1 || static_cast<std::size_t>(r) > rep.levels.size()) return nullptr;
  return &rep.levels[static_cast<std::size_t>(r - 1)];
}

}  // namespace grid_detail

// Scalar invariant fields by name: F, K, lambda, conf_res, min_res,
// unit_res, w12_x, w12_y, pseudoholomorphy, regular, tau, subharmonic_1,
// subharmonic_2, and the per-level
// families kappa_r, mu_r, Kperp_r, a_plus_r, a_minus_r, alpha_norm_r,
// kstar_r, eccentricity_r, rho_r, hopf_abs_r.  alpha_norm_r is the squared
// norm of the (r+1)-th fundamental form, the one whose ellipse spans the
// r-th normal subbundle.
inline ScalarField sample_field(const GridAnalysis& a, const std::string& id) {
  using grid_detail::level_of;
  if (id == "F") return map_nodes(a, [](const FlagReport& r) { return r.F; });
  if (id == "K") return map_nodes(a, [](const FlagReport& r) { return r.K; });
  if (id == "lambda")
    return map_nodes(a, [](const FlagReport& r) { return r.lambda; });
  if (id == "conf_res")
    return map_nodes(a, [](const FlagReport& r) { return r.conf_res; });
  if (id == "min_res")
    return map_nodes(a, [](const FlagReport& r) { return r.min_res; });
  if (id == "unit_res")
    return map_nodes(a, [](const FlagReport& r) { return r.unit_res; });
  if (id == "w12_x")
    return map_nodes(a, [](const FlagReport& r) { return r.w12_x; });
  if (id == "w12_y")
    return map_nodes(a, [](const FlagReport& r) { return r.w12_y; });
  if (id == "regular")
    return map_nodes(a, [](const FlagReport& r) { return r.regular ? 1.0 : 0.0; });
  if (id == "tau")
    return map_nodes(a, [](const FlagReport& r) { return static_cast<double>(r.tau); });
  if (id == "pseudoholomorphy") {
    ScalarField f = ScalarField::invalid_like(a.grid);
    for (std::size_t k = 0; k < a.ph_res.size(); ++k) {
      f.v[k] = a.ph_res[k];
      f.valid[k] = std::isfinite(a.ph_res[k]) ? 1 : 0;
    }
    return f;
  }
  // Combinations whose log-Laplacian carries a sign on subsets of the moduli
  // space; exposed so maximum-principle style experiments can run on them.
  if (id == "subharmonic_1")
    return map_nodes(a, [](const FlagReport& rep) {
      const EllipseData* e = grid_detail::level_of(rep, 1);
      if (e == nullptr) return std::numeric_limits<double>::quiet_NaN();
      const double disc =
          e->alpha_sq * e->alpha_sq / 4.0 - e->kperp * e->kperp;
      const double denom = std::pow(1.0 - rep.K, 4);
      return disc * disc * disc / denom;
    });
  if (id == "subharmonic_2")
    return map_nodes(a, [](const FlagReport& rep) {
      const EllipseData* e = grid_detail::level_of(rep, 2);
      if (e == nullptr) return std::numeric_limits<double>::quiet_NaN();
      const double num =
          e->alpha_sq * e->alpha_sq - 16.0 * e->kperp * e->kperp;
      return num / ((1.0 - rep.K) * (1.0 - rep.K));
    });

  const auto [base, level] = grid_detail::split_level(id);
  if (level >= 1) {
    const auto pick = [&](const std::function<double(const EllipseData&)>& get) {
      return map_nodes(a, [&, get](const FlagReport& rep) {
        const EllipseData* e = level_of(rep, level);
        return e ? get(*e) : std::numeric_limits<double>::quiet_NaN();
      });
    };
    if (base == "kappa") return pick([](const EllipseData& e) { return e.kappa; });
    if (base == "mu") return pick([](const EllipseData& e) { return e.mu; });
    if (base == "Kperp") return pick([](const EllipseData& e) { return e.kperp; });
    if (base == "a_plus") return pick([](const EllipseData& e) { return e.a_plus; });
    if (base == "a_minus") return pick([](const EllipseData& e) { return e.a_minus; });
    if (base == "alpha_norm")
      return pick([](const EllipseData& e) { return e.alpha_sq; });
    if (base == "kstar") return pick([](const EllipseData& e) { return e.kstar; });
    if (base == "eccentricity")
      return pick([](const EllipseData& e) { return e.eccentricity; });
    if (base == "rho") return pick([](const EllipseData& e) { return e.rho; });
    if (base == "hopf_abs")
      return pick([](const EllipseData& e) { return std::abs(e.hopf); });
  }
  throw std::invalid_argument("unknown field id: " + id);
}

inline ComplexField sample_complex_field(const GridAnalysis& a,
                                         const std::string& id) {
  const auto [base, level] = grid_detail::split_level(id);
  if (base != "hopf" || level < 1)
    throw std::invalid_argument("unknown complex field id: " + id);
  ComplexField f = ComplexField::invalid_like(a.grid);
  for (std::size_t k = 0; k < a.nodes.size(); ++k) {
    const EllipseData* e = grid_detail::level_of(a.nodes[k], level);
    if (e == nullptr) continue;
    f.v[k] = e->hopf;
    f.valid[k] = (a.nodes[k].immersed && std::isfinite(e->hopf.real()) &&
                  std::isfinite(e->hopf.imag()))
                     ? 1
                     : 0;
  }
  return f;
}

// ---------------------------------------------------------------------------
// Discrete operators (second-order central stencils).
// ---------------------------------------------------------------------------

namespace grid_detail {

template <class T>
bool stencil_ok(const Field<T>& f, int i, int j) {
  return f.grid.in_range_x(i) && f.grid.in_range_y(j) &&
         f.ok(f.grid.wrap_x(i), f.grid.wrap_y(j));
}

template <class T>
const T& sten(const Field<T>& f, int i, int j) {
  return f.at(f.grid.wrap_x(i), f.grid.wrap_y(j));
}

}  // namespace grid_detail

template <class T>
Field<T> dx_central(const Field<T>& u) {
  Field<T> out = Field<T>::invalid_like(u.grid);
  const double inv2h = 1.0 / (2.0 * u.grid.hx());
  for (int j = 0; j < u.grid.ny; ++j)
    for (int i = 0; i < u.grid.nx; ++i) {
      if (!u.ok(i, j) || !grid_detail::stencil_ok(u, i + 1, j) ||
          !grid_detail::stencil_ok(u, i - 1, j))
        continue;
      out.set(i, j,
              (grid_detail::sten(u, i + 1, j) - grid_detail::sten(u, i - 1, j)) *
                  inv2h);
    }
  return out;
}

template <class T>
Field<T> dy_central(const Field<T>& u) {
  Field<T> out = Field<T>::invalid_like(u.grid);
  const double inv2h = 1.0 / (2.0 * u.grid.hy());
  for (int j = 0; j < u.grid.ny; ++j)
    for (int i = 0; i < u.grid.nx; ++i) {
      if (!u.ok(i, j) || !grid_detail::stencil_ok(u, i, j + 1) ||
          !grid_detail::stencil_ok(u, i, j - 1))
        continue;
      out.set(i, j,
              (grid_detail::sten(u, i, j + 1) - grid_detail::sten(u, i, j - 1)) *
                  inv2h);
    }
  return out;
}

// Flat five-point Laplacian u_xx + u_yy.
template <class T>
Field<T> laplace0(const Field<T>& u) {
  Field<T> out = Field<T>::invalid_like(u.grid);
  const double ihx2 = 1.0 / (u.grid.hx() * u.grid.hx());
  const double ihy2 = 1.0 / (u.grid.hy() * u.grid.hy());
  for (int j = 0; j < u.grid.ny; ++j)
    for (int i = 0; i < u.grid.nx; ++i) {
      if (!u.ok(i, j) || !grid_detail::stencil_ok(u, i + 1, j) ||
          !grid_detail::stencil_ok(u, i - 1, j) ||
          !grid_detail::stencil_ok(u, i, j + 1) ||
          !grid_detail::stencil_ok(u, i, j - 1))
        continue;
      const T cx = (grid_detail::sten(u, i + 1, j) - 2.0 * u.at(i, j) +
                    grid_detail::sten(u, i - 1, j)) *
                   ihx2;
      const T cy = (grid_detail::sten(u, i, j + 1) - 2.0 * u.at(i, j) +
                    grid_detail::sten(u, i, j - 1)) *
                   ihy2;
      out.set(i, j, cx + cy);
    }
  return out;
}

// Metric Laplacian: laplace0(u) / F.
inline ScalarField laplace_beltrami(const ScalarField& u, const ScalarField& F) {
  ScalarField lap = laplace0(u);
  ScalarField out = ScalarField::invalid_like(u.grid);
  for (std::size_t k = 0; k < lap.v.size(); ++k) {
    if (!lap.valid[k] || !F.valid[k] || !(F.v[k] > 0.0)) continue;
    out.v[k] = lap.v[k] / F.v[k];
    out.valid[k] = 1;
  }
  return out;
}

inline ScalarField log_field(const ScalarField& u) {
  ScalarField out = ScalarField::invalid_like(u.grid);
  for (std::size_t k = 0; k < u.v.size(); ++k) {
    if (!u.valid[k] || !(u.v[k] > 0.0)) continue;
    out.v[k] = std::log(u.v[k]);
    out.valid[k] = 1;
  }
  return out;
}

// dbar u = (u_x + i u_y) / 2 with central differences; vanishes to O(h^2)
// on holomorphic fields.
inline ComplexField dbar_field(const ComplexField& u) {
  const ComplexField ux = dx_central(u);
  const ComplexField uy = dy_central(u);
  ComplexField out = ComplexField::invalid_like(u.grid);
  const std::complex<double> half_i(0.0, 0.5);
  for (std::size_t k = 0; k < u.v.size(); ++k) {
    if (!ux.valid[k] || !uy.valid[k]) continue;
    out.v[k] = 0.5 * ux.v[k] + half_i * uy.v[k];
    out.valid[k] = 1;
  }
  return out;
}

}  // namespace curvelab
