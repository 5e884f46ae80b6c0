#pragma once

// Global bookkeeping on closed surfaces: the Euler characteristic from the
// curvature integral, total zero orders of the per-level invariant fields,
// and the compatibility relations tying both to the Euler numbers of the
// normal plane bundles.
//
// Closed surfaces come in two sampled forms.  A torus is one periodic grid
// covering a fundamental domain.  A sphere is an atlas of two charts related
// by the coordinate inversion z -> 1/z, each sampled on a centered square;
// the smooth weight 1/(1 + |z|^k) equals one minus its own pullback under
// the inversion, so integrating the weighted curvature over both charts
// counts every point exactly once.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "curvelab/grid.hpp"
#include "curvelab/zeros.hpp"

namespace curvelab {

namespace topo_detail {

// Trapezoid-weighted curvature integral; periodic directions need no edge
// correction.  `weight` multiplies the area element pointwise.
inline double curvature_integral(const GridAnalysis& a,
                                 const std::function<double(double, double)>& weight,
                                 int* invalid_nodes = nullptr) {
  const Grid& g = a.grid;
  double sum = 0.0;
  int bad = 0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const FlagReport& rep = a.at(i, j);
      if (!rep.immersed || !std::isfinite(rep.K)) {
        ++bad;
        continue;
      }
      double w = 1.0;
      if (!g.periodic_x && (i == 0 || i == g.nx - 1)) w *= 0.5;
      if (!g.periodic_y && (j == 0 || j == g.ny - 1)) w *= 0.5;
      sum += w * rep.K * rep.F * weight(g.x(i), g.y(j));
    }
  if (invalid_nodes != nullptr) *invalid_nodes = bad;
  return sum * g.hx() * g.hy();
}

}  // namespace topo_detail

// Euler characteristic of a torus sampled on one periodic fundamental domain.
inline double euler_characteristic(const GridAnalysis& a) {
  if (!a.grid.periodic_x || !a.grid.periodic_y)
    throw std::invalid_argument(
        "euler_characteristic: single-grid form needs a doubly periodic grid");
  return topo_detail::curvature_integral(a, [](double, double) { return 1.0; }) /
         (2.0 * M_PI);
}

// Euler characteristic of a sphere from two inversion-related charts.
inline double euler_characteristic(const GridAnalysis& chart1,
                                   const GridAnalysis& chart2,
                                   double weight_exponent = 8.0) {
  const auto weight = [weight_exponent](double x, double y) {
    return 1.0 / (1.0 + std::pow(std::hypot(x, y), weight_exponent));
  };
  return (topo_detail::curvature_integral(chart1, weight) +
          topo_detail::curvature_integral(chart2, weight)) /
         (2.0 * M_PI);
}

// ---------------------------------------------------------------------------
// Zero counts of absolute-value-type fields and the bundle relations.
// ---------------------------------------------------------------------------

struct LevelTopology {
  int level = 0;
  // Classification of the level's Hopf coefficient as a section:
  // "identically_zero", "nowhere_zero", or "vanishing".
  std::string phi_class;
  int n_phi = 0;             // total zero order (0 when nowhere zero)
  bool phi_count_ok = false; // N = -(2 level + 2) chi, for nonzero sections
  int n_a_plus = 0;
  int n_a_minus = 0;
  double chi_normal = std::numeric_limits<double>::quiet_NaN();
  std::string clause;        // which bundle relation applied
  bool clause_ok = false;
  std::string detail;
};

struct TopologyReport {
  double chi = std::numeric_limits<double>::quiet_NaN();
  int m = 0;  // last level covered by the bundle relations
  double coverage = 1.0;  // fraction of grid nodes contributing to chi
  std::vector<LevelTopology> levels;
};

namespace topo_detail {

using RegionFn = std::function<bool(double, double)>;

struct AVClass {
  std::string cls;
  int total = 0;
  double sup = 0.0;
};

// Classify a nonnegative field over a region and count zero orders if it
// vanishes somewhere without vanishing identically.
inline AVClass classify_and_count(const ScalarField& u, const RegionFn& region,
                                  double ref_sup) {
  const Grid& g = u.grid;
  double sup = 0.0;
  double min = std::numeric_limits<double>::infinity();
  int nodes = 0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!u.ok(i, j) || !region(g.x(i), g.y(j))) continue;
      const double v = u.at(i, j);
      if (!std::isfinite(v)) continue;
      ++nodes;
      sup = std::max(sup, v);
      min = std::min(min, v);
    }
  AVClass out;
  out.sup = sup;
  if (nodes == 0 || sup <= 1e-8 * std::max(ref_sup, 1e-300)) {
    out.cls = "identically_zero";
    return out;
  }
  if (min > 1e-4 * sup) {
    out.cls = "nowhere_zero";
    return out;
  }
  out.cls = "vanishing";
  const ZeroOrderReport rep = zero_orders(u);
  for (const auto& z : rep.zeros)
    if (region(z.x, z.y)) out.total += z.order;
  return out;
}

inline bool near_integer(double v, double tol) {
  return std::abs(v - std::round(v)) < tol;
}

inline LevelTopology level_relations(const GridAnalysis& a1,
                                     const GridAnalysis* a2,
                                     const RegionFn& r1, const RegionFn& r2,
                                     int level, int m, double chi, double tol) {
  LevelTopology lt;
  lt.level = level;
  const std::string suffix = "_" + std::to_string(level);

  // Reference scale making "the section vanishes identically" meaningful for
  // the unnormalized Hopf coefficient.
  const auto hopf_scale = [&](const GridAnalysis& a) {
    const ScalarField kap = sample_field(a, "kappa" + suffix);
    const ScalarField mu = sample_field(a, "mu" + suffix);
    const ScalarField F = sample_field(a, "F");
    double s = 0.0;
    for (std::size_t k = 0; k < kap.v.size(); ++k) {
      if (!kap.valid[k] || !mu.valid[k] || !F.valid[k]) continue;
      const double axes = kap.v[k] * kap.v[k] + mu.v[k] * mu.v[k];
      s = std::max(s, axes * std::pow(F.v[k], level + 1) / 4.0);
    }
    return s;
  };

  struct ChartData {
    AVClass phi, ap, am;
  };
  const auto chart_counts = [&](const GridAnalysis& a, const RegionFn& region) {
    ChartData d;
    d.phi = classify_and_count(sample_field(a, "hopf_abs" + suffix), region,
                               hopf_scale(a));
    const ScalarField aplus = sample_field(a, "a_plus" + suffix);
    const double ap_sup = field_stats(aplus).sup_abs;
    d.ap = classify_and_count(aplus, region, ap_sup);
    d.am = classify_and_count(sample_field(a, "a_minus" + suffix), region, ap_sup);
    return d;
  };

  const ScalarField probe = sample_field(a1, "kappa" + suffix);
  if (field_stats(probe).valid_count == 0) {
    lt.clause = "none";
    lt.detail = "no invariant data at this level";
    return lt;
  }

  ChartData c1 = chart_counts(a1, r1);
  lt.phi_class = c1.phi.cls;
  lt.n_phi = c1.phi.total;
  lt.n_a_plus = c1.ap.total;
  lt.n_a_minus = c1.am.total;
  if (a2 != nullptr) {
    ChartData c2 = chart_counts(*a2, r2);
    // A section vanishing identically does so in both charts; otherwise the
    // stronger classification wins and the counts add up.
    if (c2.phi.cls != lt.phi_class &&
        (lt.phi_class == "identically_zero" || c2.phi.cls == "vanishing"))
      lt.phi_class = c2.phi.cls;
    lt.n_phi += c2.phi.total;
    lt.n_a_plus += c2.ap.total;
    lt.n_a_minus += c2.am.total;
  }

  std::ostringstream os;
  const bool phi_zero = lt.phi_class == "identically_zero";
  if (!phi_zero) {
    const double expected = -(2.0 * level + 2.0) * chi;
    lt.phi_count_ok =
        near_integer(expected, tol) && lt.n_phi == std::lround(expected);
    os << "N(hopf) = " << lt.n_phi << " vs " << expected << "; ";
  } else {
    lt.phi_count_ok = true;  // vacuous for the zero section
    os << "hopf section vanishes identically; ";
  }

  if (phi_zero) {
    lt.clause = "isotropic";
    lt.chi_normal = (level + 1) * chi + lt.n_a_plus;
    lt.clause_ok = near_integer(lt.chi_normal, tol);
    os << "bundle Euler number " << lt.chi_normal;
  } else if (level < m) {
    lt.clause = "interior";
    lt.chi_normal = 0.0;
    const double expected = -(level + 1.0) * chi;
    lt.clause_ok = near_integer(expected, tol) &&
                   lt.n_a_plus == std::lround(expected) &&
                   lt.n_a_minus == std::lround(expected);
    os << "N(a+) = " << lt.n_a_plus << ", N(a-) = " << lt.n_a_minus << " vs "
       << expected;
  } else {
    lt.clause = "last";
    lt.chi_normal = 0.5 * (lt.n_a_plus - lt.n_a_minus);
    const double expected = -(level + 1.0) * chi;
    lt.clause_ok =
        near_integer(lt.chi_normal, tol) &&
        std::abs(0.5 * (lt.n_a_plus + lt.n_a_minus) - expected) < tol;
    os << "N(a+) = " << lt.n_a_plus << ", N(a-) = " << lt.n_a_minus
       << ", mean vs " << expected << ", bundle Euler number " << lt.chi_normal;
  }
  lt.detail = os.str();
  return lt;
}

inline TopologyReport build_report(const GridAnalysis& a1, const GridAnalysis* a2,
                                   const RegionFn& r1, const RegionFn& r2,
                                   double chi, double coverage, double tol) {
  TopologyReport rep;
  rep.chi = chi;
  rep.coverage = coverage;
  rep.m = std::max(0, (a1.dim - 2) / 2);
  const int available = a1.order - 1;
  for (int r = 1; r <= std::min(rep.m, available); ++r)
    rep.levels.push_back(level_relations(a1, a2, r1, r2, r, rep.m, chi, tol));
  return rep;
}

}  // namespace topo_detail

// Torus form: one periodic grid covers the surface.
inline TopologyReport global_topology(const GridAnalysis& a,
                                      double integer_tol = 0.1) {
  int bad = 0;
  const double integral =
      topo_detail::curvature_integral(a, [](double, double) { return 1.0; }, &bad);
  const double chi = integral / (2.0 * M_PI);
  const double coverage = 1.0 - static_cast<double>(bad) / a.grid.size();
  const auto everywhere = [](double, double) { return true; };
  return topo_detail::build_report(a, nullptr, everywhere, everywhere, chi,
                                   coverage, integer_tol);
}

// Sphere form: two charts related by coordinate inversion.  Zero counting
// splits the sphere along the unit circle: the closed unit disk of the first
// chart and the open unit disk of the second.
inline TopologyReport global_topology(const GridAnalysis& chart1,
                                      const GridAnalysis& chart2,
                                      double weight_exponent = 8.0,
                                      double integer_tol = 0.1) {
  if (chart1.grid.periodic_x || chart1.grid.periodic_y || chart2.grid.periodic_x ||
      chart2.grid.periodic_y)
    throw std::invalid_argument("global_topology: atlas charts cannot be periodic");
  const auto weight = [weight_exponent](double x, double y) {
    return 1.0 / (1.0 + std::pow(std::hypot(x, y), weight_exponent));
  };
  int bad1 = 0, bad2 = 0;
  const double integral = topo_detail::curvature_integral(chart1, weight, &bad1) +
                          topo_detail::curvature_integral(chart2, weight, &bad2);
  const double chi = integral / (2.0 * M_PI);
  const double coverage =
      1.0 - static_cast<double>(bad1 + bad2) /
                (chart1.grid.size() + chart2.grid.size());
  const auto inner = [](double x, double y) { return std::hypot(x, y) <= 1.0; };
  const auto outer = [](double x, double y) { return std::hypot(x, y) < 1.0; };
  return topo_detail::build_report(chart1, &chart2, inner, outer, chi, coverage,
                                   integer_tol);
}

}  // namespace curvelab
