#pragma once

// Grid-level verification of the differential identities satisfied by the
// pointwise invariants: the Gauss relation, the log-Laplace equations tying
// curvature to the higher fundamental forms, the algebraic expression for
// the intrinsic curvature of the normal plane subbundles, isotropy
// cross-checks, and the adapted-frame connection identities.
//
// Checks consume an IdentityInputs bundle rather than a surface, so the same
// code verifies fields sampled from a parametrization and fields produced
// synthetically (for example from an ODE solution).  Discrete derivatives
// are second order, so residuals of genuinely nonconstant fields scale like
// h^2; tolerances follow tol = max(floor, scale * h^2) and can be overridden
// through the CURVELAB_TOL_CONFIG environment variable: the path of a JSON
// file (or the JSON text itself) mapping check ids to
// {"floor": ..., "scale": ...}.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "curvelab/grid.hpp"

namespace curvelab {

struct IdentityInputs {
  Grid grid;
  int levels = 0;                 // ellipse levels available
  ScalarField F, K;
  ScalarField minimal_mask;       // 1.0 where the minimality prerequisites hold
  ScalarField w12_x, w12_y;
  std::vector<ScalarField> alpha_sq;  // [r-1] -> squared norm at level r
  std::vector<ScalarField> kperp;
  std::vector<ScalarField> kstar;
  std::vector<ScalarField> kappa;
  std::vector<ScalarField> mu;
  std::vector<std::array<ScalarField, 3>> iso;  // hopf/axes/norms proxies
  std::vector<ComplexField> hopf;

  const ScalarField& alpha_at(int r) const { return alpha_sq[static_cast<std::size_t>(r - 1)]; }
  const ScalarField& kperp_at(int r) const { return kperp[static_cast<std::size_t>(r - 1)]; }
  const ScalarField& kstar_at(int r) const { return kstar[static_cast<std::size_t>(r - 1)]; }
};

inline IdentityInputs make_identity_inputs(const GridAnalysis& a) {
  IdentityInputs in;
  in.grid = a.grid;
  in.levels = a.order - 1;
  in.F = sample_field(a, "F");
  in.K = sample_field(a, "K");
  in.w12_x = sample_field(a, "w12_x");
  in.w12_y = sample_field(a, "w12_y");
  in.minimal_mask = map_nodes(a, [](const FlagReport& r) {
    return (r.immersed && r.conformal && r.minimal) ? 1.0 : 0.0;
  });
  for (int r = 1; r <= in.levels; ++r) {
    const std::string suffix = "_" + std::to_string(r);
    in.alpha_sq.push_back(sample_field(a, "alpha_norm" + suffix));
    in.kperp.push_back(sample_field(a, "Kperp" + suffix));
    in.kstar.push_back(sample_field(a, "kstar" + suffix));
    in.kappa.push_back(sample_field(a, "kappa" + suffix));
    in.mu.push_back(sample_field(a, "mu" + suffix));
    in.hopf.push_back(sample_complex_field(a, "hopf" + suffix));
    std::array<ScalarField, 3> iso{ScalarField::invalid_like(a.grid),
                                   ScalarField::invalid_like(a.grid),
                                   ScalarField::invalid_like(a.grid)};
    for (std::size_t k = 0; k < a.nodes.size(); ++k) {
      const FlagReport& rep = a.nodes[k];
      if (!rep.immersed || static_cast<std::size_t>(r) > rep.levels.size()) continue;
      const EllipseData& e = rep.levels[static_cast<std::size_t>(r - 1)];
      const double vals[3] = {e.iso_hopf, e.iso_axes, e.iso_norms};
      for (int q = 0; q < 3; ++q) {
        if (!std::isfinite(vals[q])) continue;
        iso[static_cast<std::size_t>(q)].v[k] = vals[q];
        iso[static_cast<std::size_t>(q)].valid[k] = 1;
      }
    }
    in.iso.push_back(std::move(iso));
  }
  return in;
}

// ---------------------------------------------------------------------------
// Tolerances.
// ---------------------------------------------------------------------------

struct Tolerance {
  double floor = 1e-7;
  double scale = 0.0;  // coefficient of h^2
  double value(double h) const { return std::max(floor, scale * h * h); }
};

namespace identity_detail {

inline std::string family_of(const std::string& id) {
  // prop5_2 -> prop5, isotropy_1 -> isotropy, prop3i_2 -> prop3i
  const auto pos = id.find_last_of('_');
  if (pos == std::string::npos) return id;
  for (std::size_t k = pos + 1; k < id.size(); ++k)
    if (id[k] < '0' || id[k] > '9') return id;
  return id.substr(0, pos);
}

inline int level_suffix(const std::string& id) {
  const auto pos = id.find_last_of('_');
  if (pos == std::string::npos) return 0;
  int lvl = 0;
  for (std::size_t k = pos + 1; k < id.size(); ++k) {
    if (id[k] < '0' || id[k] > '9') return 0;
    lvl = lvl * 10 + (id[k] - '0');
  }
  return lvl;
}

inline const std::map<std::string, Tolerance>& builtin_tolerances() {
  // Scale factors are calibrated against measured discretization residuals:
  // the single log-Laplace residuals run at about 0.5 h^2 on the bundled
  // closed-form examples and the connection-form residual at about 1.0 h^2,
  // so a factor of 5 leaves margin while staying well below the O(1) size of
  // a genuine violation on any grid with h <= 0.3.  The nested log-Laplace
  // residual compounds two stencil errors (about 72 h^2 on the synthetic
  // bracket fields), and the curvature consistency probe inherits fourth
  // derivatives of log F (about 24 h^2 on a reparametrized torus).  The
  // holomorphy residual carries the third derivative of the Hopf coefficient
  // relative to its sup; the branch-point torus (coefficient 8 z^6) measures
  // about 0.33 h^2, so unit scale keeps a 3x margin there while a genuinely
  // non-holomorphic field sits at O(h), two orders above the bound.
  static const std::map<std::string, Tolerance> table = {
      {"gauss_eq", {1e-7, 0.0}},
      {"star", {1e-7, 5.0}},
      {"starstar", {1e-7, 5.0}},
      {"ricci_s3", {1e-7, 5.0}},
      {"noniso", {1e-6, 100.0}},
      {"trik", {1e-9, 0.0}},        // strict-positivity margin
      {"prop5", {1e-6, 5.0}},
      {"prop3i", {1e-6, 5.0}},
      {"isotropy", {1e-6, 0.0}},    // relative binarization threshold
      {"connection_forms", {1e-6, 5.0}},
      {"curvature_consistency", {1e-8, 40.0}},
      {"holomorphy", {1e-9, 1.0}},
  };
  return table;
}

}  // namespace identity_detail

inline std::map<std::string, Tolerance> parse_tol_config(const std::string& text) {
  std::map<std::string, Tolerance> t;
  const nlohmann::json j = nlohmann::json::parse(text);  // malformed -> throw
  for (auto it = j.begin(); it != j.end(); ++it) {
    Tolerance tol;
    if (it.value().contains("floor")) tol.floor = it.value()["floor"].get<double>();
    if (it.value().contains("scale")) tol.scale = it.value()["scale"].get<double>();
    t[it.key()] = tol;
  }
  return t;
}

namespace identity_detail {

inline const std::map<std::string, Tolerance>& env_tolerances() {
  static const std::map<std::string, Tolerance> table = [] {
    const char* cfg = std::getenv("CURVELAB_TOL_CONFIG");
    if (cfg == nullptr || *cfg == '\0') return std::map<std::string, Tolerance>{};
    // The variable usually names a file; raw JSON text is accepted too.
    if (std::ifstream in{cfg}; in) {
      std::ostringstream text;
      text << in.rdbuf();
      return parse_tol_config(text.str());
    }
    return parse_tol_config(cfg);
  }();
  return table;
}

}  // namespace identity_detail

inline Tolerance tolerance_for(const std::string& id) {
  const std::string family = identity_detail::family_of(id);
  const auto& env = identity_detail::env_tolerances();
  if (auto it = env.find(id); it != env.end()) return it->second;
  if (auto it = env.find(family); it != env.end()) return it->second;
  const auto& builtin = identity_detail::builtin_tolerances();
  if (auto it = builtin.find(family); it != builtin.end()) return it->second;
  throw std::invalid_argument("unknown check id: " + id);
}

// ---------------------------------------------------------------------------
// Check reports.
// ---------------------------------------------------------------------------

struct CheckReport {
  std::string id;
  bool applicable = false;  // some node satisfied the preconditions
  bool passed = false;
  double sup_residual = std::numeric_limits<double>::quiet_NaN();
  double tolerance = 0.0;
  int nodes_checked = 0;
  int nodes_failed = 0;
  std::string detail;
};

struct CheckOptions {
  double tol_override = 0.0;  // > 0 replaces the table tolerance
};

namespace identity_detail {

inline ScalarField mul_mask(const ScalarField& f, const ScalarField& mask) {
  ScalarField out = f;
  for (std::size_t k = 0; k < out.v.size(); ++k)
    if (!mask.valid[k] || mask.v[k] == 0.0) out.valid[k] = 0;
  return out;
}

inline CheckReport finish(const std::string& id, const ScalarField& residual,
                          double tol) {
  CheckReport rep;
  rep.id = id;
  rep.tolerance = tol;
  const FieldStats s = field_stats(residual);
  rep.nodes_checked = s.valid_count;
  rep.applicable = s.valid_count > 0;
  rep.sup_residual = rep.applicable ? s.sup_abs : std::numeric_limits<double>::quiet_NaN();
  if (rep.applicable) {
    for (std::size_t k = 0; k < residual.v.size(); ++k)
      if (residual.valid[k] &&
          (!std::isfinite(residual.v[k]) || std::abs(residual.v[k]) > tol))
        ++rep.nodes_failed;
    rep.passed = rep.nodes_failed == 0;
    std::ostringstream os;
    os << "sup |residual| = " << rep.sup_residual << " over " << rep.nodes_checked
       << " nodes, tol " << tol;
    rep.detail = os.str();
  } else {
    rep.passed = false;
    rep.detail = "no node satisfies the preconditions";
  }
  return rep;
}

// log(1 - K) masked to the region where it exists.
inline ScalarField log_one_minus_K(const IdentityInputs& in) {
  ScalarField arg = ScalarField::invalid_like(in.grid);
  for (std::size_t k = 0; k < in.K.v.size(); ++k) {
    if (!in.K.valid[k]) continue;
    const double v = 1.0 - in.K.v[k];
    if (!(v > 1e-14)) continue;
    arg.v[k] = v;
    arg.valid[k] = 1;
  }
  return log_field(arg);
}

inline bool iso_flag(double proxy, double kap, double m, double threshold) {
  const double scale = kap * kap + m * m;
  return proxy <= threshold * std::max(scale, 1e-300);
}

}  // namespace identity_detail

inline CheckReport check_identity(const IdentityInputs& in, const std::string& id,
                                  const CheckOptions& opt = {}) {
  using namespace identity_detail;
  const double h = std::max(in.grid.hx(), in.grid.hy());
  const Tolerance tol_entry = tolerance_for(id);
  const double tol = opt.tol_override > 0.0 ? opt.tol_override : tol_entry.value(h);
  const std::string family = family_of(id);
  const int level = level_suffix(id);

  if (family == "gauss_eq") {
    if (in.levels < 1) throw std::invalid_argument("gauss_eq needs level-1 data");
    ScalarField res = ScalarField::invalid_like(in.grid);
    const ScalarField& a1 = in.alpha_at(1);
    for (std::size_t k = 0; k < res.v.size(); ++k) {
      if (!a1.valid[k] || !in.K.valid[k]) continue;
      res.v[k] = a1.v[k] - 2.0 * (1.0 - in.K.v[k]);
      res.valid[k] = 1;
    }
    return finish(id, mul_mask(res, in.minimal_mask), tol);
  }

  if (family == "star" || family == "starstar" || family == "ricci_s3") {
    const ScalarField w = log_one_minus_K(in);
    const ScalarField lb = laplace_beltrami(w, in.F);
    ScalarField res = ScalarField::invalid_like(in.grid);
    for (std::size_t k = 0; k < res.v.size(); ++k) {
      if (!lb.valid[k] || !in.K.valid[k]) continue;
      const double K = in.K.v[k];
      double target = 6.0 * K;             // star
      if (family == "starstar") target = 6.0 * K - 1.0;
      if (family == "ricci_s3") target = 4.0 * K;
      res.v[k] = lb.v[k] - target;
      res.valid[k] = 1;
    }
    return finish(id, mul_mask(res, in.minimal_mask), tol);
  }

  if (family == "noniso" || family == "trik") {
    const ScalarField w = log_one_minus_K(in);
    const ScalarField t = laplace_beltrami(w, in.F);
    if (family == "trik") {
      // Strict bracket: both margins must stay positive.
      ScalarField margin = ScalarField::invalid_like(in.grid);
      for (std::size_t k = 0; k < margin.v.size(); ++k) {
        if (!t.valid[k] || !in.K.valid[k]) continue;
        const double K = in.K.v[k];
        const double m1 = t.v[k] - (6.0 * K - 1.0);
        const double m2 = 6.0 * K - t.v[k];
        margin.v[k] = std::min(m1, m2);
        margin.valid[k] = 1;
      }
      margin = mul_mask(margin, in.minimal_mask);
      CheckReport rep;
      rep.id = id;
      rep.tolerance = tol;
      const FieldStats s = field_stats(margin);
      rep.nodes_checked = s.valid_count;
      rep.applicable = s.valid_count > 0;
      if (rep.applicable) {
        rep.sup_residual = -s.min;  // negative sup means both margins positive
        for (std::size_t k = 0; k < margin.v.size(); ++k)
          if (margin.valid[k] && margin.v[k] <= tol) ++rep.nodes_failed;
        rep.passed = rep.nodes_failed == 0;
        std::ostringstream os;
        os << "min margin = " << s.min << " over " << rep.nodes_checked
           << " nodes, required > " << tol;
        rep.detail = os.str();
      } else {
        rep.detail = "no node satisfies the preconditions";
      }
      return rep;
    }
    // noniso: laplace log [(1-K)^2 (1 - 6K + laplace log(1-K))] = 12 K.
    ScalarField arg = ScalarField::invalid_like(in.grid);
    for (std::size_t k = 0; k < arg.v.size(); ++k) {
      if (!t.valid[k] || !in.K.valid[k]) continue;
      const double K = in.K.v[k];
      const double v = (1.0 - K) * (1.0 - K) * (1.0 - 6.0 * K + t.v[k]);
      // The outer log needs the argument bounded away from zero; anything
      // below 1e-6 is indistinguishable from the stencil noise of t (which
      // reaches ~1e-10 where the conformal factor is small) and would feed
      // garbage into the second Laplacian.
      if (!(v > 1e-6)) continue;
      arg.v[k] = v;
      arg.valid[k] = 1;
    }
    const ScalarField outer = laplace_beltrami(log_field(arg), in.F);
    ScalarField res = ScalarField::invalid_like(in.grid);
    for (std::size_t k = 0; k < res.v.size(); ++k) {
      if (!outer.valid[k] || !in.K.valid[k]) continue;
      res.v[k] = outer.v[k] - 12.0 * in.K.v[k];
      res.valid[k] = 1;
    }
    return finish(id, mul_mask(res, in.minimal_mask), tol);
  }

  if (family == "prop5" || family == "prop3i" || family == "isotropy") {
    if (level < 1 || level > in.levels)
      throw std::invalid_argument(id + ": level out of range");
    const std::size_t li = static_cast<std::size_t>(level - 1);
    const double iso_threshold = tolerance_for("isotropy_" + std::to_string(level)).floor;
    // Pointwise isotropy flags from the three proxies.
    std::vector<std::uint8_t> iso_b(in.grid.size(), 0);
    std::vector<std::uint8_t> iso_known(in.grid.size(), 0);
    std::vector<std::array<bool, 3>> flags(static_cast<std::size_t>(in.grid.size()));
    for (std::size_t k = 0; k < iso_b.size(); ++k) {
      const auto& kap = in.kappa[li];
      const auto& m = in.mu[li];
      if (!kap.valid[k] || !m.valid[k]) continue;
      bool ok = true;
      for (int q = 0; q < 3; ++q) {
        const auto& proxy = in.iso[li][static_cast<std::size_t>(q)];
        if (!proxy.valid[k]) {
          ok = false;
          break;
        }
        flags[k][static_cast<std::size_t>(q)] =
            iso_flag(proxy.v[k], kap.v[k], m.v[k], iso_threshold);
      }
      if (!ok) continue;
      iso_known[k] = 1;
      iso_b[k] = flags[k][1] ? 1 : 0;  // the axes route decides
    }

    if (family == "isotropy") {
      CheckReport rep;
      rep.id = id;
      rep.tolerance = iso_threshold;
      int disagreements = 0;
      int iso_count = 0;
      for (std::size_t k = 0; k < iso_known.size(); ++k) {
        if (!iso_known[k]) continue;
        ++rep.nodes_checked;
        if (flags[k][0] != flags[k][1] || flags[k][1] != flags[k][2]) ++disagreements;
        if (iso_b[k]) ++iso_count;
      }
      rep.applicable = rep.nodes_checked > 0;
      rep.nodes_failed = disagreements;
      rep.sup_residual = static_cast<double>(disagreements);
      rep.passed = rep.applicable && disagreements == 0;
      std::ostringstream os;
      os << disagreements << " disagreements among three isotropy tests over "
         << rep.nodes_checked << " nodes (" << iso_count << " isotropic)";
      rep.detail = os.str();
      return rep;
    }

    const ScalarField lb_alpha =
        laplace_beltrami(log_field(in.alpha_at(level)), in.F);
    const ScalarField& kst = in.kstar_at(level);

    if (family == "prop5") {
      // Algebraic intrinsic curvature against (r+1) K - laplace log /2,
      // valid where the level is isotropic.
      ScalarField res = ScalarField::invalid_like(in.grid);
      for (std::size_t k = 0; k < res.v.size(); ++k) {
        if (!iso_known[k] || !iso_b[k]) continue;
        if (!lb_alpha.valid[k] || !kst.valid[k] || !in.K.valid[k]) continue;
        const double pde = (level + 1) * in.K.v[k] - 0.5 * lb_alpha.v[k];
        res.v[k] = kst.v[k] - pde;
        res.valid[k] = 1;
      }
      return finish(id, mul_mask(res, in.minimal_mask), tol);
    }

    // prop3i: the log-Laplace equations of the level, by isotropy case.
    ScalarField plus_arg = ScalarField::invalid_like(in.grid);
    ScalarField minus_arg = ScalarField::invalid_like(in.grid);
    const ScalarField& asq = in.alpha_at(level);
    const ScalarField& kp = in.kperp_at(level);
    const double two_r = std::pow(2.0, level);
    for (std::size_t k = 0; k < plus_arg.v.size(); ++k) {
      if (!asq.valid[k] || !kp.valid[k]) continue;
      const double p = asq.v[k] + two_r * kp.v[k];
      const double m = asq.v[k] - two_r * kp.v[k];
      if (p > 1e-14) {
        plus_arg.v[k] = p;
        plus_arg.valid[k] = 1;
      }
      if (m > 1e-14) {
        minus_arg.v[k] = m;
        minus_arg.valid[k] = 1;
      }
    }
    const ScalarField lb_plus = laplace_beltrami(log_field(plus_arg), in.F);
    const ScalarField lb_minus = laplace_beltrami(log_field(minus_arg), in.F);
    ScalarField res = ScalarField::invalid_like(in.grid);
    for (std::size_t k = 0; k < res.v.size(); ++k) {
      if (!iso_known[k] || !kst.valid[k] || !in.K.valid[k]) continue;
      const double K = in.K.v[k];
      const double ks = kst.v[k];
      if (iso_b[k]) {
        if (!lb_alpha.valid[k]) continue;
        res.v[k] = lb_alpha.v[k] - 2.0 * ((level + 1) * K - ks);
      } else {
        if (!lb_plus.valid[k] || !lb_minus.valid[k]) continue;
        const double r1 = lb_plus.v[k] - 2.0 * ((level + 1) * K - ks);
        const double r2 = lb_minus.v[k] - 2.0 * ((level + 1) * K + ks);
        res.v[k] = std::abs(r1) > std::abs(r2) ? r1 : r2;
      }
      res.valid[k] = 1;
    }
    return finish(id, mul_mask(res, in.minimal_mask), tol);
  }

  if (family == "connection_forms") {
    // Adapted-frame identity at level 2: with sigma = -arg(hopf_2)/6 the
    // rotated tangent connection form satisfies
    //   w12 + d sigma = -(1/6) * d log(kappa_2^2 - mu_2^2)
    // where * is the Hodge star (*dx = dy, *dy = -dx).
    if (in.levels < 2) throw std::invalid_argument("connection_forms needs level-2 data");
    const std::size_t li = 1;
    ScalarField u = ScalarField::invalid_like(in.grid);       // kappa^2 - mu^2
    ScalarField sigma = ScalarField::invalid_like(in.grid);   // adapted rotation
    for (std::size_t k = 0; k < u.v.size(); ++k) {
      const auto& kap = in.kappa[li];
      const auto& m = in.mu[li];
      const auto& hp = in.hopf[li];
      if (!kap.valid[k] || !m.valid[k] || !hp.valid[k]) continue;
      const double diff = kap.v[k] * kap.v[k] - m.v[k] * m.v[k];
      if (!(diff > 1e-9) || std::abs(hp.v[k]) < 1e-30) continue;
      u.v[k] = diff;
      u.valid[k] = 1;
      sigma.v[k] = -std::arg(hp.v[k]) / 6.0;
      sigma.valid[k] = 1;
    }

    // Unwrap sigma (defined mod pi/3) over each connected component.
    const double period = M_PI / 3.0;
    {
      std::vector<std::uint8_t> visited(sigma.v.size(), 0);
      for (int j0 = 0; j0 < in.grid.ny; ++j0)
        for (int i0 = 0; i0 < in.grid.nx; ++i0) {
          const std::size_t k0 = static_cast<std::size_t>(in.grid.index(i0, j0));
          if (!sigma.valid[k0] || visited[k0]) continue;
          std::deque<std::pair<int, int>> queue{{i0, j0}};
          visited[k0] = 1;
          while (!queue.empty()) {
            const auto [ci, cj] = queue.front();
            queue.pop_front();
            const double base = sigma.at(ci, cj);
            const int di[4] = {1, -1, 0, 0};
            const int dj[4] = {0, 0, 1, -1};
            for (int q = 0; q < 4; ++q) {
              int ni = ci + di[q], nj = cj + dj[q];
              if (!in.grid.in_range_x(ni) || !in.grid.in_range_y(nj)) continue;
              ni = in.grid.wrap_x(ni);
              nj = in.grid.wrap_y(nj);
              const std::size_t nk = static_cast<std::size_t>(in.grid.index(ni, nj));
              if (!sigma.valid[nk] || visited[nk]) continue;
              double v = sigma.v[nk];
              v -= period * std::round((v - base) / period);
              sigma.v[nk] = v;
              visited[nk] = 1;
              queue.emplace_back(ni, nj);
            }
          }
        }
    }

    const ScalarField logu = log_field(u);
    const ScalarField lux = dx_central(logu);
    const ScalarField luy = dy_central(logu);
    const ScalarField sx = dx_central(sigma);
    const ScalarField sy = dy_central(sigma);
    ScalarField res = ScalarField::invalid_like(in.grid);
    for (std::size_t k = 0; k < res.v.size(); ++k) {
      if (!lux.valid[k] || !luy.valid[k] || !sx.valid[k] || !sy.valid[k]) continue;
      if (!in.w12_x.valid[k] || !in.w12_y.valid[k]) continue;
      const double rx = in.w12_x.v[k] + sx.v[k] - luy.v[k] / 6.0;
      const double ry = in.w12_y.v[k] + sy.v[k] + lux.v[k] / 6.0;
      res.v[k] = std::max(std::abs(rx), std::abs(ry));
      res.valid[k] = 1;
    }
    return finish(id, mul_mask(res, in.minimal_mask), tol);
  }

  if (family == "holomorphy") {
    // The level-r Hopf coefficient is antiholomorphic-derivative free in the
    // coordinate z; its conjugate-derivative, scaled by the mesh width and
    // normalized by the field's own sup, converges to zero at second order.
    if (level < 1 || level > in.levels)
      throw std::invalid_argument("holomorphy level out of range: " + id);
    const ComplexField& f = in.hopf[static_cast<std::size_t>(level - 1)];
    double sup = 0.0;
    for (std::size_t k = 0; k < f.v.size(); ++k) {
      if (!f.valid[k]) continue;
      if (!in.minimal_mask.valid[k] || in.minimal_mask.v[k] == 0.0) continue;
      sup = std::max(sup, std::abs(f.v[k]));
    }
    const double denom = sup < 1e-12 ? 1.0 : sup;
    const ComplexField db = dbar_field(f);
    ScalarField res = ScalarField::invalid_like(in.grid);
    for (std::size_t k = 0; k < db.v.size(); ++k) {
      if (!db.valid[k]) continue;
      res.v[k] = std::abs(db.v[k]) * h / denom;
      res.valid[k] = 1;
    }
    return finish(id, mul_mask(res, in.minimal_mask), tol);
  }

  if (family == "curvature_consistency") {
    // The exact curvature against its discretization from the sampled
    // conformal factor; residual is pure O(h^2) discretization error.
    const ScalarField lb = laplace_beltrami(log_field(in.F), in.F);
    ScalarField res = ScalarField::invalid_like(in.grid);
    for (std::size_t k = 0; k < res.v.size(); ++k) {
      if (!lb.valid[k] || !in.K.valid[k]) continue;
      res.v[k] = in.K.v[k] + 0.5 * lb.v[k];
      res.valid[k] = 1;
    }
    return finish(id, res, tol);
  }

  throw std::invalid_argument("unknown check id: " + id);
}

inline std::vector<std::string> default_check_ids(int levels) {
  std::vector<std::string> ids = {"star",   "starstar", "ricci_s3",
                                  "noniso", "trik",     "curvature_consistency"};
  if (levels >= 1) ids.insert(ids.begin(), "gauss_eq");
  if (levels >= 2) ids.push_back("connection_forms");
  for (int r = 1; r < levels; ++r) {
    ids.push_back("isotropy_" + std::to_string(r));
    ids.push_back("prop5_" + std::to_string(r));
    ids.push_back("prop3i_" + std::to_string(r));
    ids.push_back("holomorphy_" + std::to_string(r));
  }
  return ids;
}

inline std::vector<CheckReport> check_all(const IdentityInputs& in,
                                          const CheckOptions& opt = {}) {
  std::vector<CheckReport> reports;
  for (const auto& id : default_check_ids(in.levels))
    reports.push_back(check_identity(in, id, opt));
  return reports;
}

}  // namespace curvelab
