#pragma once

// Zero detection and order fitting for nonnegative scalar fields of
// absolute-value type: functions that look like |t(z)| times a smooth
// positive factor, with t holomorphic.  Near an order-k zero such a field
// behaves like c |z - z0|^k, so the slope of log u against log |z - z0|
// over an annulus recovers k.  Centers are refined once by fitting a
// paraboloid to u^(2/k), whose graph near the zero is a smooth bowl.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "curvelab/grid.hpp"

namespace curvelab {

struct ZeroOrderOptions {
  double candidate_rel = 1e-2;  // probe local minima below this times sup u
  double inner_radius = 3.0;    // annulus bounds, in units of the mesh width
  double outer_radius = 10.0;
  int min_annulus_nodes = 12;
};

struct ZeroRecord {
  double x = 0.0, y = 0.0;   // refined center
  int order = 0;             // fitted slope rounded to the nearest even integer
  double slope = 0.0;        // raw least-squares slope
  double fit_rms = 0.0;      // scatter of log u around the fitted line
  int annulus_nodes = 0;
};

struct ZeroOrderReport {
  std::vector<ZeroRecord> zeros;
  int total = 0;        // sum of fitted orders
  bool isolated = true; // false if some candidate region was not point-like
  std::string detail;
};

namespace zeros_detail {

// Displacement from b to a, reduced to the nearest periodic image.
inline double wrap_delta(double d, bool periodic, double period) {
  if (!periodic) return d;
  return d - period * std::round(d / period);
}

struct SlopeFit {
  double slope = 0.0;
  double rms = 0.0;
  int nodes = 0;
};

inline SlopeFit fit_annulus(const ScalarField& u, double cx, double cy,
                            double r_in, double r_out) {
  const Grid& g = u.grid;
  const double Lx = g.x1 - g.x0, Ly = g.y1 - g.y0;
  std::vector<double> lr, lu;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!u.ok(i, j)) continue;
      const double val = u.at(i, j);
      if (!(val > 0.0)) continue;
      const double dx = wrap_delta(g.x(i) - cx, g.periodic_x, Lx);
      const double dy = wrap_delta(g.y(j) - cy, g.periodic_y, Ly);
      const double r = std::hypot(dx, dy);
      if (r < r_in || r > r_out) continue;
      lr.push_back(std::log(r));
      lu.push_back(std::log(val));
    }
  SlopeFit fit;
  fit.nodes = static_cast<int>(lr.size());
  if (fit.nodes < 2) return fit;
  double mr = 0.0, mu = 0.0;
  for (int k = 0; k < fit.nodes; ++k) {
    mr += lr[static_cast<std::size_t>(k)];
    mu += lu[static_cast<std::size_t>(k)];
  }
  mr /= fit.nodes;
  mu /= fit.nodes;
  double sxx = 0.0, sxy = 0.0;
  for (int k = 0; k < fit.nodes; ++k) {
    const double dr = lr[static_cast<std::size_t>(k)] - mr;
    sxx += dr * dr;
    sxy += dr * (lu[static_cast<std::size_t>(k)] - mu);
  }
  if (sxx <= 0.0) return fit;
  fit.slope = sxy / sxx;
  double ss = 0.0;
  for (int k = 0; k < fit.nodes; ++k) {
    const double pred = mu + fit.slope * (lr[static_cast<std::size_t>(k)] - mr);
    const double d = lu[static_cast<std::size_t>(k)] - pred;
    ss += d * d;
  }
  fit.rms = std::sqrt(ss / fit.nodes);
  return fit;
}

// One least-squares paraboloid fit of u^(2/k) near the seed; returns the
// critical point, clamped to stay near the seed if the fit is degenerate.
inline void refine_center(const ScalarField& u, double k_hat, double& cx,
                          double& cy, double radius, double mesh) {
  const Grid& g = u.grid;
  const double Lx = g.x1 - g.x0, Ly = g.y1 - g.y0;
  std::vector<Eigen::Matrix<double, 6, 1>> rows;
  std::vector<double> rhs;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!u.ok(i, j)) continue;
      const double dx = wrap_delta(g.x(i) - cx, g.periodic_x, Lx);
      const double dy = wrap_delta(g.y(j) - cy, g.periodic_y, Ly);
      if (std::hypot(dx, dy) > radius) continue;
      Eigen::Matrix<double, 6, 1> row;
      row << 1.0, dx, dy, dx * dx, dx * dy, dy * dy;
      rows.push_back(row);
      rhs.push_back(std::pow(u.at(i, j), 2.0 / k_hat));
    }
  if (rows.size() < 8) return;
  Eigen::Matrix<double, 6, 6> ata = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 6, 1> atb = Eigen::Matrix<double, 6, 1>::Zero();
  for (std::size_t m = 0; m < rows.size(); ++m) {
    ata += rows[m] * rows[m].transpose();
    atb += rows[m] * rhs[m];
  }
  const Eigen::Matrix<double, 6, 1> c = ata.ldlt().solve(atb);
  // critical point of c1 x + c2 y + c3 x^2 + c4 xy + c5 y^2
  Eigen::Matrix2d hess;
  hess << 2.0 * c[3], c[4], c[4], 2.0 * c[5];
  if (std::abs(hess.determinant()) < 1e-12) return;
  const Eigen::Vector2d shift = hess.inverse() * Eigen::Vector2d(-c[1], -c[2]);
  if (shift.norm() > 1.5 * mesh) return;  // fit wandered off, keep the seed
  cx += shift[0];
  cy += shift[1];
}

}  // namespace zeros_detail

inline ZeroOrderReport zero_orders(const ScalarField& u,
                                   const ZeroOrderOptions& opt = {}) {
  const Grid& g = u.grid;
  const FieldStats stats = field_stats(u);
  if (stats.valid_count == 0)
    throw std::invalid_argument("zero_orders: field has no valid nodes");
  if (stats.min < 0.0)
    throw std::invalid_argument("zero_orders: field must be nonnegative");
  if (!(stats.sup_abs > 0.0))
    throw std::invalid_argument("zero_orders: field vanishes identically");

  const double mesh = std::max(g.hx(), g.hy());
  const double threshold = opt.candidate_rel * stats.sup_abs;

  // Candidates: valid local minima below the threshold (8-neighborhood).
  std::vector<std::uint8_t> candidate(u.v.size(), 0);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!u.ok(i, j) || u.at(i, j) >= threshold) continue;
      bool is_min = true;
      for (int dj = -1; dj <= 1 && is_min; ++dj)
        for (int di = -1; di <= 1; ++di) {
          if (di == 0 && dj == 0) continue;
          const int ni = i + di, nj = j + dj;
          if (!g.in_range_x(ni) || !g.in_range_y(nj)) continue;
          const int wi = g.wrap_x(ni), wj = g.wrap_y(nj);
          if (u.ok(wi, wj) && u.at(wi, wj) < u.at(i, j)) {
            is_min = false;
            break;
          }
        }
      if (is_min) candidate[static_cast<std::size_t>(g.index(i, j))] = 1;
    }

  ZeroOrderReport report;
  std::ostringstream detail;

  // Flood-fill adjacent candidate minima so a zero straddling several
  // equal-valued nodes is handled once.  Growing over candidates only keeps
  // high-order zeros point-like: their sub-threshold basin is wide (radius
  // like rel^(1/order)), but the tied minima sit within a node or two.
  std::vector<std::uint8_t> visited(u.v.size(), 0);
  for (int j0 = 0; j0 < g.ny; ++j0)
    for (int i0 = 0; i0 < g.nx; ++i0) {
      const std::size_t k0 = static_cast<std::size_t>(g.index(i0, j0));
      if (!candidate[k0] || visited[k0]) continue;

      std::vector<std::pair<int, int>> cluster;
      std::deque<std::pair<int, int>> queue{{i0, j0}};
      visited[k0] = 1;
      while (!queue.empty()) {
        const auto [ci, cj] = queue.front();
        queue.pop_front();
        cluster.emplace_back(ci, cj);
        for (int dj = -1; dj <= 1; ++dj)
          for (int di = -1; di <= 1; ++di) {
            if (di == 0 && dj == 0) continue;
            const int ni = ci + di, nj = cj + dj;
            if (!g.in_range_x(ni) || !g.in_range_y(nj)) continue;
            const int wi = g.wrap_x(ni), wj = g.wrap_y(nj);
            const std::size_t wk = static_cast<std::size_t>(g.index(wi, wj));
            if (visited[wk] || !candidate[wk]) continue;
            visited[wk] = 1;
            queue.emplace_back(wi, wj);
          }
      }

      // Reject regions that are not point-like at this resolution.
      int bi0 = g.nx, bi1 = -1, bj0 = g.ny, bj1 = -1;
      std::pair<int, int> seed = cluster.front();
      for (const auto& [ci, cj] : cluster) {
        bi0 = std::min(bi0, ci);
        bi1 = std::max(bi1, ci);
        bj0 = std::min(bj0, cj);
        bj1 = std::max(bj1, cj);
        if (u.at(ci, cj) < u.at(seed.first, seed.second)) seed = {ci, cj};
      }
      // Extents measured in nodes; periodic wrap can inflate the box, which
      // errs on the side of flagging.
      if (std::max(bi1 - bi0, bj1 - bj0) > 2.0 * opt.outer_radius) {
        report.isolated = false;
        detail << "candidate region near (" << g.x(seed.first) << ", "
               << g.y(seed.second) << ") is not point-like; ";
        continue;
      }

      double cx = g.x(seed.first), cy = g.y(seed.second);
      const double r_in = opt.inner_radius * mesh;
      const double r_out = opt.outer_radius * mesh;

      zeros_detail::SlopeFit first = zeros_detail::fit_annulus(u, cx, cy, r_in, r_out);
      if (first.nodes < opt.min_annulus_nodes) {
        report.isolated = false;
        detail << "annulus around (" << cx << ", " << cy << ") has only "
               << first.nodes << " usable nodes; ";
        continue;
      }
      if (first.slope < 1.0) continue;  // shallow dip, not a zero

      const double k_hat = std::max(1.0, std::round(first.slope));
      zeros_detail::refine_center(u, k_hat, cx, cy, 4.5 * mesh, mesh);
      const zeros_detail::SlopeFit fit =
          zeros_detail::fit_annulus(u, cx, cy, r_in, r_out);
      if (fit.nodes < opt.min_annulus_nodes || fit.slope < 1.0) continue;

      ZeroRecord rec;
      rec.x = cx;
      rec.y = cy;
      rec.slope = fit.slope;
      rec.order = 2 * static_cast<int>(std::llround(fit.slope / 2.0));
      rec.fit_rms = fit.rms;
      rec.annulus_nodes = fit.nodes;
      if (rec.order < 2) continue;
      report.zeros.push_back(rec);
      report.total += rec.order;
    }

  report.detail = detail.str();
  return report;
}

}  // namespace curvelab
