#pragma once

// Isometric deformations of minimal surfaces in spheres: associated families
// by frame transport, weighted direct sums, polar surfaces, and the
// verification toolkit around them (minimality, isometry, congruence,
// substantiality, moduli probing).
//
// The associated family is built through the moving frame.  Write M(x, y)
// for the adapted orthonormal frame (position, tangent pair, flag levels)
// and O_x, O_y for its Maurer-Cartan matrices; the deformation through angle
// theta rotates the block of the connection that moves the position vector
// and leaves the rest alone, and the deformed surface is recovered by
// transporting a frame along the rotated connection.  Integrating that
// connection literally is ill-posed, though: wherever a curvature ellipse
// degenerates to a circle the normal gauge of the flag is arbitrary, and the
// constructed frame field flips branch on roundoff.  The transport is
// therefore performed on the gauge-invariant unknown U = (deformed frame)
// times (source frame)^T, whose connection
//
//   D_x = v_x p^T - p v_x^T,   v_x = (cos t - 1) f_x + sin t f_y
//   D_y = v_y p^T - p v_y^T,   v_y = (cos t - 1) f_y - sin t f_x
//
// depends only on the position and first derivatives of the source surface:
// the difference of the two connections has support in the position row, and
// conjugating by M turns its entries into honest ambient vectors.  U solves
// dU = U D, starts at the identity, and the family member is g = U p with
// dg = U ((cos t) f_x + (sin t) f_y) dx + ...; the angle-zero member
// reproduces the source exactly.  The curvature of D equals
// -sin t (Delta f + 2 F f) wedge p, so requiring D to be flat is the
// Gauss-Codazzi test for the deformation and fails precisely on
// non-minimal input; the residual is measured from exact jets and
// integration refuses to continue when it is out of tolerance.

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "curvelab/flag.hpp"
#include "curvelab/grid.hpp"

namespace curvelab {

// ---------------------------------------------------------------------------
// Forward-mode scalar carrying a value and its two first partials.  The flag
// construction is generic over its scalar type; instantiated on Dual<double>
// it yields every frame vector together with its exact coordinate gradient,
// which is how the Maurer-Cartan connection is sampled without finite
// differencing.
// ---------------------------------------------------------------------------

template <class T>
struct Dual {
  T v;
  T dx;
  T dy;

  Dual() : v(0.0), dx(0.0), dy(0.0) {}
  Dual(double c) : v(c), dx(0.0), dy(0.0) {}  // constants have zero derivative
  Dual(const T& v_, const T& dx_, const T& dy_) : v(v_), dx(dx_), dy(dy_) {}
};

template <class T>
inline Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) {
  return {a.v + b.v, a.dx + b.dx, a.dy + b.dy};
}

template <class T>
inline Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) {
  return {a.v - b.v, a.dx - b.dx, a.dy - b.dy};
}

template <class T>
inline Dual<T> operator-(const Dual<T>& a) {
  return {T(0.0) - a.v, T(0.0) - a.dx, T(0.0) - a.dy};
}

template <class T>
inline Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) {
  return {a.v * b.v, a.dx * b.v + a.v * b.dx, a.dy * b.v + a.v * b.dy};
}

template <class T>
inline Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
  const T q = a.v / b.v;
  return {q, (a.dx - q * b.dx) / b.v, (a.dy - q * b.dy) / b.v};
}

template <class T>
inline Dual<T> sqrt(const Dual<T>& a) {
  using std::sqrt;
  const T s = sqrt(a.v);
  const T half = T(0.5) / s;
  return {s, half * a.dx, half * a.dy};
}

template <class T>
inline double scalar_value(const Dual<T>& a) {
  return scalar_value(a.v);
}

// Repacks a plain jet into a derivative table of dual scalars of the given
// order; the jets must extend at least one order further so every slot can
// carry its own first partials.
inline DerivTable<Dual<double>> dual_table(const VecJet& f, int order) {
  const int dim = static_cast<int>(f.size());
  if (f.empty() || f.front().order() < order + 1)
    throw std::invalid_argument("dual_table: jets must exceed the table order by one");
  auto t = DerivTable<Dual<double>>::zeros(dim, order);
  for (int d = 0; d <= order; ++d) {
    for (int j = 0; j <= d; ++j) {
      const int i = d - j;
      auto& slot = t.at(i, j);
      for (int c = 0; c < dim; ++c)
        slot[static_cast<std::size_t>(c)] =
            Dual<double>(f[static_cast<std::size_t>(c)].partial(i, j),
                         f[static_cast<std::size_t>(c)].partial(i + 1, j),
                         f[static_cast<std::size_t>(c)].partial(i, j + 1));
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Frame samples: the full orthonormal frame at one point together with its
// Maurer-Cartan connection matrices, obtained by running the flag
// construction on dual scalars.
// ---------------------------------------------------------------------------

struct FrameSample {
  int n = 0;             // ambient dimension == number of frame vectors
  Eigen::MatrixXd M;     // columns: position, e1, e2, flag levels in order
  Eigen::MatrixXd conn_x, conn_y;  // M^T dM, skew
  double F = 0.0;
};

namespace deform_detail {

// Collects the frame columns of a flag and insists that they close up to the
// full ambient dimension; an adapted frame needs a complete basis.
template <class S>
std::vector<const std::vector<S>*> frame_columns(const Flag<S>& fl) {
  std::vector<const std::vector<S>*> cols{&fl.pos, &fl.e1, &fl.e2};
  for (const auto& lvl : fl.levels)
    for (const auto& u : lvl.frame) cols.push_back(&u);
  if (!fl.exhausted || static_cast<int>(cols.size()) != fl.dim)
    throw std::runtime_error(
        "the osculating flag spans only " + std::to_string(cols.size()) + " of " +
        std::to_string(fl.dim) + " ambient directions; the adapted frame does not close");
  return cols;
}

inline void skew_clean(Eigen::MatrixXd& a) { a = 0.5 * (a - a.transpose()).eval(); }

}  // namespace deform_detail

// Smallest jet order at which the osculating flag spans the ambient space.
// Surfaces that are not substantial never close and are rejected.
inline int closing_order(const SurfaceSpec& spec, double x, double y) {
  for (int k = 1; k <= 8; ++k) {
    const VecJet jets = eval_jet(spec, {x, y}, k);
    const Flag<double> fl = build_flag(make_deriv_table(jets, k));
    int span = 3;
    for (const auto& lvl : fl.levels) span += lvl.rank;
    if (fl.exhausted && span == spec.dim) return k;
  }
  throw std::runtime_error(
      "the osculating flag does not span the ambient space through order 8; "
      "the surface is not substantial near the base point");
}

inline FrameSample frame_sample(const SurfaceSpec& spec, double x, double y, int order) {
  const VecJet jets = eval_jet(spec, {x, y}, order + 1);
  const Flag<Dual<double>> fl = build_flag(dual_table(jets, order));
  const auto cols = deform_detail::frame_columns(fl);
  const int n = fl.dim;
  FrameSample out;
  out.n = n;
  out.M.resize(n, n);
  out.conn_x.resize(n, n);
  out.conn_y.resize(n, n);
  for (int b = 0; b < n; ++b) {
    for (int i = 0; i < n; ++i)
      out.M(i, b) = (*cols[static_cast<std::size_t>(b)])[static_cast<std::size_t>(i)].v;
    for (int a = 0; a < n; ++a) {
      double sx = 0.0, sy = 0.0;
      const auto& ua = *cols[static_cast<std::size_t>(a)];
      const auto& ub = *cols[static_cast<std::size_t>(b)];
      for (int i = 0; i < n; ++i) {
        sx += ua[static_cast<std::size_t>(i)].v * ub[static_cast<std::size_t>(i)].dx;
        sy += ua[static_cast<std::size_t>(i)].v * ub[static_cast<std::size_t>(i)].dy;
      }
      out.conn_x(a, b) = sx;
      out.conn_y(a, b) = sy;
    }
  }
  deform_detail::skew_clean(out.conn_x);
  deform_detail::skew_clean(out.conn_y);
  out.F = scalar_value(fl.F);
  return out;
}

// ---------------------------------------------------------------------------
// Sampled surfaces: a grid of unit vectors, optionally with exact first
// derivatives, the common currency of every operation below.
// ---------------------------------------------------------------------------

struct SampledSurface {
  Grid grid;
  int dim = 0;
  std::vector<std::vector<double>> points;                // node-major
  std::vector<std::vector<double>> deriv_x, deriv_y;      // empty when absent
  std::string provenance;

  bool has_derivatives() const { return !deriv_x.empty(); }
  int size() const { return grid.size(); }
  const std::vector<double>& at(int i, int j) const {
    return points[static_cast<std::size_t>(grid.index(i, j))];
  }
};

// Open coordinate patch suitable for frame transport: one fundamental
// rectangle for periodic surfaces (endpoints included, no wraparound
// bookkeeping), the declared domain otherwise.
inline Grid open_patch(const SurfaceSpec& spec, int nx, int ny) {
  Grid g;
  g.nx = nx;
  g.ny = ny;
  if (spec.periodic) {
    g.x0 = 0.0;
    g.x1 = spec.period_x;
    g.y0 = 0.0;
    g.y1 = spec.period_y;
  } else {
    g.x0 = spec.domain.x0;
    g.x1 = spec.domain.x1;
    g.y0 = spec.domain.y0;
    g.y1 = spec.domain.y1;
  }
  g.periodic_x = g.periodic_y = false;
  return g;
}

inline SampledSurface sample_surface(const SurfaceSpec& spec, const Grid& grid,
                                     bool with_derivatives = true) {
  SampledSurface s;
  s.grid = grid;
  s.dim = spec.dim;
  s.points.resize(static_cast<std::size_t>(grid.size()));
  if (with_derivatives) {
    s.deriv_x.resize(static_cast<std::size_t>(grid.size()));
    s.deriv_y.resize(static_cast<std::size_t>(grid.size()));
  }
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const std::size_t k = static_cast<std::size_t>(grid.index(i, j));
      const VecJet jets = eval_jet(spec, {grid.x(i), grid.y(j)}, 1);
      std::vector<double> p(static_cast<std::size_t>(spec.dim));
      for (int c = 0; c < spec.dim; ++c)
        p[static_cast<std::size_t>(c)] = jets[static_cast<std::size_t>(c)].partial(0, 0);
      s.points[k] = std::move(p);
      if (with_derivatives) {
        std::vector<double> px(static_cast<std::size_t>(spec.dim));
        std::vector<double> py(static_cast<std::size_t>(spec.dim));
        for (int c = 0; c < spec.dim; ++c) {
          px[static_cast<std::size_t>(c)] = jets[static_cast<std::size_t>(c)].partial(1, 0);
          py[static_cast<std::size_t>(c)] = jets[static_cast<std::size_t>(c)].partial(0, 1);
        }
        s.deriv_x[k] = std::move(px);
        s.deriv_y[k] = std::move(py);
      }
    }
  }
  s.provenance = spec.name.empty() ? "sampled" : "sampled " + spec.name;
  return s;
}

// ---------------------------------------------------------------------------
// Deformation parameters: weights on the unit sphere and strictly ordered
// angles in [0, pi).  Vanishing weights are legal but flagged, since they
// collapse the sum onto a proper subspace.
// ---------------------------------------------------------------------------

struct DeformationSpec {
  int m = 0;
  std::vector<double> weights;
  std::vector<double> angles;
  bool substantial = true;

  static DeformationSpec make(std::vector<double> weights, std::vector<double> angles) {
    if (weights.empty() || weights.size() != angles.size())
      throw std::invalid_argument(
          "deformation spec needs matching, nonempty weight and angle lists");
    double s2 = 0.0;
    for (double a : weights) s2 += a * a;
    if (std::abs(s2 - 1.0) > 1e-12)
      throw std::invalid_argument("deformation weights must have unit square sum");
    for (std::size_t j = 0; j < angles.size(); ++j) {
      if (!(angles[j] >= 0.0 && angles[j] < 3.14159265358979323846))
        throw std::invalid_argument("deformation angles must lie in [0, pi)");
      if (j > 0 && !(angles[j] > angles[j - 1]))
        throw std::invalid_argument("deformation angles must be strictly increasing");
    }
    DeformationSpec d;
    d.m = static_cast<int>(weights.size());
    d.weights = std::move(weights);
    d.angles = std::move(angles);
    for (double a : d.weights)
      if (a == 0.0) d.substantial = false;
    return d;
  }
};

// ---------------------------------------------------------------------------
// Associated family by frame transport.
// ---------------------------------------------------------------------------

struct FamilyOptions {
  int substeps = 16;        // RK4 substeps per grid cell
  double compat_tol = 1e-6;  // flatness defect that aborts integration
  bool derivatives = true;   // assemble exact first derivatives per node
  bool diagnostics = true;   // flatness, invariance checks, path consistency
  bool keep_frames = false;  // retain the transported frames in the result
};

struct FrameField {
  Grid grid;
  int n = 0;
  std::vector<Eigen::MatrixXd> frames;   // deformed adapted frame per node
  std::vector<Eigen::MatrixXd> t_theta;  // transported gauge U per node
  double t_theta_defect = 0.0;           // sup |U^T U - I|
};

struct FamilyResult {
  SampledSurface surface;
  double frame_drift = 0.0;     // worst pre-retraction orthogonality defect
  double compatibility = 0.0;   // sup curvature of the rotated connection
  double conformal_deviation = 0.0;  // sup |F_theta - F| / sup F
  double hopf_deviation = 0.0;  // sup | |H_theta| - |H| |, relative when H != 0
  double path_consistency = std::numeric_limits<double>::quiet_NaN();
  std::optional<FrameField> frames;
};

namespace deform_detail {

// Jet data of the source surface at one point, as ambient vectors.
struct PointJet {
  Eigen::VectorXd p, fx, fy, fxx, fxy, fyy;
  double F = 0.0;
  double hopf_abs = 0.0;  // |xi . xi| of the first curvature ellipse
};

inline PointJet point_jet(const SurfaceSpec& spec, double x, double y, bool second) {
  const VecJet jets = eval_jet(spec, {x, y}, second ? 2 : 1);
  const int n = spec.dim;
  PointJet out;
  out.p.resize(n);
  out.fx.resize(n);
  out.fy.resize(n);
  for (int c = 0; c < n; ++c) {
    out.p[c] = jets[static_cast<std::size_t>(c)].partial(0, 0);
    out.fx[c] = jets[static_cast<std::size_t>(c)].partial(1, 0);
    out.fy[c] = jets[static_cast<std::size_t>(c)].partial(0, 1);
  }
  out.F = 0.5 * (out.fx.squaredNorm() + out.fy.squaredNorm());
  if (second) {
    out.fxx.resize(n);
    out.fxy.resize(n);
    out.fyy.resize(n);
    for (int c = 0; c < n; ++c) {
      out.fxx[c] = jets[static_cast<std::size_t>(c)].partial(2, 0);
      out.fxy[c] = jets[static_cast<std::size_t>(c)].partial(1, 1);
      out.fyy[c] = jets[static_cast<std::size_t>(c)].partial(0, 2);
    }
    const Flag<double> fl = build_flag(make_deriv_table(jets, 2));
    if (!fl.levels.empty())
      out.hopf_abs = std::hypot(fl.levels.front().hopf_re, fl.levels.front().hopf_im);
  }
  return out;
}

// The rotated-minus-base connection, conjugated into ambient coordinates:
// D = v p^T - p v^T with v the rotated tangent increment.  Skew, smooth,
// and independent of any frame gauge.
inline Eigen::MatrixXd transport_conn(const PointJet& q, double c, double s, bool along_x) {
  const Eigen::VectorXd v =
      along_x ? ((c - 1.0) * q.fx + s * q.fy).eval() : ((c - 1.0) * q.fy - s * q.fx).eval();
  return v * q.p.transpose() - q.p * v.transpose();
}

// One grid cell of the transport ODE dU/dt = U D(t), classic RK4 with the
// midpoint evaluation shared between the two middle stages and the endpoint
// reused as the next start.
template <class EvalD>
void transport_cell(Eigen::MatrixXd& U, double len, int substeps, EvalD&& conn_at) {
  const double dt = len / substeps;
  Eigen::MatrixXd a0 = conn_at(0.0);
  for (int k = 0; k < substeps; ++k) {
    const double t = k * dt;
    const Eigen::MatrixXd am = conn_at(t + 0.5 * dt);
    const Eigen::MatrixXd a1 = conn_at(t + dt);
    const Eigen::MatrixXd k1 = U * a0;
    const Eigen::MatrixXd k2 = (U + (0.5 * dt) * k1) * am;
    const Eigen::MatrixXd k3 = (U + (0.5 * dt) * k2) * am;
    const Eigen::MatrixXd k4 = (U + dt * k3) * a1;
    U += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    a0 = a1;
  }
}

// Projects U back onto the orthogonal group and reports how far it had
// drifted (largest singular value deviation from one).
inline double retract_orthogonal(Eigen::MatrixXd& U) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(U, Eigen::ComputeFullU | Eigen::ComputeFullV);
  double drift = 0.0;
  const auto& sv = svd.singularValues();
  for (int i = 0; i < sv.size(); ++i) drift = std::max(drift, std::abs(sv[i] - 1.0));
  U = svd.matrixU() * svd.matrixV().transpose();
  return drift;
}

inline int worker_count(int jobs) {
  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  return std::max(1, std::min({hw > 0 ? hw : 1, jobs, 16}));
}

// Runs fn(first, last) over [0, jobs) on a small thread pool, capturing the
// first exception and rethrowing it on the caller.
template <class Fn>
void parallel_ranges(int jobs, Fn&& fn) {
  const int workers = worker_count(jobs);
  if (workers == 1) {
    fn(0, jobs);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs(static_cast<std::size_t>(workers));
  const int chunk = (jobs + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int first = w * chunk;
    const int last = std::min(jobs, first + chunk);
    if (first >= last) break;
    pool.emplace_back([&, w, first, last] {
      try {
        fn(first, last);
      } catch (...) {
        errs[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

}  // namespace deform_detail

inline FamilyResult associated_family(const SurfaceSpec& spec, double theta, const Grid& grid,
                                      const FamilyOptions& opt = {}) {
  if (grid.periodic_x || grid.periodic_y)
    throw std::invalid_argument(
        "frame transport needs an open patch; integrate over one fundamental "
        "rectangle instead of a periodically identified grid");
  if (grid.nx < 2 || grid.ny < 2)
    throw std::invalid_argument("frame transport needs at least a 2x2 grid");
  if (!std::isfinite(theta)) throw std::invalid_argument("theta must be finite");
  if (opt.substeps < 1) throw std::invalid_argument("substeps must be positive");

  const double c = std::cos(theta), s = std::sin(theta);
  const int n = spec.dim;
  const int nn = grid.size();
  const double hx = grid.hx(), hy = grid.hy();

  using deform_detail::parallel_ranges;
  using deform_detail::PointJet;

  // Node pass: source jets at every node, for the flatness test, the
  // derivative assembly, and the invariance diagnostics.
  const bool want_nodes = opt.derivatives || opt.diagnostics;
  std::vector<PointJet> node_jets;
  double compat = 0.0;
  if (want_nodes) {
    node_jets.assign(static_cast<std::size_t>(nn), PointJet{});
    std::vector<double> row_compat(static_cast<std::size_t>(grid.ny), 0.0);
    parallel_ranges(grid.ny, [&](int j0, int j1) {
      for (int j = j0; j < j1; ++j) {
        double worst = 0.0;
        for (int i = 0; i < grid.nx; ++i) {
          PointJet q = deform_detail::point_jet(spec, grid.x(i), grid.y(j), true);
          if (opt.diagnostics) {
            // Curvature of the transport connection from exact jets:
            // dx D_y - dy D_x + [D_x, D_y].  Analytically this is
            // -sin(theta) (Delta f + 2 F f) wedge p, the minimality defect.
            const Eigen::VectorXd vx = (c - 1.0) * q.fx + s * q.fy;
            const Eigen::VectorXd vy = (c - 1.0) * q.fy - s * q.fx;
            const Eigen::VectorXd dxvy = (c - 1.0) * q.fxy - s * q.fxx;
            const Eigen::VectorXd dyvx = (c - 1.0) * q.fxy + s * q.fyy;
            const Eigen::MatrixXd dx_dy =
                dxvy * q.p.transpose() + vy * q.fx.transpose() - q.fx * vy.transpose() -
                q.p * dxvy.transpose();
            const Eigen::MatrixXd dy_dx =
                dyvx * q.p.transpose() + vx * q.fy.transpose() - q.fy * vx.transpose() -
                q.p * dyvx.transpose();
            const Eigen::MatrixXd Dx = vx * q.p.transpose() - q.p * vx.transpose();
            const Eigen::MatrixXd Dy = vy * q.p.transpose() - q.p * vy.transpose();
            const Eigen::MatrixXd curv = dx_dy - dy_dx + Dx * Dy - Dy * Dx;
            worst = std::max(worst, curv.cwiseAbs().maxCoeff() / std::max(1.0, q.F));
          }
          node_jets[static_cast<std::size_t>(grid.index(i, j))] = std::move(q);
        }
        row_compat[static_cast<std::size_t>(j)] = std::max(
            row_compat[static_cast<std::size_t>(j)], worst);
      }
    });
    for (double v : row_compat) compat = std::max(compat, v);
    if (opt.diagnostics && compat > opt.compat_tol) {
      std::ostringstream msg;
      msg << "the rotated connection is not flat (curvature " << compat
          << "); the surface fails the Gauss-Codazzi test for an isometric "
             "deformation at this angle";
      throw std::runtime_error(msg.str());
    }
  }

  const auto conn_dir = [&](double x, double y, bool along_x) {
    return deform_detail::transport_conn(deform_detail::point_jet(spec, x, y, false), c, s,
                                         along_x);
  };

  std::vector<Eigen::MatrixXd> gauges(static_cast<std::size_t>(nn));
  std::atomic<double> drift_sup{0.0};
  const auto bump_drift = [&](double d) {
    double cur = drift_sup.load();
    while (d > cur && !drift_sup.compare_exchange_weak(cur, d)) {
    }
  };

  Eigen::MatrixXd U = Eigen::MatrixXd::Identity(n, n);
  gauges[static_cast<std::size_t>(grid.index(0, 0))] = U;
  for (int i = 0; i + 1 < grid.nx; ++i) {
    const double xs = grid.x(i), y = grid.y0;
    deform_detail::transport_cell(U, hx, opt.substeps,
                                  [&](double t) { return conn_dir(xs + t, y, true); });
    bump_drift(deform_detail::retract_orthogonal(U));
    gauges[static_cast<std::size_t>(grid.index(i + 1, 0))] = U;
  }
  parallel_ranges(grid.nx, [&](int i0, int i1) {
    for (int i = i0; i < i1; ++i) {
      Eigen::MatrixXd Uc = gauges[static_cast<std::size_t>(grid.index(i, 0))];
      const double x = grid.x(i);
      for (int j = 0; j + 1 < grid.ny; ++j) {
        const double ys = grid.y(j);
        deform_detail::transport_cell(Uc, hy, opt.substeps,
                                      [&](double t) { return conn_dir(x, ys + t, false); });
        bump_drift(deform_detail::retract_orthogonal(Uc));
        gauges[static_cast<std::size_t>(grid.index(i, j + 1))] = Uc;
      }
    }
  });

  FamilyResult out;
  out.frame_drift = drift_sup.load();
  out.compatibility = compat;

  out.surface.grid = grid;
  out.surface.dim = n;
  out.surface.points.resize(static_cast<std::size_t>(nn));
  const auto node_position = [&](int k) -> Eigen::VectorXd {
    if (want_nodes) return node_jets[static_cast<std::size_t>(k)].p;
    const int i = k % grid.nx, j = k / grid.nx;
    return deform_detail::point_jet(spec, grid.x(i), grid.y(j), false).p;
  };
  for (int k = 0; k < nn; ++k) {
    const Eigen::VectorXd g = gauges[static_cast<std::size_t>(k)] * node_position(k);
    out.surface.points[static_cast<std::size_t>(k)].assign(g.data(), g.data() + n);
  }
  if (opt.derivatives) {
    out.surface.deriv_x.resize(static_cast<std::size_t>(nn));
    out.surface.deriv_y.resize(static_cast<std::size_t>(nn));
    for (int k = 0; k < nn; ++k) {
      const PointJet& q = node_jets[static_cast<std::size_t>(k)];
      const Eigen::MatrixXd& Uk = gauges[static_cast<std::size_t>(k)];
      const Eigen::VectorXd gx = Uk * (c * q.fx + s * q.fy);
      const Eigen::VectorXd gy = Uk * (c * q.fy - s * q.fx);
      out.surface.deriv_x[static_cast<std::size_t>(k)].assign(gx.data(), gx.data() + n);
      out.surface.deriv_y[static_cast<std::size_t>(k)].assign(gy.data(), gy.data() + n);
    }
  }
  {
    std::ostringstream prov;
    prov << "associated family theta=" << theta << " of "
         << (spec.name.empty() ? "surface" : spec.name);
    out.surface.provenance = prov.str();
  }

  if (opt.diagnostics) {
    // Invariance checks on the assembled second-order jet of the deformed
    // surface: the conformal factor and the modulus of the first curvature
    // ellipse's bilinear square must match the source node by node.
    std::vector<double> row_fdev(static_cast<std::size_t>(grid.ny), 0.0);
    std::vector<double> row_hdev(static_cast<std::size_t>(grid.ny), 0.0);
    double f_sup = 0.0, hopf_sup = 0.0;
    for (const auto& q : node_jets) {
      f_sup = std::max(f_sup, q.F);
      hopf_sup = std::max(hopf_sup, q.hopf_abs);
    }
    parallel_ranges(grid.ny, [&](int j0, int j1) {
      for (int j = j0; j < j1; ++j) {
        double wf = 0.0, wh = 0.0;
        for (int i = 0; i < grid.nx; ++i) {
          const std::size_t k = static_cast<std::size_t>(grid.index(i, j));
          const PointJet& q = node_jets[k];
          const Eigen::MatrixXd& Uk = gauges[k];
          const Eigen::VectorXd vx = (c - 1.0) * q.fx + s * q.fy;
          const Eigen::VectorXd vy = (c - 1.0) * q.fy - s * q.fx;
          const auto apply_d = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& u) {
            return (v * q.p.dot(u) - q.p * v.dot(u)).eval();
          };
          const Eigen::VectorXd tx = c * q.fx + s * q.fy;
          const Eigen::VectorXd ty = c * q.fy - s * q.fx;
          auto tbl = DerivTable<double>::zeros(n, 2);
          const auto put = [&](int a, int b, const Eigen::VectorXd& v) {
            auto& slot = tbl.at(a, b);
            for (int q2 = 0; q2 < n; ++q2) slot[static_cast<std::size_t>(q2)] = v[q2];
          };
          put(0, 0, Uk * q.p);
          put(1, 0, Uk * tx);
          put(0, 1, Uk * ty);
          put(2, 0, Uk * (apply_d(vx, tx) + c * q.fxx + s * q.fxy));
          put(1, 1, Uk * (apply_d(vy, tx) + c * q.fxy + s * q.fyy));
          put(0, 2, Uk * (apply_d(vy, ty) + c * q.fyy - s * q.fxy));
          const Flag<double> fl = build_flag(tbl);
          wf = std::max(wf, std::abs(fl.F - q.F));
          const double h = fl.levels.empty() ? 0.0
                                             : std::hypot(fl.levels.front().hopf_re,
                                                          fl.levels.front().hopf_im);
          wh = std::max(wh, std::abs(h - q.hopf_abs));
        }
        row_fdev[static_cast<std::size_t>(j)] = wf;
        row_hdev[static_cast<std::size_t>(j)] = wh;
      }
    });
    double fdev = 0.0, hdev = 0.0;
    for (double v : row_fdev) fdev = std::max(fdev, v);
    for (double v : row_hdev) hdev = std::max(hdev, v);
    out.conformal_deviation = f_sup > 0.0 ? fdev / f_sup : fdev;
    out.hopf_deviation = hopf_sup > 1e-12 ? hdev / hopf_sup : hdev;

    // Path consistency: transport to the far corner the other way around
    // (left column first, then the top row) and compare positions.
    Eigen::MatrixXd Up = Eigen::MatrixXd::Identity(n, n);
    for (int j = 0; j + 1 < grid.ny; ++j) {
      const double ys = grid.y(j);
      deform_detail::transport_cell(Up, hy, opt.substeps,
                                    [&](double t) { return conn_dir(grid.x0, ys + t, false); });
      deform_detail::retract_orthogonal(Up);
    }
    const double yt = grid.y(grid.ny - 1);
    for (int i = 0; i + 1 < grid.nx; ++i) {
      const double xs = grid.x(i);
      deform_detail::transport_cell(Up, hx, opt.substeps,
                                    [&](double t) { return conn_dir(xs + t, yt, true); });
      deform_detail::retract_orthogonal(Up);
    }
    const int far = grid.index(grid.nx - 1, grid.ny - 1);
    const Eigen::VectorXd via_rows = Eigen::Map<const Eigen::VectorXd>(
        out.surface.points[static_cast<std::size_t>(far)].data(), n);
    out.path_consistency = (via_rows - Up * node_jets[static_cast<std::size_t>(far)].p).norm();
  }

  if (opt.keep_frames) {
    // The deformed adapted frame is U times the source frame; building the
    // latter needs the flag to close, which is only required here.
    const int order = closing_order(spec, grid.x0, grid.y0);
    FrameField ff;
    ff.grid = grid;
    ff.n = n;
    ff.frames.resize(static_cast<std::size_t>(nn));
    ff.t_theta = gauges;
    double defect = 0.0;
    for (int j = 0; j < grid.ny; ++j) {
      for (int i = 0; i < grid.nx; ++i) {
        const std::size_t k = static_cast<std::size_t>(grid.index(i, j));
        const Eigen::MatrixXd Mk = frame_sample(spec, grid.x(i), grid.y(j), order).M;
        ff.frames[k] = gauges[k] * Mk;
        const Eigen::MatrixXd gram =
            gauges[k].transpose() * gauges[k] - Eigen::MatrixXd::Identity(n, n);
        defect = std::max(defect, gram.cwiseAbs().maxCoeff());
      }
    }
    ff.t_theta_defect = defect;
    out.frames = std::move(ff);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Weighted direct sums.
// ---------------------------------------------------------------------------

namespace deform_detail {

inline bool grids_match(const Grid& a, const Grid& b) {
  return a.nx == b.nx && a.ny == b.ny && std::abs(a.x0 - b.x0) < 1e-12 &&
         std::abs(a.x1 - b.x1) < 1e-12 && std::abs(a.y0 - b.y0) < 1e-12 &&
         std::abs(a.y1 - b.y1) < 1e-12;
  // periodic flags intentionally ignored: they describe bookkeeping, not
  // geometry, and loaded surfaces lose them anyway
}

}  // namespace deform_detail

inline SampledSurface direct_sum(const std::vector<SampledSurface>& members,
                                 const std::vector<double>& weights) {
  if (members.empty() || members.size() != weights.size())
    throw std::invalid_argument("direct sum needs matching, nonempty member and weight lists");
  double s2 = 0.0;
  for (double a : weights) s2 += a * a;
  if (std::abs(s2 - 1.0) > 1e-12)
    throw std::invalid_argument("direct sum weights must have unit square sum");
  for (const auto& m : members)
    if (!deform_detail::grids_match(m.grid, members.front().grid))
      throw std::invalid_argument("direct sum members must share one parameter grid");

  const int nn = members.front().grid.size();
  bool derivs = true;
  int dim = 0;
  for (const auto& m : members) {
    dim += m.dim;
    derivs = derivs && m.has_derivatives();
  }

  SampledSurface s;
  s.grid = members.front().grid;
  s.dim = dim;
  s.points.resize(static_cast<std::size_t>(nn));
  if (derivs) {
    s.deriv_x.resize(static_cast<std::size_t>(nn));
    s.deriv_y.resize(static_cast<std::size_t>(nn));
  }
  for (int k = 0; k < nn; ++k) {
    auto& p = s.points[static_cast<std::size_t>(k)];
    p.reserve(static_cast<std::size_t>(dim));
    for (std::size_t j = 0; j < members.size(); ++j)
      for (double v : members[j].points[static_cast<std::size_t>(k)]) p.push_back(weights[j] * v);
    if (derivs) {
      auto& px = s.deriv_x[static_cast<std::size_t>(k)];
      auto& py = s.deriv_y[static_cast<std::size_t>(k)];
      px.reserve(static_cast<std::size_t>(dim));
      py.reserve(static_cast<std::size_t>(dim));
      for (std::size_t j = 0; j < members.size(); ++j) {
        for (double v : members[j].deriv_x[static_cast<std::size_t>(k)])
          px.push_back(weights[j] * v);
        for (double v : members[j].deriv_y[static_cast<std::size_t>(k)])
          py.push_back(weights[j] * v);
      }
    }
  }
  s.provenance = "direct sum of " + std::to_string(members.size()) + " members";
  return s;
}

// ---------------------------------------------------------------------------
// Verification functionals.
// ---------------------------------------------------------------------------

namespace deform_detail {

// Neighbor index along one axis, honoring periodic wraparound; -1 if the
// stencil leaves the grid.
inline int step_index(const Grid& g, int i, int di, bool x_axis) {
  const int m = x_axis ? g.nx : g.ny;
  const bool per = x_axis ? g.periodic_x : g.periodic_y;
  int t = i + di;
  if (per) return ((t % m) + m) % m;
  return (t >= 0 && t < m) ? t : -1;
}

}  // namespace deform_detail

// Sup-norm defect of the sphere-minimality equation Delta_g f + 2 f = 0 in
// the induced metric, normalized by max(1, sup |Delta_g f|).  When first
// derivatives are present the Laplacian uses a sixth-order Hermite scheme,
// (20 S1 + S2 - 12 D) / 9 with S1, S2 the second differences at spacing h
// and 2h and D the centered difference of the exact first derivative; both
// the h^2 and h^4 truncation terms cancel.  Without derivatives it falls
// back to the plain five-point stencil.  The sampling must be close to
// isothermal for the induced Laplacian to reduce to Delta / F; a conformal
// defect beyond 20% aborts.
inline double minimality_residual(const SampledSurface& s) {
  const Grid& g = s.grid;
  if (g.nx < 5 || g.ny < 5)
    throw std::invalid_argument("minimality residual needs at least a 5x5 grid");
  const double hx = g.hx(), hy = g.hy();
  const bool derivs = s.has_derivatives();

  double sup_eq = 0.0, sup_lap = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const int ixp = deform_detail::step_index(g, i, +1, true);
      const int ixm = deform_detail::step_index(g, i, -1, true);
      const int jyp = deform_detail::step_index(g, j, +1, false);
      const int jym = deform_detail::step_index(g, j, -1, false);
      if (ixp < 0 || ixm < 0 || jyp < 0 || jym < 0) continue;
      const int ixp2 = deform_detail::step_index(g, i, +2, true);
      const int ixm2 = deform_detail::step_index(g, i, -2, true);
      const int jyp2 = deform_detail::step_index(g, j, +2, false);
      const int jym2 = deform_detail::step_index(g, j, -2, false);
      if (derivs && (ixp2 < 0 || ixm2 < 0 || jyp2 < 0 || jym2 < 0)) continue;
      const auto& f0 = s.at(i, j);
      const auto& fxp = s.at(ixp, j);
      const auto& fxm = s.at(ixm, j);
      const auto& fyp = s.at(i, jyp);
      const auto& fym = s.at(i, jym);

      double e11 = 0.0, e22 = 0.0, e12 = 0.0;
      if (derivs) {
        const auto& dx = s.deriv_x[static_cast<std::size_t>(g.index(i, j))];
        const auto& dy = s.deriv_y[static_cast<std::size_t>(g.index(i, j))];
        for (int c = 0; c < s.dim; ++c) {
          const std::size_t cc = static_cast<std::size_t>(c);
          e11 += dx[cc] * dx[cc];
          e22 += dy[cc] * dy[cc];
          e12 += dx[cc] * dy[cc];
        }
      } else {
        for (int c = 0; c < s.dim; ++c) {
          const std::size_t cc = static_cast<std::size_t>(c);
          const double ux = (fxp[cc] - fxm[cc]) / (2.0 * hx);
          const double uy = (fyp[cc] - fym[cc]) / (2.0 * hy);
          e11 += ux * ux;
          e22 += uy * uy;
          e12 += ux * uy;
        }
      }
      const double F = 0.5 * (e11 + e22);
      if (!(F > 1e-300)) continue;
      const double conf =
          std::sqrt((e11 - e22) * (e11 - e22) + 4.0 * e12 * e12) / (e11 + e22);
      if (conf > 0.2)
        throw std::invalid_argument(
            "minimality residual assumes near-isothermal sampling; the "
            "conformal defect here exceeds 20%");

      double eq2 = 0.0, lap2 = 0.0;
      for (int c = 0; c < s.dim; ++c) {
        const std::size_t cc = static_cast<std::size_t>(c);
        double ax = (fxp[cc] + fxm[cc] - 2.0 * f0[cc]) / (hx * hx);
        double ay = (fyp[cc] + fym[cc] - 2.0 * f0[cc]) / (hy * hy);
        if (derivs) {
          const double s2x =
              (s.at(ixp2, j)[cc] + s.at(ixm2, j)[cc] - 2.0 * f0[cc]) / (4.0 * hx * hx);
          const double s2y =
              (s.at(i, jyp2)[cc] + s.at(i, jym2)[cc] - 2.0 * f0[cc]) / (4.0 * hy * hy);
          const double bx = (s.deriv_x[static_cast<std::size_t>(g.index(ixp, j))][cc] -
                             s.deriv_x[static_cast<std::size_t>(g.index(ixm, j))][cc]) /
                            (2.0 * hx);
          const double by = (s.deriv_y[static_cast<std::size_t>(g.index(i, jyp))][cc] -
                             s.deriv_y[static_cast<std::size_t>(g.index(i, jym))][cc]) /
                            (2.0 * hy);
          ax = (20.0 * ax + s2x - 12.0 * bx) / 9.0;
          ay = (20.0 * ay + s2y - 12.0 * by) / 9.0;
        }
        const double lap = (ax + ay) / F;
        const double eq = lap + 2.0 * f0[cc];
        eq2 += eq * eq;
        lap2 += lap * lap;
      }
      sup_eq = std::max(sup_eq, std::sqrt(eq2));
      sup_lap = std::max(sup_lap, std::sqrt(lap2));
    }
  }
  return sup_eq / std::max(1.0, sup_lap);
}

// Relative sup-norm mismatch of the conformal factors of two surfaces over
// one grid.  Both factors are estimated from point values alone: the check
// must stand on the sampled positions themselves, or it would not catch a
// broken reconstruction that happens to carry correct derivative fields.
// The sixth-order stencil keeps the truncation error well below the
// tolerances the comparison is used at.
inline double isometry_residual(const SampledSurface& a, const SampledSurface& b) {
  if (!deform_detail::grids_match(a.grid, b.grid))
    throw std::invalid_argument("isometry residual needs both surfaces on one grid");
  const Grid& g = a.grid;
  if (g.nx < 7 || g.ny < 7)
    throw std::invalid_argument("isometry residual needs at least a 7x7 grid");
  const double hx = g.hx(), hy = g.hy();

  const auto factor = [&](const SampledSurface& s, int i, int j, double& out) {
    int xs[6], ys[6];
    for (int t = 0; t < 3; ++t) {
      xs[t] = deform_detail::step_index(g, i, t + 1, true);
      xs[t + 3] = deform_detail::step_index(g, i, -(t + 1), true);
      ys[t] = deform_detail::step_index(g, j, t + 1, false);
      ys[t + 3] = deform_detail::step_index(g, j, -(t + 1), false);
    }
    for (int t = 0; t < 6; ++t)
      if (xs[t] < 0 || ys[t] < 0) return false;
    double acc = 0.0;
    for (int c = 0; c < s.dim; ++c) {
      const std::size_t cc = static_cast<std::size_t>(c);
      const double ux = (45.0 * (s.at(xs[0], j)[cc] - s.at(xs[3], j)[cc]) -
                         9.0 * (s.at(xs[1], j)[cc] - s.at(xs[4], j)[cc]) +
                         (s.at(xs[2], j)[cc] - s.at(xs[5], j)[cc])) /
                        (60.0 * hx);
      const double uy = (45.0 * (s.at(i, ys[0])[cc] - s.at(i, ys[3])[cc]) -
                         9.0 * (s.at(i, ys[1])[cc] - s.at(i, ys[4])[cc]) +
                         (s.at(i, ys[2])[cc] - s.at(i, ys[5])[cc])) /
                        (60.0 * hy);
      acc += ux * ux + uy * uy;
    }
    out = 0.5 * acc;
    return true;
  };

  double sup_diff = 0.0, sup_a = 0.0;
  bool any = false;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      double Fa, Fb;
      if (!factor(a, i, j, Fa) || !factor(b, i, j, Fb)) continue;
      any = true;
      sup_diff = std::max(sup_diff, std::abs(Fa - Fb));
      sup_a = std::max(sup_a, Fa);
    }
  }
  if (!any || !(sup_a > 0.0))
    throw std::invalid_argument("isometry residual found no usable interior nodes");
  return sup_diff / sup_a;
}

// ---------------------------------------------------------------------------
// Congruence by orthogonal Procrustes alignment.
// ---------------------------------------------------------------------------

struct CongruenceResult {
  Eigen::MatrixXd rotation;  // orthogonal map taking the first cloud to the second
  double residual = 0.0;     // RMS node distance after alignment
  double threshold = 0.0;    // residual below this counts as congruent
  bool congruent = false;
  bool degenerate = false;   // cross-covariance rank < dim - 1
};

namespace deform_detail {

inline CongruenceResult procrustes(const std::vector<Eigen::VectorXd>& a,
                                   const std::vector<Eigen::VectorXd>& b, int dim) {
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t k = 0; k < a.size(); ++k) cov += a[k] * b[k].transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  CongruenceResult out;
  out.rotation = svd.matrixV() * svd.matrixU().transpose();
  const auto& sv = svd.singularValues();
  out.degenerate = sv.size() >= 2 && sv[sv.size() - 2] <= 1e-12 * sv[0];
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += (out.rotation * a[k] - b[k]).squaredNorm();
  out.residual = std::sqrt(acc / static_cast<double>(a.size()));
  return out;
}

}  // namespace deform_detail

// Best orthogonal alignment of two surfaces sampled over one grid, node by
// node.  The verdict threshold is 1e-4 times the cloud diameter (estimated
// as twice the largest distance from the centroid).  With match_derivatives
// the first-derivative vectors join the clouds, tying the alignment to
// first order.
inline CongruenceResult congruence(const SampledSurface& a, const SampledSurface& b,
                                   bool match_derivatives = false) {
  if (!deform_detail::grids_match(a.grid, b.grid))
    throw std::invalid_argument("congruence needs both surfaces on one grid");
  if (a.dim != b.dim) throw std::invalid_argument("congruence needs equal ambient dimensions");
  if (match_derivatives && (!a.has_derivatives() || !b.has_derivatives()))
    throw std::invalid_argument("congruence with derivatives needs them on both surfaces");

  const int nn = a.grid.size();
  std::vector<Eigen::VectorXd> ca, cb;
  ca.reserve(static_cast<std::size_t>(nn) * (match_derivatives ? 3 : 1));
  cb.reserve(ca.capacity());
  const auto push = [&](const std::vector<double>& u, std::vector<Eigen::VectorXd>& dst) {
    dst.push_back(Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<int>(u.size())));
  };
  for (int k = 0; k < nn; ++k) {
    push(a.points[static_cast<std::size_t>(k)], ca);
    push(b.points[static_cast<std::size_t>(k)], cb);
    if (match_derivatives) {
      push(a.deriv_x[static_cast<std::size_t>(k)], ca);
      push(b.deriv_x[static_cast<std::size_t>(k)], cb);
      push(a.deriv_y[static_cast<std::size_t>(k)], ca);
      push(b.deriv_y[static_cast<std::size_t>(k)], cb);
    }
  }
  CongruenceResult out = deform_detail::procrustes(ca, cb, a.dim);

  Eigen::VectorXd centroid = Eigen::VectorXd::Zero(a.dim);
  for (int k = 0; k < nn; ++k)
    centroid +=
        Eigen::Map<const Eigen::VectorXd>(a.points[static_cast<std::size_t>(k)].data(), a.dim);
  centroid /= static_cast<double>(nn);
  double rad = 0.0;
  for (int k = 0; k < nn; ++k)
    rad = std::max(
        rad, (Eigen::Map<const Eigen::VectorXd>(a.points[static_cast<std::size_t>(k)].data(),
                                                a.dim) -
              centroid)
                 .norm());
  out.threshold = 1e-4 * 2.0 * rad;
  out.congruent = out.residual < out.threshold;
  return out;
}

// Rank of the node-point matrix: the dimension of the smallest linear
// subspace containing the sampled surface.  Singular values below
// 1e-8 sigma_max count as zero.
inline int substantial_dimension(const SampledSurface& s) {
  const int nn = s.grid.size();
  if (nn < s.dim)
    throw std::invalid_argument("substantial dimension needs at least dim sample nodes");
  Eigen::MatrixXd P(nn, s.dim);
  for (int k = 0; k < nn; ++k)
    for (int c = 0; c < s.dim; ++c)
      P(k, c) = s.points[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)];
  Eigen::BDCSVD<Eigen::MatrixXd> svd(P);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv[0] > 0.0)) return 0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-8 * sv[0]) ++rank;
  return rank;
}

// ---------------------------------------------------------------------------
// Polar surface: the unit field spanning the second normal line of a
// substantial surface in the 5-sphere, with signs continued from the base
// node so the result is a single smooth surface.
// ---------------------------------------------------------------------------

inline SampledSurface polar_surface(const SurfaceSpec& spec, const Grid& grid) {
  if (spec.dim != 6)
    throw std::invalid_argument("the polar construction lives in the 5-sphere (dim 6)");
  const int order = closing_order(spec, grid.x0, grid.y0);
  const int nn = grid.size();

  std::vector<std::vector<double>> raw(static_cast<std::size_t>(nn));
  deform_detail::parallel_ranges(grid.ny, [&](int j0, int j1) {
    for (int j = j0; j < j1; ++j) {
      for (int i = 0; i < grid.nx; ++i) {
        const VecJet jets = eval_jet(spec, {grid.x(i), grid.y(j)}, order);
        const Flag<double> fl = build_flag(make_deriv_table(jets, order));
        if (!fl.exhausted || fl.levels.empty() || fl.levels.back().rank != 1)
          throw std::runtime_error(
              "the second normal bundle is not a line here; the polar "
              "surface is undefined (terminal flag rank " +
              std::to_string(fl.levels.empty() ? 0 : fl.levels.back().rank) + ")");
        raw[static_cast<std::size_t>(grid.index(i, j))] = fl.levels.back().frame.front();
      }
    }
  });

  // Breadth-first sign continuation from the base node.  The frame vector at
  // each node is determined up to sign; neighbors of a smooth line field
  // nearly align, so a near-zero inner product means the continuation is
  // obstructed.
  std::vector<int> sign(static_cast<std::size_t>(nn), 0);
  std::vector<int> queue;
  queue.reserve(static_cast<std::size_t>(nn));
  sign[0] = 1;
  queue.push_back(0);
  const auto dot_raw = [&](int p, int q) {
    const auto& u = raw[static_cast<std::size_t>(p)];
    const auto& v = raw[static_cast<std::size_t>(q)];
    double acc = 0.0;
    for (std::size_t c = 0; c < u.size(); ++c) acc += u[c] * v[c];
    return acc;
  };
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const int k = queue[head];
    const int i = k % grid.nx, j = k / grid.nx;
    const int di[4] = {1, -1, 0, 0};
    const int dj[4] = {0, 0, 1, -1};
    for (int t = 0; t < 4; ++t) {
      const int ii = i + di[t], jj = j + dj[t];
      if (ii < 0 || ii >= grid.nx || jj < 0 || jj >= grid.ny) continue;
      const int q = grid.index(ii, jj);
      const double d = dot_raw(k, q);
      if (std::abs(d) < 0.1)
        throw std::runtime_error(
            "sign continuation of the polar line field is obstructed between "
            "adjacent nodes; refine the grid");
      const int want =
          d > 0.0 ? sign[static_cast<std::size_t>(k)] : -sign[static_cast<std::size_t>(k)];
      if (sign[static_cast<std::size_t>(q)] == 0) {
        sign[static_cast<std::size_t>(q)] = want;
        queue.push_back(q);
      } else if (sign[static_cast<std::size_t>(q)] != want) {
        throw std::runtime_error(
            "sign continuation of the polar line field is inconsistent "
            "around a cycle; the field is not orientable on this patch");
      }
    }
  }

  SampledSurface s;
  s.grid = grid;
  s.dim = spec.dim;
  s.points.resize(static_cast<std::size_t>(nn));
  for (int k = 0; k < nn; ++k) {
    auto p = raw[static_cast<std::size_t>(k)];
    if (sign[static_cast<std::size_t>(k)] < 0)
      for (double& v : p) v = -v;
    s.points[static_cast<std::size_t>(k)] = std::move(p);
  }
  s.provenance = "polar of " + (spec.name.empty() ? std::string("surface") : spec.name);
  return s;
}

// Ordered-axis margin between a surface and its polar at the second level:
// a_plus * a_minus-hat - a_minus * a_plus-hat, nonnegative when the level-2
// ellipse axes of the two surfaces interlace the expected way.  Equality is
// the degenerate case.
inline ScalarField polar_axis_margin(const GridAnalysis& a, const GridAnalysis& apolar) {
  if (a.grid.nx != apolar.grid.nx || a.grid.ny != apolar.grid.ny)
    throw std::invalid_argument("axis margin needs both analyses on one grid");
  ScalarField out = ScalarField::invalid_like(a.grid);
  for (int j = 0; j < a.grid.ny; ++j) {
    for (int i = 0; i < a.grid.nx; ++i) {
      const FlagReport& ra = a.at(i, j);
      const FlagReport& rp = apolar.at(i, j);
      if (!ra.immersed || !rp.immersed || ra.levels.size() < 2 || rp.levels.size() < 2)
        continue;
      const EllipseData& ea = ra.levels[1];
      const EllipseData& ep = rp.levels[1];
      out.set(i, j, ea.a_plus * ep.a_minus - ea.a_minus * ep.a_plus);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Text serialization: header "curvelab-surface v1 nx ny dim", then one node
// per line as "x y p0 ... p_{dim-1}" with 17 significant digits, row-major.
// Derivatives are not serialized.  Writes go through a temporary file and a
// rename so readers never see a partial surface.
// ---------------------------------------------------------------------------

inline void save_surface(const SampledSurface& s, const std::string& path) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.precision(17);
    out << "curvelab-surface v1 " << s.grid.nx << ' ' << s.grid.ny << ' ' << s.dim << '\n';
    for (int j = 0; j < s.grid.ny; ++j) {
      for (int i = 0; i < s.grid.nx; ++i) {
        out << s.grid.x(i) << ' ' << s.grid.y(j);
        for (double v : s.at(i, j)) out << ' ' << v;
        out << '\n';
      }
    }
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

inline SampledSurface load_surface(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string tag, version;
  int nx = 0, ny = 0, dim = 0;
  in >> tag >> version >> nx >> ny >> dim;
  if (!in || tag != "curvelab-surface" || version != "v1")
    throw std::runtime_error(path + " is not a curvelab-surface v1 file");
  if (nx < 2 || ny < 2 || dim < 3)
    throw std::runtime_error(path + " declares an unusable grid or dimension");

  SampledSurface s;
  s.dim = dim;
  s.points.resize(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny));
  std::vector<double> xs(static_cast<std::size_t>(nx)), ys(static_cast<std::size_t>(ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      double x, y;
      std::vector<double> p(static_cast<std::size_t>(dim));
      in >> x >> y;
      double n2 = 0.0;
      for (double& v : p) {
        in >> v;
        n2 += v * v;
      }
      if (!in)
        throw std::runtime_error(path + " ends before node " + std::to_string(j * nx + i));
      if (std::abs(std::sqrt(n2) - 1.0) > 1e-8)
        throw std::runtime_error(path + " holds a point off the unit sphere at node " +
                                 std::to_string(j * nx + i));
      xs[static_cast<std::size_t>(i)] = x;
      ys[static_cast<std::size_t>(j)] = y;
      s.points[static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) +
               static_cast<std::size_t>(i)] = std::move(p);
    }
  }
  s.grid.nx = nx;
  s.grid.ny = ny;
  s.grid.x0 = xs.front();
  s.grid.x1 = xs.back();
  s.grid.y0 = ys.front();
  s.grid.y1 = ys.back();
  s.provenance = "loaded from " + path;
  return s;
}

// ---------------------------------------------------------------------------
// Moduli probe: how close does a weighted direct sum of family members come
// to closing up over one period?  Each family member is transported across
// two x-periods in one sweep, so the second half continues the gauge of the
// first instead of restarting it; comparing the two halves node by node then
// measures the genuine monodromy defect of the member (restarting the gauge
// would erase it, since the transport connection itself is periodic).  The
// closure defect of the weighted sum maps out where in the angle simplex the
// construction descends to the torus.  The Procrustes-aligned residual is
// reported alongside as a control: block rotations can always align the two
// halves, so it stays near zero and any structure lives in the raw defect.
// ---------------------------------------------------------------------------

struct ModuliOptions {
  int resolution = 16;        // samples per angle across [0, pi)
  int patch = 16;             // nodes per side of the probe patch
  int substeps = 8;           // RK4 substeps per cell (coarse on purpose)
  double closure_tol = 1e-3;  // sub-level threshold for component counting
};

struct ModuliSample {
  std::vector<double> angles;
  double closure = 0.0;  // sup node distance between the two reconstructions
  double aligned = 0.0;  // RMS distance after optimal orthogonal alignment
};

struct ModuliReport {
  int m = 0;
  std::vector<double> weights;
  std::vector<double> angle_grid;
  std::vector<ModuliSample> samples;
  double min_closure = std::numeric_limits<double>::infinity();
  double max_closure = 0.0;
  int sublevel_components = 0;  // connected components of {closure < tol}
};

inline ModuliReport moduli_probe(const SurfaceSpec& spec, const std::vector<double>& weights,
                                 const ModuliOptions& opt = {}) {
  if (!spec.periodic) throw std::invalid_argument("the moduli probe needs a periodic surface");
  if (opt.resolution < 8)
    throw std::invalid_argument("the moduli probe needs at least 8 samples per angle");
  if (opt.patch < 4) throw std::invalid_argument("probe patch too small");
  const int m = static_cast<int>(weights.size());
  if (m < 1) throw std::invalid_argument("the probe needs at least one weight");
  {
    double s2 = 0.0;
    for (double a : weights) s2 += a * a;
    if (std::abs(s2 - 1.0) > 1e-12)
      throw std::invalid_argument("probe weights must have unit square sum");
  }

  ModuliReport rep;
  rep.m = m;
  rep.weights = weights;
  const double pi = 3.14159265358979323846;
  for (int i = 0; i < opt.resolution; ++i)
    rep.angle_grid.push_back(pi * static_cast<double>(i) / static_cast<double>(opt.resolution));

  Grid base;
  base.nx = base.ny = opt.patch;
  base.x0 = 0.0;
  base.x1 = spec.period_x;
  base.y0 = 0.0;
  base.y1 = spec.period_y;
  Grid doubled = base;
  doubled.nx = 2 * opt.patch - 1;  // node i + patch - 1 sits one period past node i
  doubled.x1 = 2.0 * spec.period_x;

  FamilyOptions lean;
  lean.substeps = opt.substeps;
  lean.derivatives = false;
  lean.diagnostics = false;

  // One two-period reconstruction per sampled angle, sliced into the base
  // half and the gauge-continued shifted half; shared by every tuple.
  std::vector<SampledSurface> on_base(static_cast<std::size_t>(opt.resolution));
  std::vector<SampledSurface> on_shift(static_cast<std::size_t>(opt.resolution));
  deform_detail::parallel_ranges(opt.resolution, [&](int a0, int a1) {
    for (int a = a0; a < a1; ++a) {
      const double th = rep.angle_grid[static_cast<std::size_t>(a)];
      const SampledSurface two = associated_family(spec, th, doubled, lean).surface;
      SampledSurface lo, hi;
      lo.grid = hi.grid = base;
      lo.dim = hi.dim = two.dim;
      lo.points.resize(static_cast<std::size_t>(base.size()));
      hi.points.resize(static_cast<std::size_t>(base.size()));
      for (int j = 0; j < base.ny; ++j) {
        for (int i = 0; i < base.nx; ++i) {
          const std::size_t k = static_cast<std::size_t>(base.index(i, j));
          lo.points[k] = two.points[static_cast<std::size_t>(doubled.index(i, j))];
          hi.points[k] =
              two.points[static_cast<std::size_t>(doubled.index(i + opt.patch - 1, j))];
        }
      }
      on_base[static_cast<std::size_t>(a)] = std::move(lo);
      on_shift[static_cast<std::size_t>(a)] = std::move(hi);
    }
  });

  // Ordered angle tuples: strictly increasing index vectors.
  std::vector<std::vector<int>> tuples;
  std::vector<int> cur(static_cast<std::size_t>(m));
  const std::function<void(int, int)> enumerate = [&](int pos, int start) {
    if (pos == m) {
      tuples.push_back(cur);
      return;
    }
    for (int i = start; i < opt.resolution; ++i) {
      cur[static_cast<std::size_t>(pos)] = i;
      enumerate(pos + 1, i + 1);
    }
  };
  enumerate(0, 0);

  rep.samples.resize(tuples.size());
  deform_detail::parallel_ranges(static_cast<int>(tuples.size()), [&](int t0, int t1) {
    for (int t = t0; t < t1; ++t) {
      const auto& tpl = tuples[static_cast<std::size_t>(t)];
      std::vector<SampledSurface> ma, ms;
      ma.reserve(tpl.size());
      ms.reserve(tpl.size());
      for (int idx : tpl) {
        ma.push_back(on_base[static_cast<std::size_t>(idx)]);
        ms.push_back(on_shift[static_cast<std::size_t>(idx)]);
      }
      const SampledSurface sa = direct_sum(ma, weights);
      const SampledSurface sb = direct_sum(ms, weights);
      ModuliSample& smp = rep.samples[static_cast<std::size_t>(t)];
      for (int idx : tpl) smp.angles.push_back(rep.angle_grid[static_cast<std::size_t>(idx)]);
      double sup = 0.0;
      for (std::size_t k = 0; k < sa.points.size(); ++k) {
        double d2 = 0.0;
        for (std::size_t cc = 0; cc < sa.points[k].size(); ++cc) {
          const double d = sa.points[k][cc] - sb.points[k][cc];
          d2 += d * d;
        }
        sup = std::max(sup, std::sqrt(d2));
      }
      smp.closure = sup;
      smp.aligned = congruence(sa, sb).residual;
    }
  });

  for (const auto& smp : rep.samples) {
    rep.min_closure = std::min(rep.min_closure, smp.closure);
    rep.max_closure = std::max(rep.max_closure, smp.closure);
  }

  // Connected components of the sub-level set over the tuple adjacency
  // graph (one index stepping by one, order preserved).
  const auto tuple_pos = [&](const std::vector<int>& t) -> int {
    for (std::size_t q = 0; q < tuples.size(); ++q)
      if (tuples[q] == t) return static_cast<int>(q);
    return -1;
  };
  std::vector<int> comp(tuples.size(), -1);
  int ncomp = 0;
  for (std::size_t seed = 0; seed < tuples.size(); ++seed) {
    if (comp[seed] >= 0 || rep.samples[seed].closure >= opt.closure_tol) continue;
    std::vector<int> stack{static_cast<int>(seed)};
    comp[seed] = ncomp;
    while (!stack.empty()) {
      const int k = stack.back();
      stack.pop_back();
      std::vector<int> t = tuples[static_cast<std::size_t>(k)];
      for (int pos = 0; pos < m; ++pos) {
        for (int dir = -1; dir <= 1; dir += 2) {
          std::vector<int> u = t;
          u[static_cast<std::size_t>(pos)] += dir;
          if (u[static_cast<std::size_t>(pos)] < 0 ||
              u[static_cast<std::size_t>(pos)] >= opt.resolution)
            continue;
          bool ordered = true;
          for (int q = 1; q < m; ++q)
            if (!(u[static_cast<std::size_t>(q)] > u[static_cast<std::size_t>(q - 1)]))
              ordered = false;
          if (!ordered) continue;
          const int w = tuple_pos(u);
          if (w < 0 || comp[static_cast<std::size_t>(w)] >= 0) continue;
          if (rep.samples[static_cast<std::size_t>(w)].closure >= opt.closure_tol) continue;
          comp[static_cast<std::size_t>(w)] = ncomp;
          stack.push_back(w);
        }
      }
    }
    ++ncomp;
  }
  rep.sublevel_components = ncomp;
  return rep;
}

}  // namespace curvelab
