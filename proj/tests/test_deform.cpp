// Deformation toolkit: associated families, direct sums, polar surfaces,
// and the functionals that verify them.
//
// The frame calculus is checked against central finite differences before
// anything built on it is trusted.  Family and sum thresholds follow the
// construction's error budget (RK4 transport plus sixth-order residual
// stencils); congruence separations and the moduli landscape are frozen
// regression values measured once at the pinned grids.

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "curvelab/catalog.hpp"
#include "curvelab/deform.hpp"
#include "curvelab/grid.hpp"
#include "curvelab/surface.hpp"

using curvelab::associated_family;
using curvelab::closing_order;
using curvelab::congruence;
using curvelab::CongruenceResult;
using curvelab::DeformationSpec;
using curvelab::direct_sum;
using curvelab::FamilyOptions;
using curvelab::FamilyResult;
using curvelab::frame_sample;
using curvelab::FrameSample;
using curvelab::Grid;
using curvelab::isometry_residual;
using curvelab::minimality_residual;
using curvelab::moduli_probe;
using curvelab::ModuliOptions;
using curvelab::ModuliReport;
using curvelab::open_patch;
using curvelab::polar_surface;
using curvelab::SampledSurface;
using curvelab::sample_surface;
using curvelab::substantial_dimension;
using curvelab::SurfaceSpec;

namespace {

constexpr double kPi = 3.14159265358979323846;

SurfaceSpec catalog_spec(const std::string& name) {
  return curvelab::get_catalog_entry(name).charts.front();
}

// Closed-form polar of the equilateral torus: each (cos, sin) phase pair
// turns into (sin, -cos).  Orthogonal to the position, both tangents, and
// all second derivatives, so it spans the second normal line exactly.
SurfaceSpec torus_polar_spec() {
  return curvelab::parse_surface(R"(
dim 6
f = ( sqrt(3)*sin(sqrt(2)*x)/3,
      -sqrt(3)*cos(sqrt(2)*x)/3,
      sqrt(3)*sin(sqrt(2)*(-x/2 + sqrt(3)*y/2))/3,
      -sqrt(3)*cos(sqrt(2)*(-x/2 + sqrt(3)*y/2))/3,
      sqrt(3)*sin(sqrt(2)*(-x/2 - sqrt(3)*y/2))/3,
      -sqrt(3)*cos(sqrt(2)*(-x/2 - sqrt(3)*y/2))/3 )
periodic 8.885765876316732 5.130199320647456
)");
}

double sup_node_distance(const SampledSurface& a, const SampledSurface& b) {
  double sup = 0.0;
  for (std::size_t k = 0; k < a.points.size(); ++k) {
    double d2 = 0.0;
    for (std::size_t c = 0; c < a.points[k].size(); ++c) {
      const double d = a.points[k][c] - b.points[k][c];
      d2 += d * d;
    }
    sup = std::max(sup, std::sqrt(d2));
  }
  return sup;
}

// ---------------------------------------------------------------------------
// Frame calculus oracles.
// ---------------------------------------------------------------------------

// The connection matrices produced through dual arithmetic must match a
// central finite difference of the frame itself.  The Clifford torus is used
// because its curvature ellipse is eccentric, so the frame is stable under
// small parameter shifts and the difference quotient is meaningful.
TEST(FrameSample, ConnectionMatchesFiniteDifference) {
  const SurfaceSpec cl = catalog_spec("clifford_s3");
  const int order = closing_order(cl, 0.3, 0.4);
  EXPECT_EQ(order, 2);
  const double x = 0.37, y = 0.81, h = 1e-5;
  const FrameSample f0 = frame_sample(cl, x, y, order);
  const FrameSample fxp = frame_sample(cl, x + h, y, order);
  const FrameSample fxm = frame_sample(cl, x - h, y, order);
  const FrameSample fyp = frame_sample(cl, x, y + h, order);
  const FrameSample fym = frame_sample(cl, x, y - h, order);
  const Eigen::MatrixXd fd_x = f0.M.transpose() * ((fxp.M - fxm.M) / (2.0 * h));
  const Eigen::MatrixXd fd_y = f0.M.transpose() * ((fyp.M - fym.M) / (2.0 * h));
  EXPECT_LT((fd_x - f0.conn_x).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((fd_y - f0.conn_y).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FrameSample, FrameIsOrthonormalAndConnectionSkew) {
  const SurfaceSpec cl = catalog_spec("clifford_s3");
  const FrameSample f = frame_sample(cl, -0.9, 1.7, 2);
  const Eigen::MatrixXd gram =
      f.M.transpose() * f.M - Eigen::MatrixXd::Identity(f.n, f.n);
  EXPECT_LT(gram.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((f.conn_x + f.conn_x.transpose()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((f.conn_y + f.conn_y.transpose()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(f.F, 1.0, 1e-12);
}

TEST(ClosingOrder, KnownSurfaces) {
  EXPECT_EQ(closing_order(catalog_spec("geodesic_s2"), 0.2, -0.3), 1);
  EXPECT_EQ(closing_order(catalog_spec("clifford_s3"), 0.3, 0.4), 2);
  EXPECT_EQ(closing_order(catalog_spec("flat_torus_s5"), 0.5, 0.7), 3);
  // A totally geodesic sphere sits in a proper subspace and never spans.
  EXPECT_THROW(closing_order(catalog_spec("assoc_s2"), 0.2, 0.3), std::runtime_error);
}

// ---------------------------------------------------------------------------
// Deformation parameter validation.
// ---------------------------------------------------------------------------

TEST(DeformationSpec, ValidatesWeightsAndAngles) {
  EXPECT_NO_THROW(DeformationSpec::make({0.6, 0.8}, {0.0, kPi / 3.0}));
  EXPECT_THROW(DeformationSpec::make({}, {}), std::invalid_argument);
  EXPECT_THROW(DeformationSpec::make({1.0}, {0.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(DeformationSpec::make({0.5, 0.5}, {0.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(DeformationSpec::make({0.6, 0.8}, {1.0, 0.5}), std::invalid_argument);
  EXPECT_THROW(DeformationSpec::make({0.6, 0.8}, {0.0, kPi}), std::invalid_argument);
  EXPECT_THROW(DeformationSpec::make({0.6, 0.8}, {-0.1, 1.0}), std::invalid_argument);
  EXPECT_THROW(DeformationSpec::make({0.6, 0.8}, {1.0, 1.0}), std::invalid_argument);

  const DeformationSpec degenerate = DeformationSpec::make({1.0, 0.0}, {0.0, 1.0});
  EXPECT_FALSE(degenerate.substantial);
  EXPECT_TRUE(DeformationSpec::make({0.6, 0.8}, {0.0, 1.0}).substantial);
}

// ---------------------------------------------------------------------------
// Associated family.
// ---------------------------------------------------------------------------

TEST(AssociatedFamily, AngleZeroReproducesSource) {
  const SurfaceSpec torus = catalog_spec("flat_torus_s5");
  const Grid patch = open_patch(torus, 64, 64);
  FamilyOptions opt;
  opt.substeps = 8;
  const FamilyResult r = associated_family(torus, 0.0, patch, opt);
  const SampledSurface src = sample_surface(torus, patch);
  // The transport connection vanishes identically at angle zero, so the
  // reproduction is exact, far inside the 1e-8 budget.
  EXPECT_LT(sup_node_distance(r.surface, src), 1e-8);
  EXPECT_LT(r.frame_drift, 1e-12);
  EXPECT_EQ(r.compatibility, 0.0);
}

TEST(AssociatedFamily, QuarterTurnOfTheTorus) {
  const SurfaceSpec torus = catalog_spec("flat_torus_s5");
  const Grid patch = open_patch(torus, 48, 48);
  FamilyOptions opt;
  opt.substeps = 16;
  const FamilyResult r = associated_family(torus, kPi / 4.0, patch, opt);

  const SampledSurface src = sample_surface(torus, patch);
  EXPECT_LT(isometry_residual(r.surface, src), 1e-6);
  EXPECT_LT(minimality_residual(r.surface), 1e-5);

  // Nodewise invariants of the family: conformal factor and the modulus of
  // the curvature ellipse's bilinear square.
  EXPECT_LT(r.conformal_deviation, 1e-6);
  EXPECT_LT(r.hopf_deviation, 1e-6);
  // Transport around the two monotone staircase paths must agree.
  EXPECT_LT(r.path_consistency, 1e-6);
  EXPECT_LT(r.frame_drift, 1e-10);
  EXPECT_LT(r.compatibility, 1e-12);
}

TEST(AssociatedFamily, PreservesNonzeroEllipseModulus) {
  // The Clifford torus has |xi . xi| = 1/4 at the first level, so this
  // checks a nontrivial invariant rather than zero against zero.
  const SurfaceSpec cl = catalog_spec("clifford_s3");
  const Grid patch = open_patch(cl, 16, 16);
  FamilyOptions opt;
  opt.substeps = 12;
  const FamilyResult r = associated_family(cl, kPi / 6.0, patch, opt);
  EXPECT_LT(r.conformal_deviation, 1e-12);
  EXPECT_LT(r.hopf_deviation, 1e-12);
  EXPECT_LT(r.path_consistency, 1e-8);
}

TEST(AssociatedFamily, KeepsTransportedFrames) {
  const SurfaceSpec torus = catalog_spec("flat_torus_s5");
  const Grid patch = open_patch(torus, 8, 8);
  FamilyOptions opt;
  opt.substeps = 8;
  opt.keep_frames = true;
  const FamilyResult r = associated_family(torus, kPi / 4.0, patch, opt);
  ASSERT_TRUE(r.frames.has_value());
  EXPECT_EQ(static_cast<int>(r.frames->frames.size()), patch.size());
  EXPECT_LT(r.frames->t_theta_defect, 1e-10);
  // Every stored frame must be orthogonal and carry the surface point in
  // its first column.
  for (int k = 0; k < patch.size(); ++k) {
    const Eigen::MatrixXd& Fk = r.frames->frames[static_cast<std::size_t>(k)];
    const Eigen::MatrixXd gram =
        Fk.transpose() * Fk - Eigen::MatrixXd::Identity(r.surface.dim, r.surface.dim);
    EXPECT_LT(gram.cwiseAbs().maxCoeff(), 1e-9);
    double d2 = 0.0;
    for (int c = 0; c < r.surface.dim; ++c) {
      const double d =
          Fk(c, 0) - r.surface.points[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)];
      d2 += d * d;
    }
    EXPECT_LT(std::sqrt(d2), 1e-9);
  }
}

TEST(AssociatedFamily, RejectsBadInput) {
  const SurfaceSpec torus = catalog_spec("flat_torus_s5");
  const Grid periodic = curvelab::make_grid(torus, 16, 16);
  ASSERT_TRUE(periodic.periodic_x);
  EXPECT_THROW(associated_family(torus, 0.3, periodic), std::invalid_argument);

  const Grid patch = open_patch(torus, 8, 8);
  EXPECT_THROW(associated_family(torus, std::nan(""), patch), std::invalid_argument);
  FamilyOptions bad;
  bad.substeps = 0;
  EXPECT_THROW(associated_family(torus, 0.3, patch, bad), std::invalid_argument);
}

TEST(AssociatedFamily, RejectsNonMinimalSurfaces) {
  // A small sphere is isometric but not minimal: the rotated connection
  // fails the Gauss-Codazzi test at any nonzero angle.
  const SurfaceSpec ss = catalog_spec("smallsphere_s3");
  const Grid patch = open_patch(ss, 8, 8);
  EXPECT_THROW(associated_family(ss, kPi / 3.0, patch), std::runtime_error);
  // At angle zero the deformation is the identity and nothing is violated.
  const FamilyResult r0 = associated_family(ss, 0.0, patch);
  EXPECT_EQ(r0.compatibility, 0.0);
}

// ---------------------------------------------------------------------------
// Direct sums.
// ---------------------------------------------------------------------------

TEST(DirectSum, TwoFamilyMembersSpanTheBigSphere) {
  const SurfaceSpec torus = catalog_spec("flat_torus_s5");
  const Grid patch = open_patch(torus, 48, 48);
  FamilyOptions opt;
  opt.substeps = 16;
  const SampledSurface g0 = associated_family(torus, 0.0, patch, opt).surface;
  const SampledSurface g1 = associated_family(torus, kPi / 3.0, patch, opt).surface;
  const SampledSurface sum = direct_sum({g0, g1}, {0.6, 0.8});

  EXPECT_EQ(sum.dim, 12);
  const SampledSurface src = sample_surface(torus, patch);
  EXPECT_LT(isometry_residual(sum, src), 1e-6);
  EXPECT_LT(minimality_residual(sum), 1e-5);
  EXPECT_EQ(substantial_dimension(sum), 12);
}

TEST(DirectSum, VanishingWeightCollapsesTheSpan) {
  const SurfaceSpec torus = catalog_spec("flat_torus_s5");
  const Grid patch = open_patch(torus, 24, 24);
  FamilyOptions opt;
  opt.substeps = 8;
  const SampledSurface g0 = associated_family(torus, 0.0, patch, opt).surface;
  const SampledSurface g1 = associated_family(torus, kPi / 3.0, patch, opt).surface;
  const SampledSurface degen = direct_sum({g0, g1}, {1.0, 0.0});
  EXPECT_EQ(degen.dim, 12);
  EXPECT_EQ(substantial_dimension(degen), 6);
}

TEST(DirectSum, ValidatesInput) {
  const SurfaceSpec torus = catalog_spec("flat_torus_s5");
  const SampledSurface a = sample_surface(torus, open_patch(torus, 8, 8));
  const SampledSurface b = sample_surface(torus, open_patch(torus, 10, 10));
  EXPECT_THROW(direct_sum({a, b}, {0.6, 0.8}), std::invalid_argument);
  EXPECT_THROW(direct_sum({a, a}, {0.5, 0.5}), std::invalid_argument);
  EXPECT_THROW(direct_sum({}, {}), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Minimality and isometry functionals.
// ---------------------------------------------------------------------------

TEST(MinimalityResidual, GeodesicSphereOnAFineGrid) {
  const SurfaceSpec geo = catalog_spec("geodesic_s2");
  Grid g;
  g.nx = g.ny = 256;
  g.x0 = geo.domain.x0;
  g.x1 = geo.domain.x1;
  g.y0 = geo.domain.y0;
  g.y1 = geo.domain.y1;
  const SampledSurface s = sample_surface(geo, g);
  EXPECT_LT(minimality_residual(s), 1e-8);
}

TEST(MinimalityResidual, FlagsARenormalizedGraphPerturbation) {
  // A bump grafted onto the great-sphere chart and pushed back to the
  // sphere: still immersed and nearly conformal, but visibly non-minimal.
  const SurfaceSpec bent = curvelab::parse_surface(R"(
dim 3
f = ( 2*x/(x^2 + y^2 + 1) + 4/100*sin(3*x)*sin(2*y)/(x^2 + y^2 + 1),
      2*y/(x^2 + y^2 + 1),
      (-x^2 - y^2 + 1)/(x^2 + y^2 + 1) )
domain x in [-3, 3], y in [-3, 3]
normalize
)");
  Grid g;
  g.nx = g.ny = 128;
  g.x0 = g.y0 = -3.0;
  g.x1 = g.y1 = 3.0;
  const SampledSurface s = sample_surface(bent, g);
  EXPECT_GT(minimality_residual(s), 1e-2);
}

TEST(MinimalityResidual, RejectsAnisotropicSampling) {
  // The same great sphere but with the x coordinate running twice as fast:
  // conformal as a surface, far from isothermal as a parametrization.
  const SurfaceSpec skew = curvelab::parse_surface(R"(
dim 3
f = ( 4*x/(4*x^2 + y^2 + 1),
      2*y/(4*x^2 + y^2 + 1),
      (-4*x^2 - y^2 + 1)/(4*x^2 + y^2 + 1) )
domain x in [-1, 1], y in [-2, 2]
)");
  Grid g;
  g.nx = g.ny = 32;
  g.x0 = -1.0;
  g.x1 = 1.0;
  g.y0 = -2.0;
  g.y1 = 2.0;
  const SampledSurface s = sample_surface(skew, g);
  EXPECT_THROW(minimality_residual(s), std::invalid_argument);
}

TEST(IsometryResidual, SeparatesDifferentGeometries) {
  // The great sphere and the flat torus sampled over one grid: their
  // conformal factors disagree at order one.
  const SurfaceSpec torus = catalog_spec("flat_torus_s5");
  const SurfaceSpec geo = catalog_spec("geodesic_s2");
  const Grid patch = open_patch(torus, 24, 24);
  const SampledSurface a = sample_surface(torus, patch);
  const SampledSurface b = sample_surface(geo, patch);
  EXPECT_GT(isometry_residual(a, b), 0.1);
  EXPECT_THROW(isometry_residual(a, sample_surface(torus, open_patch(torus, 12, 12))),
               std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Congruence.
// ---------------------------------------------------------------------------

TEST(Congruence, RecoversARandomRotation) {
  const SurfaceSpec torus = catalog_spec("flat_torus_s5");
  const Grid patch = open_patch(torus, 16, 16);
  const SampledSurface a = sample_surface(torus, patch, false);

  std::mt19937 rng(20240817);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd raw(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) raw(i, j) = gauss(rng);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ();

  SampledSurface b = a;
  for (auto& p : b.points) {
    const Eigen::VectorXd v = q * Eigen::Map<const Eigen::VectorXd>(p.data(), 6);
    for (int c = 0; c < 6; ++c) p[static_cast<std::size_t>(c)] = v[c];
  }
  const CongruenceResult r = congruence(a, b);
  EXPECT_TRUE(r.congruent);
  EXPECT_LT(r.residual, 1e-10);
  EXPECT_LT((r.rotation - q).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_FALSE(r.degenerate);

  // Symmetry and invariance under a consistent relabeling of the nodes.
  const CongruenceResult rb = congruence(b, a);
  EXPECT_NEAR(r.residual, rb.residual, 1e-12);
  SampledSurface ar = a, br = b;
  std::reverse(ar.points.begin(), ar.points.end());
  std::reverse(br.points.begin(), br.points.end());
  EXPECT_NEAR(congruence(ar, br).residual, r.residual, 1e-12);
}

TEST(Congruence, SeparatesDistinctFamilyMembers) {
  const SurfaceSpec torus = catalog_spec("flat_torus_s5");
  const Grid patch = open_patch(torus, 32, 32);
  FamilyOptions opt;
  opt.substeps = 12;
  const SampledSurface g0 = associated_family(torus, 0.0, patch, opt).surface;
  const SampledSurface g1 = associated_family(torus, kPi / 3.0, patch, opt).surface;
  const CongruenceResult r = congruence(g0, g1);
  EXPECT_FALSE(r.congruent);
  // Frozen separation: 0.9299 at this grid; anything comparable is fine,
  // the point is that it stays far above the congruence threshold.
  EXPECT_GT(r.residual, 0.5);
}

// ---------------------------------------------------------------------------
// Polar surfaces.
// ---------------------------------------------------------------------------

TEST(PolarSurface, MatchesTheClosedFormAndInvolutes) {
  const SurfaceSpec torus = catalog_spec("flat_torus_s5");
  const SurfaceSpec polar_spec = torus_polar_spec();
  const Grid patch = open_patch(torus, 32, 32);

  const SampledSurface g = sample_surface(torus, patch, false);
  const SampledSurface gp = polar_surface(torus, patch);
  const SampledSurface gp_exact = sample_surface(polar_spec, patch, false);

  const CongruenceResult against_exact = congruence(gp, gp_exact);
  EXPECT_TRUE(against_exact.congruent);
  EXPECT_LT(against_exact.residual, 1e-10);

  // The equilateral torus is congruent to its own polar, and taking the
  // polar twice returns the original surface.
  EXPECT_LT(congruence(gp, g).residual, 1e-5);
  const SampledSurface gpp = polar_surface(polar_spec, patch);
  EXPECT_LT(congruence(gpp, g).residual, 1e-5);
}

TEST(PolarSurface, RejectsUnsuitableInput) {
  Grid g;
  g.nx = g.ny = 8;
  g.x0 = g.y0 = -1.0;
  g.x1 = g.y1 = 1.0;
  // Wrong ambient dimension.
  EXPECT_THROW(polar_surface(catalog_spec("geodesic_s2"), g), std::invalid_argument);
  // Right dimension but no second normal line: a great sphere padded into
  // six coordinates never spans.
  const SurfaceSpec padded = curvelab::parse_surface(R"(
dim 6
f = ( 2*x/(x^2 + y^2 + 1),
      2*y/(x^2 + y^2 + 1),
      (-x^2 - y^2 + 1)/(x^2 + y^2 + 1),
      0, 0, 0 )
domain x in [-2, 2], y in [-2, 2]
)");
  EXPECT_THROW(polar_surface(padded, g), std::runtime_error);
}

TEST(PolarSurface, AxisMarginVanishesForTheSelfPolarTorus) {
  const SurfaceSpec torus = catalog_spec("flat_torus_s5");
  const Grid grid = curvelab::make_grid(torus, 24, 24);
  const curvelab::GridAnalysis a = curvelab::analyze_grid(torus, grid, 3);
  const curvelab::GridAnalysis ap = curvelab::analyze_grid(torus_polar_spec(), grid, 3);
  const curvelab::ScalarField margin = curvelab::polar_axis_margin(a, ap);
  const curvelab::FieldStats st = curvelab::field_stats(margin);
  EXPECT_EQ(st.valid_count, grid.size());
  EXPECT_LT(st.sup_abs, 1e-10);
}

// ---------------------------------------------------------------------------
// Serialization.
// ---------------------------------------------------------------------------

TEST(SurfaceFiles, RoundTripPreservesEverything) {
  const SurfaceSpec torus = catalog_spec("flat_torus_s5");
  const Grid patch = open_patch(torus, 16, 12);
  const SampledSurface s = sample_surface(torus, patch, false);
  const std::string path =
      (std::filesystem::temp_directory_path() / "curvelab_roundtrip.surface").string();
  curvelab::save_surface(s, path);
  const SampledSurface back = curvelab::load_surface(path);
  EXPECT_EQ(back.dim, s.dim);
  EXPECT_EQ(back.grid.nx, s.grid.nx);
  EXPECT_EQ(back.grid.ny, s.grid.ny);
  EXPECT_NEAR(back.grid.x1, s.grid.x1, 1e-12);
  EXPECT_NEAR(back.grid.y1, s.grid.y1, 1e-12);
  EXPECT_LT(sup_node_distance(back, s), 1e-12);
  std::filesystem::remove(path);
}

TEST(SurfaceFiles, RejectsForeignAndCorruptFiles) {
  const auto tmp = std::filesystem::temp_directory_path();
  const std::string bad_header = (tmp / "curvelab_bad_header.surface").string();
  {
    std::ofstream out(bad_header);
    out << "not-a-surface v1 2 2 3\n";
  }
  EXPECT_THROW(curvelab::load_surface(bad_header), std::runtime_error);

  const std::string off_sphere = (tmp / "curvelab_off_sphere.surface").string();
  {
    std::ofstream out(off_sphere);
    out << "curvelab-surface v1 2 2 3\n";
    out << "0 0 1 0 0\n0 1 1 0 0\n1 0 0.5 0.5 0\n1 1 0 0 1\n";
  }
  EXPECT_THROW(curvelab::load_surface(off_sphere), std::runtime_error);

  const std::string truncated = (tmp / "curvelab_truncated.surface").string();
  {
    std::ofstream out(truncated);
    out << "curvelab-surface v1 2 2 3\n0 0 1 0 0\n";
  }
  EXPECT_THROW(curvelab::load_surface(truncated), std::runtime_error);

  std::filesystem::remove(bad_header);
  std::filesystem::remove(off_sphere);
  std::filesystem::remove(truncated);
}

// ---------------------------------------------------------------------------
// Moduli probe.
// ---------------------------------------------------------------------------

TEST(ModuliProbe, TorusClosesOnlyAtAngleZero) {
  const SurfaceSpec torus = catalog_spec("flat_torus_s5");
  ModuliOptions opt;
  opt.resolution = 12;
  opt.patch = 12;
  opt.substeps = 8;
  const ModuliReport rep = moduli_probe(torus, {1.0}, opt);
  ASSERT_EQ(static_cast<int>(rep.samples.size()), 12);

  // Frozen landscape: the member at angle zero closes exactly, every other
  // sampled member misses by order one, and the sub-level set is one point.
  EXPECT_LT(rep.samples.front().closure, 1e-8);
  EXPECT_GT(rep.max_closure, 1.0);
  EXPECT_EQ(rep.sublevel_components, 1);
  for (std::size_t k = 1; k < rep.samples.size(); ++k)
    EXPECT_GT(rep.samples[k].closure, 0.5);
  // Control channel: optimal alignment erases the defect, so all structure
  // lives in the raw closure.
  for (const auto& smp : rep.samples) EXPECT_LT(smp.aligned, 1e-8);
}

TEST(ModuliProbe, ValidatesInput) {
  const SurfaceSpec torus = catalog_spec("flat_torus_s5");
  ModuliOptions coarse;
  coarse.resolution = 4;
  EXPECT_THROW(moduli_probe(torus, {1.0}, coarse), std::invalid_argument);
  EXPECT_THROW(moduli_probe(catalog_spec("geodesic_s2"), {1.0}), std::invalid_argument);
  EXPECT_THROW(moduli_probe(torus, {0.5, 0.5}), std::invalid_argument);
}

}  // namespace
