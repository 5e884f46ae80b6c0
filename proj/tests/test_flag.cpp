// Pointwise moving-frame analysis checked against hand-derived closed forms.
//
// Every numeric expectation below was worked out on paper from the explicit
// parametrizations (and double-checked symbolically where an expression got
// long); the engine never feeds its own output back as an expectation.

#include <cmath>
#include <complex>
#include <random>

#include <gtest/gtest.h>

#include "curvelab/flag.hpp"
#include "curvelab/jet.hpp"
#include "curvelab/surface.hpp"

namespace {

using curvelab::AnalyzeOptions;
using curvelab::EvalError;
using curvelab::FlagReport;
using curvelab::Jet;
using curvelab::SurfaceSpec;
using curvelab::Vec2;
using curvelab::VecJet;

constexpr double kInvSqrt2 = 0.7071067811865475;
constexpr double kInvSqrt3 = 0.5773502691896258;

// Round unit two-sphere inside S^2, stereographic parametrization.
const char* kGeodesicSphere = R"(
dim 3
f = ( 2*x / (1 + x^2 + y^2),
      2*y / (1 + x^2 + y^2),
      (1 - x^2 - y^2) / (1 + x^2 + y^2) )
)";

// Equilateral flat torus in S^5: three unit-speed circle factors whose
// frequency vectors sit at mutual angle 2*pi/3.  The induced metric is the
// standard flat one (F = 1) and the parametrization is sphere-minimal.
const char* kFlatTorus = R"(
dim 6
f = ( cos(sqrt(2)*x)/sqrt(3),
      sin(sqrt(2)*x)/sqrt(3),
      cos(sqrt(2)*(-x/2 + sqrt(3)*y/2))/sqrt(3),
      sin(sqrt(2)*(-x/2 + sqrt(3)*y/2))/sqrt(3),
      cos(sqrt(2)*(-x/2 - sqrt(3)*y/2))/sqrt(3),
      sin(sqrt(2)*(-x/2 - sqrt(3)*y/2))/sqrt(3) )
)";

// Square Clifford torus in S^3: the first normal space is a line bundle.
const char* kCliffordTorus = R"(
dim 4
f = ( cos(sqrt(2)*x)/sqrt(2),
      sin(sqrt(2)*x)/sqrt(2),
      cos(sqrt(2)*y)/sqrt(2),
      sin(sqrt(2)*y)/sqrt(2) )
)";

// Quadratic sphere immersion into S^4 (constant curvature 1/3) written in
// stereographic coordinates; the first Hopf coefficient vanishes.
const char* kVeroneseS4 = R"(
dim 5
f = ( 4*sqrt(3)*x*y / (1 + x^2 + y^2)^2,
      2*sqrt(3)*x*(1 - x^2 - y^2) / (1 + x^2 + y^2)^2,
      2*sqrt(3)*y*(1 - x^2 - y^2) / (1 + x^2 + y^2)^2,
      2*sqrt(3)*(x^2 - y^2) / (1 + x^2 + y^2)^2,
      (2*(x^2 + y^2) - (1 - x^2 - y^2)^2) / (1 + x^2 + y^2)^2 )
)";

// Small (non-great) two-sphere: conformal, unit-norm, but not minimal.
const char* kSmallSphere = R"(
dim 4
f = ( 2*x, 2*y, 1 - x^2 - y^2, 0.75*(1 + x^2 + y^2) )
normalize
)";

// Catenoid in Euclidean three-space: conformal with nonconstant curvature
// K = -1/cosh(x)^4; exercises the intrinsic-curvature and connection-form
// formulas away from the spherical setting.
const char* kCatenoid = R"(
dim 3
f = ( cosh(x)*cos(y), cosh(x)*sin(y), x )
)";

// Flat torus precomposed with the branched double cover z -> z^2.
const char* kTorusBranch = R"(
dim 6
f = ( cos(sqrt(2)*(x^2 - y^2))/sqrt(3),
      sin(sqrt(2)*(x^2 - y^2))/sqrt(3),
      cos(sqrt(2)*(-(x^2 - y^2)/2 + sqrt(3)*x*y))/sqrt(3),
      sin(sqrt(2)*(-(x^2 - y^2)/2 + sqrt(3)*x*y))/sqrt(3),
      cos(sqrt(2)*(-(x^2 - y^2)/2 - sqrt(3)*x*y))/sqrt(3),
      sin(sqrt(2)*(-(x^2 - y^2)/2 - sqrt(3)*x*y))/sqrt(3) )
)";

std::vector<Vec2> sample_points(double x0, double x1, double y0, double y1,
                                int count, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
  std::vector<Vec2> pts;
  for (int i = 0; i < count; ++i) pts.push_back({ux(rng), uy(rng)});
  return pts;
}

TEST(Flag, GeodesicSphereTerminatesImmediately) {
  const SurfaceSpec spec = curvelab::parse_surface(kGeodesicSphere);
  for (const auto& p : sample_points(-1.5, 1.5, -1.5, 1.5, 8, 101)) {
    const FlagReport rep = curvelab::analyze_point(spec, p, 4);
    const double r2 = p.x * p.x + p.y * p.y;
    const double F_expected = 4.0 / ((1.0 + r2) * (1.0 + r2));
    EXPECT_NEAR(rep.F, F_expected, 1e-12 * F_expected);
    EXPECT_NEAR(rep.K, 1.0, 1e-9);
    EXPECT_LT(rep.conf_res, 1e-12);
    EXPECT_LT(rep.min_res, 1e-9);
    EXPECT_LT(rep.unit_res, 1e-13);
    EXPECT_TRUE(rep.immersed);
    EXPECT_TRUE(rep.conformal);
    EXPECT_TRUE(rep.minimal);
    EXPECT_TRUE(rep.exhausted);
    EXPECT_TRUE(rep.regular) << rep.irregular_reason;
    EXPECT_EQ(rep.tau, 0);
    ASSERT_EQ(rep.levels.size(), 3u);
    for (const auto& lvl : rep.levels) {
      EXPECT_EQ(lvl.rank, 0);
      EXPECT_EQ(lvl.alpha_sq, 0.0);
      EXPECT_EQ(std::abs(lvl.hopf), 0.0);
      EXPECT_TRUE(std::isnan(lvl.eccentricity));
      EXPECT_TRUE(std::isnan(lvl.rho));
    }
  }
}

TEST(Flag, FlatTorusFrozenInvariants) {
  const SurfaceSpec spec = curvelab::parse_surface(kFlatTorus);
  for (const auto& p : sample_points(0.0, 8.8, 0.0, 5.1, 10, 202)) {
    const FlagReport rep = curvelab::analyze_point(spec, p, 4);
    EXPECT_NEAR(rep.F, 1.0, 1e-12);
    EXPECT_NEAR(rep.K, 0.0, 1e-10);
    EXPECT_LT(rep.conf_res, 1e-12);
    EXPECT_LT(rep.min_res, 1e-11);
    EXPECT_NEAR(rep.w12_x, 0.0, 1e-12);
    EXPECT_NEAR(rep.w12_y, 0.0, 1e-12);
    EXPECT_TRUE(rep.exhausted);
    EXPECT_TRUE(rep.regular) << rep.irregular_reason;
    EXPECT_EQ(rep.tau, 1);
    ASSERT_EQ(rep.levels.size(), 3u);

    const auto& l1 = rep.levels[0];
    EXPECT_EQ(l1.rank, 2);
    EXPECT_NEAR(l1.kappa, kInvSqrt2, 1e-10);
    EXPECT_NEAR(l1.mu, kInvSqrt2, 1e-10);
    EXPECT_NEAR(l1.kperp, 1.0, 1e-10);
    EXPECT_NEAR(l1.alpha_sq, 2.0, 1e-10);
    EXPECT_NEAR(l1.a_plus, 2.0 * kInvSqrt2, 1e-10);
    EXPECT_NEAR(l1.a_minus, 0.0, 1e-7);
    EXPECT_LT(std::abs(l1.hopf), 1e-12);
    EXPECT_NEAR(l1.kstar, 0.0, 1e-9);
    EXPECT_NEAR(l1.rho, 1.0, 1e-10);
    EXPECT_LT(l1.iso_hopf, 1e-10);
    EXPECT_LT(l1.iso_axes, 1e-10);
    // The norms route hits catastrophic cancellation at circular points;
    // its floor is sqrt(ulp), not ulp.
    EXPECT_LT(l1.iso_norms, 1e-7);

    const auto& l2 = rep.levels[1];
    EXPECT_EQ(l2.rank, 1);
    EXPECT_NEAR(l2.kappa, kInvSqrt2, 1e-10);
    EXPECT_NEAR(l2.mu, 0.0, 1e-10);
    EXPECT_EQ(l2.kperp, 0.0);
    EXPECT_NEAR(l2.alpha_sq, 2.0, 1e-10);
    EXPECT_NEAR(l2.hopf.real(), 0.125, 1e-12);
    EXPECT_NEAR(l2.hopf.imag(), 0.0, 1e-12);
    EXPECT_NEAR(l2.kstar, 0.0, 1e-9);
    EXPECT_NEAR(l2.eccentricity, 1.0, 1e-9);

    const auto& l3 = rep.levels[2];
    EXPECT_EQ(l3.rank, 0);
    EXPECT_TRUE(l3.beyond_flag);
    EXPECT_EQ(l3.alpha_sq, 0.0);
  }
}

TEST(Flag, CliffordTorusLineBundle) {
  const SurfaceSpec spec = curvelab::parse_surface(kCliffordTorus);
  for (const auto& p : sample_points(0.0, 4.4, 0.0, 4.4, 8, 303)) {
    const FlagReport rep = curvelab::analyze_point(spec, p, 4);
    EXPECT_NEAR(rep.F, 1.0, 1e-12);
    EXPECT_NEAR(rep.K, 0.0, 1e-10);
    EXPECT_LT(rep.min_res, 1e-11);
    EXPECT_TRUE(rep.exhausted);
    EXPECT_TRUE(rep.regular) << rep.irregular_reason;
    EXPECT_EQ(rep.tau, 0);

    const auto& l1 = rep.levels[0];
    EXPECT_EQ(l1.rank, 1);
    EXPECT_NEAR(l1.kappa, 1.0, 1e-10);
    EXPECT_NEAR(l1.mu, 0.0, 1e-10);
    EXPECT_EQ(l1.kperp, 0.0);
    EXPECT_NEAR(l1.alpha_sq, 2.0, 1e-10);
    EXPECT_NEAR(l1.hopf.real(), 0.25, 1e-12);
    EXPECT_NEAR(l1.hopf.imag(), 0.0, 1e-12);
    EXPECT_NEAR(l1.eccentricity, 1.0, 1e-10);
    EXPECT_NEAR(l1.rho, 0.0, 1e-10);

    const auto& l2 = rep.levels[1];
    EXPECT_EQ(l2.rank, 0);
    EXPECT_TRUE(l2.beyond_flag);
    EXPECT_EQ(l2.alpha_sq, 0.0);
  }
}

TEST(Flag, VeroneseSphereFrozenInvariants) {
  const SurfaceSpec spec = curvelab::parse_surface(kVeroneseS4);
  for (const auto& p : sample_points(-1.2, 1.2, -1.2, 1.2, 10, 404)) {
    const FlagReport rep = curvelab::analyze_point(spec, p, 4);
    const double r2 = p.x * p.x + p.y * p.y;
    const double F_expected = 12.0 / ((1.0 + r2) * (1.0 + r2));
    EXPECT_NEAR(rep.F, F_expected, 1e-10 * F_expected);
    EXPECT_NEAR(rep.K, 1.0 / 3.0, 1e-9);
    EXPECT_LT(rep.conf_res, 1e-12);
    EXPECT_LT(rep.min_res, 1e-9);
    EXPECT_LT(rep.unit_res, 1e-13);
    EXPECT_TRUE(rep.exhausted);
    EXPECT_TRUE(rep.regular) << rep.irregular_reason;
    EXPECT_EQ(rep.tau, 1);

    const auto& l1 = rep.levels[0];
    EXPECT_EQ(l1.rank, 2);
    EXPECT_NEAR(l1.kappa, kInvSqrt3, 1e-9);
    EXPECT_NEAR(l1.mu, kInvSqrt3, 1e-9);
    EXPECT_NEAR(l1.kperp, 2.0 / 3.0, 1e-9);
    EXPECT_NEAR(l1.alpha_sq, 4.0 / 3.0, 1e-9);
    EXPECT_LT(std::abs(l1.hopf), 1e-10 * rep.F * rep.F);
    EXPECT_NEAR(l1.kstar, 2.0 / 3.0, 1e-9);
    EXPECT_NEAR(l1.rho, 1.0, 1e-9);

    const auto& l2 = rep.levels[1];
    EXPECT_EQ(l2.rank, 0);
    EXPECT_TRUE(l2.beyond_flag);
    EXPECT_EQ(l2.alpha_sq, 0.0);
  }
}

TEST(Flag, SmallSphereIsConformalButNotMinimal) {
  const SurfaceSpec spec = curvelab::parse_surface(kSmallSphere);
  for (const auto& p : sample_points(-1.0, 1.0, -1.0, 1.0, 6, 505)) {
    const FlagReport rep = curvelab::analyze_point(spec, p, 4);
    const double r2 = p.x * p.x + p.y * p.y;
    const double F_expected = 0.64 * 4.0 / ((1.0 + r2) * (1.0 + r2));
    EXPECT_NEAR(rep.F, F_expected, 1e-10 * F_expected);
    EXPECT_NEAR(rep.K, 25.0 / 16.0, 1e-8);
    EXPECT_TRUE(rep.conformal);
    EXPECT_FALSE(rep.minimal);
    // |Delta f + 2f| / 2 with Delta f = -2 K_sphere-part: works out to 3/4.
    EXPECT_NEAR(rep.min_res, 0.75, 1e-9);
  }
}

TEST(Flag, CatenoidCurvatureAndConnectionForm) {
  const SurfaceSpec spec = curvelab::parse_surface(kCatenoid);
  for (const auto& p : sample_points(-1.5, 1.5, -3.0, 3.0, 8, 606)) {
    const FlagReport rep = curvelab::analyze_point(spec, p, 4);
    const double ch = std::cosh(p.x);
    EXPECT_NEAR(rep.F, ch * ch, 1e-11 * ch * ch);
    EXPECT_LT(rep.conf_res, 1e-13);
    const double K_expected = -1.0 / (ch * ch * ch * ch);
    EXPECT_NEAR(rep.K, K_expected, 1e-10);
    EXPECT_NEAR(rep.w12_x, 0.0, 1e-12);
    EXPECT_NEAR(rep.w12_y, std::tanh(p.x), 1e-12);
    EXPECT_FALSE(rep.minimal);  // harmonic in R^3, not sphere-minimal
  }
}

// Rotating the parameter plane by sigma multiplies the level-r Hopf
// coefficient by exp(2 i (r+1) sigma) and leaves every ellipse invariant
// unchanged.  The rotated jet is produced by direct series substitution, so
// this also cross-validates the jet composition arithmetic.
Jet rotate_jet(const Jet& j, double sigma) {
  const int m = j.order();
  const Jet X = Jet::variable_x(m, 0.0);
  const Jet Y = Jet::variable_y(m, 0.0);
  const Jet xr = std::cos(sigma) * X - std::sin(sigma) * Y;
  const Jet yr = std::sin(sigma) * X + std::cos(sigma) * Y;
  Jet acc = Jet::constant(m, 0.0);
  for (int i = 0; i <= m; ++i)
    for (int k = 0; i + k <= m; ++k) {
      const double c = j.coeff(i, k);
      if (c == 0.0) continue;
      acc += c * curvelab::pow_int(xr, i) * curvelab::pow_int(yr, k);
    }
  return acc;
}

TEST(Flag, InvariantsAreFrameGaugeInvariant) {
  const struct {
    const char* src;
    double x0, x1, y0, y1;
  } cases[] = {
      {kFlatTorus, 0.0, 8.8, 0.0, 5.1},
      {kVeroneseS4, -1.2, 1.2, -1.2, 1.2},
      {kCliffordTorus, 0.0, 4.4, 0.0, 4.4},
  };
  std::mt19937 rng(707);
  std::uniform_real_distribution<double> usig(0.1, 3.0);
  for (const auto& c : cases) {
    const SurfaceSpec spec = curvelab::parse_surface(c.src);
    for (const auto& p : sample_points(c.x0, c.x1, c.y0, c.y1, 3, 808)) {
      const double sigma = usig(rng);
      const VecJet jets = curvelab::eval_jet(spec, p, 5);
      VecJet rotated;
      for (const auto& j : jets) rotated.push_back(rotate_jet(j, sigma));

      const FlagReport a = curvelab::analyze_jets(jets);
      const FlagReport b = curvelab::analyze_jets(rotated);

      EXPECT_NEAR(a.F, b.F, 1e-10 * std::max(1.0, a.F));
      EXPECT_NEAR(a.K, b.K, 1e-8);
      ASSERT_EQ(a.levels.size(), b.levels.size());
      for (std::size_t k = 0; k < a.levels.size(); ++k) {
        const auto& la = a.levels[k];
        const auto& lb = b.levels[k];
        EXPECT_EQ(la.rank, lb.rank);
        if (la.rank == 0) continue;
        EXPECT_NEAR(la.kappa, lb.kappa, 1e-9);
        // mu is a square root of a near-zero eigenvalue at circular points,
        // so roundoff enters at sqrt scale.
        EXPECT_NEAR(la.mu, lb.mu, 1e-7);
        EXPECT_NEAR(la.kperp, lb.kperp, 1e-9);
        EXPECT_NEAR(la.alpha_sq, lb.alpha_sq, 1e-9);
        const int r = la.level;
        const std::complex<double> phase =
            std::polar(1.0, 2.0 * (r + 1) * sigma);
        EXPECT_LT(std::abs(lb.hopf - phase * la.hopf), 1e-9)
            << "level " << r << " sigma " << sigma;
      }
    }
  }
}

TEST(Flag, BranchedCoverRawHopfField) {
  const SurfaceSpec spec = curvelab::parse_surface(kTorusBranch);
  const std::complex<double> zeta(0.05, 0.03);
  const FlagReport rep =
      curvelab::analyze_point(spec, {zeta.real(), zeta.imag()}, 4);
  EXPECT_TRUE(rep.immersed);
  EXPECT_NEAR(rep.K, 0.0, 1e-9);
  // Precomposition with psi multiplies the level-2 coefficient by psi'^6:
  // here f2 = (1/8) * (2 zeta)^6 = 8 zeta^6.
  const std::complex<double> expected = 8.0 * std::pow(zeta, 6);
  const auto& l2 = rep.levels[1];
  EXPECT_LT(std::abs(l2.hopf - expected), 1e-6 * std::abs(expected))
      << "hopf = " << l2.hopf << " expected " << expected;
}

TEST(Flag, OrderControlsReportedLevels) {
  const SurfaceSpec spec = curvelab::parse_surface(kFlatTorus);
  const Vec2 p{0.7, 1.3};
  const FlagReport r3 = curvelab::analyze_point(spec, p, 3);
  EXPECT_EQ(r3.levels.size(), 2u);
  const FlagReport r6 = curvelab::analyze_point(spec, p, 6);
  ASSERT_EQ(r6.levels.size(), 5u);
  for (std::size_t k = 2; k < r6.levels.size(); ++k) {
    EXPECT_EQ(r6.levels[k].rank, 0);
    EXPECT_EQ(r6.levels[k].alpha_sq, 0.0);
  }
}

TEST(Flag, DegenerateInputsAreReportedOrThrow) {
  // Constant map: no immersion anywhere.
  const SurfaceSpec flat = curvelab::parse_surface("dim 3\nf = (1, 0*x, 0*y)");
  const VecJet jets = curvelab::eval_jet(flat, {0.3, 0.4}, 3);

  const FlagReport rep = curvelab::analyze_jets(jets);
  EXPECT_FALSE(rep.immersed);
  EXPECT_FALSE(rep.regular);
  EXPECT_TRUE(std::isnan(rep.K));
  ASSERT_FALSE(rep.levels.empty());
  EXPECT_TRUE(std::isnan(rep.levels[0].alpha_sq));

  const auto table = curvelab::make_deriv_table(jets, 3);
  EXPECT_THROW(curvelab::build_flag(table), EvalError);

  // Analysis requires third derivatives.
  const SurfaceSpec sphere = curvelab::parse_surface(kGeodesicSphere);
  const VecJet low = curvelab::eval_jet(sphere, {0.1, 0.2}, 2);
  EXPECT_THROW(curvelab::analyze_jets(low), std::invalid_argument);
}

}  // namespace
