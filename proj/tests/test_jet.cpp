#include "curvelab/jet.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"

using curvelab::Jet;
using curvelab::VecJet;

TEST(Jet, ExpCoefficientsAtZero) {
  Jet x = Jet::variable_x(4, 0.0);
  Jet e = exp(x);
  EXPECT_DOUBLE_EQ(e.coeff(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(e.coeff(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(e.coeff(2, 0), 0.5);
  EXPECT_NEAR(e.coeff(3, 0), 1.0 / 6.0, 1e-16);
  EXPECT_DOUBLE_EQ(e.coeff(0, 1), 0.0);
}

TEST(Jet, PolynomialCubeExact) {
  // (1 + 2x - y)^3 expanded by hand; multinomial coefficients are exact in
  // double arithmetic, so the comparison is exact equality.
  Jet x = Jet::variable_x(3, 0.0);
  Jet y = Jet::variable_y(3, 0.0);
  Jet p = curvelab::pow_int(1.0 + 2.0 * x - y, 3);
  const struct {
    int i, j;
    double want;
  } table[] = {
      {0, 0, 1.0},  {1, 0, 6.0},   {0, 1, -3.0}, {2, 0, 12.0}, {1, 1, -12.0},
      {0, 2, 3.0},  {3, 0, 8.0},   {2, 1, -12.0}, {1, 2, 6.0},  {0, 3, -1.0},
  };
  for (const auto& row : table) EXPECT_DOUBLE_EQ(p.coeff(row.i, row.j), row.want)
      << "coefficient (" << row.i << "," << row.j << ")";
}

TEST(Jet, NegativePowerBinomialSeries) {
  // (1+x)^(-2) = sum (-1)^k (k+1) x^k.
  Jet x = Jet::variable_x(5, 0.0);
  Jet p = curvelab::pow_int(1.0 + x, -2);
  for (int k = 0; k <= 5; ++k) {
    const double want = (k % 2 == 0 ? 1.0 : -1.0) * (k + 1);
    EXPECT_NEAR(p.coeff(k, 0), want, 1e-13) << "k=" << k;
  }
}

TEST(Jet, ElementaryFunctionsMatchFiniteDifferences) {
  // Independent oracle: Richardson-extrapolated central differences of the
  // same scalar functions evaluated through std::math.
  struct Case {
    const char* name;
    std::function<curvelab::Jet(const Jet&, const Jet&)> jet_fn;
    testutil::Fn2 ref;
    double x0, y0;
  };
  const Case cases[] = {
      {"sin(x*y + y)",
       [](const Jet& x, const Jet& y) { return sin(x * y + y); },
       [](double x, double y) { return std::sin(x * y + y); }, 0.4, -0.7},
      {"exp(x - y^2)",
       [](const Jet& x, const Jet& y) { return exp(x - y * y); },
       [](double x, double y) { return std::exp(x - y * y); }, -0.3, 0.5},
      {"sqrt(1 + x^2 + 3y^2)",
       [](const Jet& x, const Jet& y) { return sqrt(1.0 + x * x + 3.0 * y * y); },
       [](double x, double y) { return std::sqrt(1.0 + x * x + 3.0 * y * y); }, 0.8, 0.2},
      {"log(2 + x + sin(y))",
       [](const Jet& x, const Jet& y) { return log(2.0 + x + sin(y)); },
       [](double x, double y) { return std::log(2.0 + x + std::sin(y)); }, 0.1, 1.1},
      {"tan(x/2 + y/3)",
       [](const Jet& x, const Jet& y) { return tan(x * 0.5 + y / 3.0); },
       [](double x, double y) { return std::tan(x * 0.5 + y / 3.0); }, 0.6, 0.9},
      {"cosh(x)*sinh(y)",
       [](const Jet& x, const Jet& y) { return cosh(x) * sinh(y); },
       [](double x, double y) { return std::cosh(x) * std::sinh(y); }, -0.5, 0.4},
      {"x^2 y / (1 + x^2 + y^2)",
       [](const Jet& x, const Jet& y) { return x * x * y / (1.0 + x * x + y * y); },
       [](double x, double y) { return x * x * y / (1.0 + x * x + y * y); }, 1.2, -0.8},
  };
  for (const Case& c : cases) {
    Jet x = Jet::variable_x(4, c.x0);
    Jet y = Jet::variable_y(4, c.y0);
    Jet j = c.jet_fn(x, y);
    for (int d = 0; d <= 3; ++d)
      for (int i = 0; i <= d; ++i) {
        const double fd = testutil::fd_partial(c.ref, c.x0, c.y0, i, d - i);
        const double dev = testutil::rel_dev(j.partial(i, d - i), fd);
        EXPECT_LT(dev, 1e-7) << c.name << " partial (" << i << "," << (d - i) << ")";
      }
  }
}

TEST(Jet, QuotientMatchesTan) {
  Jet x = Jet::variable_x(6, 0.3);
  Jet y = Jet::variable_y(6, -0.2);
  Jet arg = x + 0.5 * y;
  Jet q = sin(arg) / cos(arg);
  Jet t = tan(arg);
  for (int d = 0; d <= 6; ++d)
    for (int i = 0; i <= d; ++i)
      EXPECT_NEAR(q.coeff(i, d - i), t.coeff(i, d - i), 1e-12);
}

TEST(Jet, HyperbolicPythagoras) {
  Jet x = Jet::variable_x(5, 0.7);
  Jet y = Jet::variable_y(5, 0.1);
  Jet u = x - 2.0 * y;
  Jet one = cosh(u) * cosh(u) - sinh(u) * sinh(u);
  EXPECT_NEAR(one.coeff(0, 0), 1.0, 1e-13);
  for (int d = 1; d <= 5; ++d)
    for (int i = 0; i <= d; ++i) EXPECT_NEAR(one.coeff(i, d - i), 0.0, 1e-12);
}

TEST(Jet, EvaluateMatchesDirect) {
  Jet x = Jet::variable_x(6, 0.0);
  Jet y = Jet::variable_y(6, 0.0);
  Jet p = curvelab::pow_int(x, 3) * y - 2.0 * x * y + 1.0 + curvelab::pow_int(y, 4);
  auto direct = [](double a, double b) { return a * a * a * b - 2.0 * a * b + 1.0 + b * b * b * b; };
  EXPECT_NEAR(p.evaluate(0.5, -0.25), direct(0.5, -0.25), 1e-15);
  EXPECT_NEAR(p.evaluate(-1.5, 2.0), direct(-1.5, 2.0), 1e-12);
}

TEST(Jet, NormalizeProducesUnitVectorJet) {
  const int K = 5;
  VecJet f = {1.0 + Jet::variable_x(K, 0.2), Jet::variable_y(K, -0.4),
              Jet::variable_x(K, 0.2) * Jet::variable_y(K, -0.4)};
  curvelab::normalize(f);
  Jet n2 = curvelab::dot(f, f);
  EXPECT_NEAR(n2.coeff(0, 0), 1.0, 1e-14);
  for (int d = 1; d <= K; ++d)
    for (int i = 0; i <= d; ++i) EXPECT_NEAR(n2.coeff(i, d - i), 0.0, 1e-12);
}

TEST(Jet, RandomizedNormalizationStaysOnSphere) {
  std::mt19937 rng(20240816);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double x0 = dist(rng), y0 = dist(rng);
    Jet x = Jet::variable_x(4, x0);
    Jet y = Jet::variable_y(4, y0);
    VecJet f = {2.0 * x, 2.0 * y, 1.0 - x * x - y * y, Jet::constant(4, 0.75) * (1.0 + x * x + y * y)};
    curvelab::normalize(f);
    double n2 = 0.0;
    for (const Jet& c : f) n2 += c.value() * c.value();
    EXPECT_NEAR(n2, 1.0, 1e-14);
  }
}

TEST(Jet, DomainErrors) {
  Jet x = Jet::variable_x(3, -1.0);
  EXPECT_THROW(log(x), curvelab::EvalError);
  EXPECT_THROW(sqrt(x), curvelab::EvalError);
  Jet zero = Jet::constant(3, 0.0);
  EXPECT_THROW(reciprocal(zero), curvelab::EvalError);
  Jet y = Jet::variable_y(3, 0.0);
  EXPECT_THROW(x / (y * 0.0), curvelab::EvalError);
}

TEST(Jet, OrderMismatchAndIndexChecks) {
  Jet a = Jet::variable_x(3, 0.0);
  Jet b = Jet::variable_x(4, 0.0);
  EXPECT_THROW(a + b, std::invalid_argument);
  EXPECT_THROW(a * b, std::invalid_argument);
  EXPECT_THROW(a.coeff(4, 0), std::out_of_range);
  EXPECT_THROW(a.coeff(-1, 0), std::out_of_range);
  EXPECT_THROW(Jet(0), std::invalid_argument);
  EXPECT_THROW(Jet(13), std::invalid_argument);
}
