#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "stable/error.hpp"
#include "stable/numerics.hpp"

using namespace stable;
using numerics::kPi;

TEST(GaussLegendre, IntegratesPolynomialsExactly) {
  const auto rule = numerics::gauss_legendre(8);
  // degree 15 is the exactness limit of an 8-point rule
  double s = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * std::pow(rule.nodes[i], 14);
  EXPECT_NEAR(s, 2.0 / 15.0, 1e-14);
  double w = 0.0;
  for (double x : rule.weights) w += x;
  EXPECT_NEAR(w, 2.0, 1e-14);
}

TEST(Quadrature, CompositeAndTanhSinh) {
  EXPECT_NEAR(numerics::integrate_composite([](double x) { return std::exp(x); }, 0.0, 1.0, 4), std::exp(1.0) - 1.0,
              1e-13);
  // endpoint singularity x^{-1/2}
  EXPECT_NEAR(numerics::integrate_tanh_sinh([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0), 2.0, 1e-10);
}

TEST(Lagrange4, ReproducesCubics) {
  auto f = [](double x) { return 1.0 - 2.0 * x + 0.5 * x * x * x; };
  double w[4];
  numerics::lagrange4(0.3, w);
  const double v = w[0] * f(-1) + w[1] * f(0) + w[2] * f(1) + w[3] * f(2);
  EXPECT_NEAR(v, f(0.3), 1e-14);
}

TEST(FitLine, RecoversSlopeAndRejectsDegenerateInput) {
  std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  const auto fit = numerics::fit_line(x, y);
  EXPECT_NEAR(fit.slope, 2.0, 1e-14);
  EXPECT_NEAR(fit.intercept, 1.0, 1e-14);
  std::vector<double> one{1.0};
  EXPECT_THROW(numerics::fit_line(one, one), Error);
}

TEST(Geometry, SphereAreaAndBallVolume) {
  EXPECT_NEAR(numerics::sphere_area(2), 2 * kPi, 1e-14);
  EXPECT_NEAR(numerics::sphere_area(3), 4 * kPi, 1e-14);
  EXPECT_NEAR(numerics::ball_volume(3), 4 * kPi / 3, 1e-14);
}
