#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "stable/core_model.hpp"
#include "stable/numerics.hpp"

using namespace stable;
using numerics::kPi;

namespace {

SpectralMeasure quadratic_measure() {
  return SpectralMeasure::density([](const Vec& x) { return 1.0 + 0.5 * x(0) * x(0); }, 1.5, "quadratic");
}

// brute-force midpoint sum of |cos(t - b)|^alpha (1 + 0.5 cos^2 t) over the circle
double circle_oracle(double alpha, double b) {
  const int n = 400000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = 2 * kPi * (i + 0.5) / n;
    s += std::pow(std::abs(std::cos(t - b)), alpha) * (1.0 + 0.5 * std::cos(t) * std::cos(t));
  }
  return s * 2 * kPi / n;
}

}  // namespace

TEST(CosineIntegral, MatchesGammaFormula) {
  for (double a : {0.3, 0.7, 1.0, 1.3, 1.7, 1.95}) {
    const double oracle = a == 1.0 ? kPi / 2 : std::tgamma(1 - a) * std::cos(kPi * a / 2) / a;
    EXPECT_NEAR(cosine_integral(a) / oracle, 1.0, 1e-10) << "alpha " << a;
  }
  EXPECT_NEAR(levy_normalization(1.0), 2.0 / kPi, 1e-12);
}

TEST(SphereQuadrature, WeightsSumToArea) {
  EXPECT_NEAR(sphere_quadrature(2, 64).total_weight(), 2 * kPi, 1e-12);
  EXPECT_NEAR(sphere_quadrature(3, 16).total_weight(), 4 * kPi, 1e-12);
}

TEST(CharExponent, IsotropicClosedForm) {
  StableModel m(2, 1.0, SpectralMeasure::isotropic(1.0));
  EXPECT_NEAR(char_exponent(m, make_vec({1, 0})), 4.0, 1e-8);
  EXPECT_NEAR(char_exponent(m, make_vec({0.6, 0.8}) * 3.0), 12.0, 1e-8);
  // d = 3: int |e.xi|^alpha dsigma = 4 pi / (alpha + 1)
  StableModel m3(3, 1.5, SpectralMeasure::isotropic(1.0));
  EXPECT_NEAR(char_exponent(m3, make_vec({0, 0, 2})), std::pow(2.0, 1.5) * 4 * kPi / 2.5, 1e-8);
}

TEST(CharExponent, AnisotropicAgainstBruteForce) {
  for (double alpha : {0.7, 1.0, 1.6}) {
    StableModel m(2, alpha, quadratic_measure());
    const double b = 0.3;
    EXPECT_NEAR(char_exponent(m, make_vec({std::cos(b), std::sin(b)})) / circle_oracle(alpha, b), 1.0, 1e-7);
  }
}

TEST(CharExponent, Homogeneity) {
  StableModel m(2, 1.3, quadratic_measure());
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3, 3), c(0.01, 50);
  for (int i = 0; i < 50; ++i) {
    const Vec x = make_vec({u(rng), u(rng)});
    const double s = c(rng);
    const double phi = char_exponent(m, x);
    EXPECT_LE(std::abs(char_exponent(m, Vec(s * x)) - std::pow(s, 1.3) * phi) / phi, 1e-12);
  }
}

TEST(CharExponent, AtomicAxes) {
  std::vector<SpectralMeasure::Atom> atoms;
  for (int i = 0; i < 2; ++i) {
    atoms.push_back({Vec(Vec::Unit(2, i)), 0.5});
    atoms.push_back({Vec(-Vec::Unit(2, i)), 0.5});
  }
  StableModel m(2, 1.0, SpectralMeasure::atomic(atoms));
  EXPECT_NEAR(char_exponent(m, make_vec({2, -3})), 5.0, 1e-14);
  EXPECT_THROW(levy_density(m, make_vec({1, 0})), Error);
}

TEST(SymbolTable, InterpolatesDensityMeasures) {
  StableModel m(2, 1.0, quadratic_measure());
  SymbolTable table(m);
  const Vec u = make_vec({2 * std::cos(0.3), 2 * std::sin(0.3)});
  EXPECT_NEAR(table(u) / char_exponent(m, u), 1.0, 1e-6);
  StableModel m3(3, 1.3, quadratic_measure());
  SymbolTable t3(m3);
  const Vec v = make_vec({0.3, -0.5, 0.7});
  EXPECT_NEAR(t3(v) / char_exponent(m3, v), 1.0, 1e-5);
}

TEST(LevyDensity, ScalingAndSingularity) {
  StableModel m(2, 1.0, SpectralMeasure::isotropic(1.0));
  const Vec x = make_vec({0.3, 0.4});
  EXPECT_NEAR(levy_density(m, x), (2.0 / kPi) * std::pow(0.5, -3.0), 1e-10);
  EXPECT_NEAR(levy_density(m, Vec(2.0 * x)), std::pow(2.0, -3.0) * levy_density(m, x), 1e-12);
  try {
    levy_density(m, make_vec({0, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Singularity);
  }
}

TEST(StableModel, RejectsBadInput) {
  auto kind_of = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Io;
  };
  EXPECT_EQ(kind_of([] { StableModel(4, 1.0, SpectralMeasure::isotropic(1.0)); }), ErrorKind::DimensionNotImplemented);
  EXPECT_EQ(kind_of([] { StableModel(2, 2.0, SpectralMeasure::isotropic(1.0)); }), ErrorKind::InvalidArgument);
  // a single axis carries no mass in the e_2 direction
  EXPECT_EQ(kind_of([] {
              StableModel(2, 1.0,
                          SpectralMeasure::atomic({{make_vec({1, 0}), 1.0}, {make_vec({-1, 0}), 1.0}}));
            }),
            ErrorKind::Degenerate);
  // not symmetric
  EXPECT_EQ(kind_of([] {
              StableModel(2, 1.0, SpectralMeasure::density([](const Vec& x) { return 1.0 + 0.5 * x(0); }, 1.5, "odd"));
            }),
            ErrorKind::InvalidArgument);
}

TEST(StableModel, HashIsStable) {
  StableModel a(2, 1.0, quadratic_measure()), b(2, 1.0, quadratic_measure()), c(2, 1.1, quadratic_measure());
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
}
