#include <gtest/gtest.h>

#include <cmath>

#include "stable/numerics.hpp"
#include "stable/simulate.hpp"

using namespace stable;
using numerics::kPi;

namespace {

const StableModel& cauchy() {
  static const StableModel m(2, 1.0, SpectralMeasure::isotropic(0.25));
  return m;
}

}  // namespace

TEST(Streams, DeterministicAndDistinct) {
  Rng a = make_stream(7, 3), b = make_stream(7, 3), c = make_stream(7, 4);
  const auto x = a();
  EXPECT_EQ(x, b());
  EXPECT_NE(x, c());
  EXPECT_NE(mix_seed(1, 2), mix_seed(2, 1));
}

TEST(AliasTable, SampleFrequencies) {
  AliasTable t({1.0, 2.0, 0.0, 5.0});
  EXPECT_NEAR(t.probability(3), 5.0 / 8.0, 1e-15);
  Rng rng = make_stream(1, 0);
  std::vector<int> count(4, 0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) ++count[t.sample(rng)];
  EXPECT_EQ(count[2], 0);
  for (int i : {0, 1, 3}) {
    const double p = t.probability(i);
    EXPECT_NEAR(count[i] / double(n), p, 4 * std::sqrt(p * (1 - p) / n));
  }
  EXPECT_THROW(AliasTable({-1.0, 2.0}), Error);
}

TEST(IncrementScheme, ExponentMatchesModel) {
  const IncrementScheme s = build_scheme(cauchy(), 0.01);
  // Lambda(eps) = c |mu| eps^{-alpha} / alpha = (2/pi)(pi/2)/0.01
  EXPECT_NEAR(s.big_jump_rate, 100.0, 1e-6);
  for (double r : {0.5, 1.0, 3.0})
    EXPECT_NEAR(scheme_exponent(cauchy(), s, make_vec({r, 0})) / r, 1.0, 1e-3);
  EXPECT_THROW(build_scheme(cauchy(), 0.0), Error);
}

TEST(IncrementScheme, IncrementCharacteristicFunction) {
  const IncrementScheme s = build_scheme(cauchy(), 0.05);
  Rng rng = make_stream(3, 0);
  const int n = 40000;
  const Vec u = make_vec({0.6, 0.8});
  double re = 0.0;
  for (int i = 0; i < n; ++i) re += std::cos(u.dot(sample_increment(s, 1.0, rng)));
  // E cos(u.X_1) = exp(-|u|) for the Cauchy law
  EXPECT_NEAR(re / n, std::exp(-1.0), 4.0 / std::sqrt(n));
}

TEST(PoissonKernel, ConstantMatchesClosedForm) {
  // Gamma(d/2) pi^{-d/2-1} sin(pi alpha / 2)
  for (double a : {0.5, 1.0, 1.5}) EXPECT_NEAR(poisson_kernel_constant(a, 2), std::sin(kPi * a / 2) / (kPi * kPi), 1e-10);
  EXPECT_NEAR(poisson_kernel_constant(1.0, 3), std::tgamma(1.5) * std::pow(kPi, -2.5), 1e-10);
}

TEST(PoissonKernel, RadialCdfForCauchyIsArcsecant) {
  for (double rho : {1.01, 1.5, 3.0, 20.0})
    EXPECT_NEAR(isotropic_exit_radial_cdf(1.0, rho), 2.0 / kPi * std::acos(1.0 / rho), 1e-12);
  EXPECT_EQ(isotropic_exit_radial_cdf(1.0, 0.5), 0.0);
}

TEST(ExitSampling, RadialLawFromCenter) {
  const IncrementScheme s = build_scheme(cauchy(), 0.01);
  const Ball ball(make_vec({0, 0}), 1.0);
  std::vector<double> radii;
  const int n = 4000;
  for (int p = 0; p < n; ++p) {
    const ExitSample e = sample_exit(s, ball, make_vec({0, 0}), 42, p);
    EXPECT_GE(e.position.norm(), 1.0);
    radii.push_back(e.position.norm());
  }
  // 1% critical value of the one-sample KS statistic
  EXPECT_LT(ks_distance_to(radii, [](double r) { return isotropic_exit_radial_cdf(1.0, r); }), 1.63 / std::sqrt(n));
}

TEST(ExitSampling, MeanExitTime) {
  // E^0 tau for the unit ball: Gamma(d/2) / (2^alpha Gamma(1 + alpha/2) Gamma((d + alpha)/2)) = 2 / pi here
  const IncrementScheme s = build_scheme(cauchy(), 0.01);
  const Ball ball(make_vec({0, 0}), 1.0);
  const int n = 4000;
  double sum = 0.0, sq = 0.0;
  for (int p = 0; p < n; ++p) {
    const double t = sample_exit(s, ball, make_vec({0, 0}), 8, p).time;
    sum += t;
    sq += t * t;
  }
  const double mean = sum / n, se = std::sqrt((sq / n - mean * mean) / n);
  EXPECT_NEAR(mean, 2.0 / kPi, 4 * se);
}

TEST(ExitSampling, RejectsStartOutside) {
  const IncrementScheme s = build_scheme(cauchy(), 0.01);
  try {
    sample_exit(s, Ball(make_vec({0, 0}), 1.0), make_vec({1, 0}), 1, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Precondition);
  }
}

TEST(ExitBank, TranslationAndCommonNumbers) {
  const IncrementScheme s = build_scheme(cauchy(), 0.01);
  const std::vector<Vec> offsets{make_vec({0, 0}), make_vec({0.25, -0.5})};
  ExitBank a = make_exit_bank(Ball(make_vec({0, 0}), 1.0), offsets, 9, SeedMode::Common);
  ExitBank b = make_exit_bank(Ball(make_vec({4, -2}), 1.0), offsets, 9, SeedMode::Common);
  extend_exit_bank(a, s, 50);
  extend_exit_bank(b, s, 50);
  EXPECT_EQ(a.exits, b.exits);
  EXPECT_EQ(a.times, b.times);
  // extending in two steps equals one long run
  ExitBank c = make_exit_bank(Ball(make_vec({0, 0}), 1.0), offsets, 9, SeedMode::Common);
  extend_exit_bank(c, s, 20);
  extend_exit_bank(c, s, 30);
  EXPECT_EQ(a.exits, c.exits);
  EXPECT_THROW(extend_exit_bank(c, build_scheme(cauchy(), 0.02), 1), Error);
}

TEST(KolmogorovSmirnov, TwoSample) {
  EXPECT_NEAR(ks_distance({1, 2, 3, 4}, {1, 2, 3, 4}), 0.0, 1e-15);
  EXPECT_NEAR(ks_distance({1, 2}, {3, 4}), 1.0, 1e-15);
}
