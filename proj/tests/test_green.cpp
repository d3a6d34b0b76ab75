#include <gtest/gtest.h>

#include <cmath>

#include "stable/green.hpp"
#include "stable/numerics.hpp"

using namespace stable;
using numerics::kPi;

namespace {

const StableModel& cauchy() {
  static const StableModel m(2, 1.0, SpectralMeasure::isotropic(0.25));
  return m;
}

const RadialGreenProfile& profile() {
  static const RadialGreenProfile p = [] {
    const auto grid = unit_density_grid(cauchy(), default_extent(2), default_spacing(2));
    return green_profile(cauchy(), grid);
  }();
  return p;
}

// Killed Green function of the unit ball for the Cauchy process in the plane:
// arctan(sqrt(w)) / (pi^2 |x - y|), w = (1 - |x|^2)(1 - |y|^2) / |x - y|^2.
double ball_green(const Vec& x, const Vec& y) {
  const double dist = (x - y).norm();
  const double w = (1 - x.squaredNorm()) * (1 - y.squaredNorm()) / (dist * dist);
  return std::atan(std::sqrt(w)) / (kPi * kPi * dist);
}

}  // namespace

TEST(GreenProfile, CauchyValueAndHomogeneity) {
  const auto& p = profile();
  EXPECT_NEAR(p.min_value * 2 * kPi, 1.0, 1e-2);
  EXPECT_NEAR(p.max_value * 2 * kPi, 1.0, 1e-2);
  const Vec x = make_vec({0.3, -0.7});
  for (double c : {0.25, 3.0, 17.0}) EXPECT_DOUBLE_EQ(green_point(p, Vec(c * x)), green_point(p, x) / c);
  EXPECT_THROW(green_point(p, make_vec({0, 0})), Error);
}

TEST(GreenProfile, CellAverageOfSingularity) {
  // mean of 1/(2 pi |x|) over a disc of radius rho is 1/(pi rho)
  const double rho = 0.1;
  EXPECT_NEAR(green_cell_average(profile(), kPi * rho * rho) * kPi * rho, 1.0, 1e-2);
}

TEST(KilledGreen, MatchesBallOracle) {
  const Ball ball(make_vec({0, 0}), 1.0);
  const Vec x = make_vec({0.1, 0}), z = make_vec({-0.2, 0.3});
  const auto est = killed_green(cauchy(), profile(), ball, x, z, 6000, 7);
  const double oracle = ball_green(x, z);
  EXPECT_NEAR(est.value, oracle, 4 * est.std_err + 0.01 * oracle);
  const auto outside = killed_green(cauchy(), profile(), ball, make_vec({1.5, 0}), z, 100, 7);
  EXPECT_EQ(outside.value, 0.0);
  EXPECT_EQ(outside.std_err, 0.0);
}

TEST(Lattices, CountsAndContainment) {
  const Ball b(make_vec({1, 2}), 0.5);
  double spacing = 0.0;
  const auto nodes = ball_lattice_min(b, 300, &spacing);
  EXPECT_GE(nodes.size(), 300u);
  for (const Vec& v : nodes) EXPECT_TRUE(b.contains(v));
  const auto pts = spread_points(b, 12, 0.01);
  ASSERT_EQ(pts.size(), 12u);
  for (const Vec& v : pts) EXPECT_TRUE(b.interior(v));
  EXPECT_NEAR((pts.back() - b.center).norm(), 0.49, 1e-12);
}

TEST(Lemmas, SmallBudgetRunsProduceFiniteConstants) {
  McOptions mc;
  mc.batch = 400;
  mc.max_paths = 800;
  const Vec x0 = make_vec({0, 0});
  const auto l1 = verify_lemma1(cauchy(), profile(), x0, 1.0, 4.0 / 3.0, 0.9, spread_points(Ball(x0, 0.9), 3, 0.05), mc);
  ASSERT_TRUE(l1.constants.count("c1"));
  EXPECT_TRUE(std::isfinite(l1.constants.at("c1")));
  EXPECT_EQ(l1.samples.size(), 3u);
  const auto l2 = verify_lemma2(cauchy(), profile(), x0, 1.0, 2.0, 0.9, {make_vec({0.1, 0.1})}, mc);
  ASSERT_TRUE(l2.constants.count("delta1"));
  EXPECT_GT(l2.constants.at("delta1"), 0.0);
  EXPECT_GT(l2.constants.at("c2"), 0.0);
}
