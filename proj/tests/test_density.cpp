#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "stable/density.hpp"
#include "stable/numerics.hpp"

using namespace stable;
using numerics::kPi;

namespace {

// Phi(u) = |u|: the bivariate Cauchy law
const StableModel& cauchy() {
  static const StableModel m(2, 1.0, SpectralMeasure::isotropic(0.25));
  return m;
}

const TransitionDensityGrid& small_grid() {
  static const TransitionDensityGrid g = unit_density_grid(cauchy(), 20.0, 0.078125);
  return g;
}

double cauchy_density(double t, const Vec& x) { return t / (2 * kPi * std::pow(t * t + x.squaredNorm(), 1.5)); }

}  // namespace

TEST(DensityGrid, MassAndCauchyOracle) {
  const auto& g = small_grid();
  EXPECT_NEAR(g.mass, 1.0, 1e-3);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); i += 3) {
    const Vec x = g.node(i);
    if (x.norm() > 8.0) continue;
    worst = std::max(worst, std::abs(g.values[i] / cauchy_density(1.0, x) - 1.0));
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(DensityGrid, ScalingLawAndBoundsOutsideGrid) {
  const auto& g = small_grid();
  const Vec x = make_vec({0.7, -1.1});
  EXPECT_NEAR(density_at(g, 0.5, x).value / cauchy_density(0.5, x), 1.0, 5e-3);
  EXPECT_NEAR(density_at(g, 3.0, x).value / cauchy_density(3.0, x), 1.0, 5e-3);
  const DensityValue far = density_at(g, 1.0, make_vec({100, 0}));
  EXPECT_TRUE(far.is_bound);
  EXPECT_GE(far.value, cauchy_density(1.0, make_vec({100, 0})));
}

TEST(DensityGrid, HeatKernelBound) {
  const HeatKernelBound hk = verify_heat_kernel_bound(small_grid());
  // max over x of p(1,x) / min(1,|x|^{-3}) for the Cauchy law is 1/(2 pi) (attained at x = 0 and |x| -> inf)
  EXPECT_NEAR(hk.c_est, 1.0 / (2 * kPi), 2e-3);
}

TEST(DensityGrid, RejectsCoarseGrids) {
  try {
    unit_density_grid(cauchy(), 20.0, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::GridTooCoarse);
  }
  EXPECT_THROW(unit_density_grid(cauchy(), 2.0, 0.0625), Error);
}

TEST(DensityGrid, AtomicProductOracle) {
  std::vector<SpectralMeasure::Atom> atoms;
  for (int i = 0; i < 2; ++i) {
    atoms.push_back({Vec(Vec::Unit(2, i)), 0.5});
    atoms.push_back({Vec(-Vec::Unit(2, i)), 0.5});
  }
  const StableModel m(2, 1.0, SpectralMeasure::atomic(atoms));
  const auto g = unit_density_grid(m, 20.0, 0.078125);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec x = g.node(i);
    if (std::abs(x(0)) > 4.0 || std::abs(x(1)) > 4.0) continue;
    const double oracle = 1.0 / (kPi * kPi * (1 + x(0) * x(0)) * (1 + x(1) * x(1)));
    worst = std::max(worst, std::abs(g.values[i] / oracle - 1.0));
  }
  // half the default resolution; the default grid is held to 1e-3
  EXPECT_LT(worst, 2e-3);
}

TEST(DensityGrid, CacheRoundTrip) {
  const auto& g = small_grid();
  const std::string path = (std::filesystem::temp_directory_path() / "stableharnack_grid_test.bin").string();
  save_grid(g, path);
  const auto back = load_grid(path, cauchy(), g.L, g.h);
  EXPECT_EQ(back.values, g.values);
  const StableModel other(2, 1.0, SpectralMeasure::isotropic(0.5));
  EXPECT_THROW(load_grid(path, other, g.L, g.h), Error);
  std::remove(path.c_str());
}

TEST(LevyLatticeSum, Converges) {
  // sum over m != 0 of (2/pi) * 0.25 |m|^{-3}; the lattice zeta value sum |m|^{-3} is 9.0336...
  EXPECT_NEAR(levy_lattice_sum(cauchy()) / (0.5 / kPi), 9.03362168, 1e-4);
}
