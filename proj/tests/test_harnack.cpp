#include <gtest/gtest.h>

#include <cmath>

#include "stable/harnack.hpp"
#include "stable/numerics.hpp"

using namespace stable;
using numerics::kPi;

namespace {

const StableModel& cauchy() {
  static const StableModel m(2, 1.0, SpectralMeasure::isotropic(0.25));
  return m;
}

HarnackParams unit_params() {
  HarnackParams p;
  p.x0 = make_vec({0, 0});
  return p;
}

ExteriorTerm bump(const Vec& center, double width, double amplitude) {
  ExteriorTerm t;
  t.kind = ExteriorTerm::Kind::Bump;
  t.center = center;
  t.width = width;
  t.amplitude = amplitude;
  t.family = "bump";
  return t;
}

// int P(x, y) g(y) dy over the bump support, polar Gauss rule around the center
double poisson_oracle(const ExteriorTerm& t, const Vec& x) {
  const auto gl = numerics::gauss_legendre(48);
  double s = 0.0;
  for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
    const double rho = 0.5 * t.width * (gl.nodes[i] + 1), w = 0.5 * t.width * gl.weights[i] * rho;
    for (int k = 0; k < 256; ++k) {
      const double a = 2 * kPi * (k + 0.5) / 256;
      const Vec rel = rho * make_vec({std::cos(a), std::sin(a)});
      const Vec y = t.center + rel;
      if (y.norm() <= 1.0) continue;
      s += w * 2 * kPi / 256 * t.at(rel) * poisson_kernel_isotropic(1.0, 2, 1.0, x, y);
    }
  }
  return s;
}

}  // namespace

TEST(HarnackParams, Validation) {
  HarnackParams p = unit_params();
  EXPECT_NO_THROW(p.validate());
  EXPECT_DOUBLE_EQ(p.c0(), 0.25);
  p.lambda = 2.5;  // theta must exceed lambda
  EXPECT_THROW(p.validate(), Error);
  p = unit_params();
  p.sigma_ratio = 4.5;
  EXPECT_THROW(p.validate(), Error);
  p = unit_params();
  p.a = 0.7;
  EXPECT_THROW(p.validate(), Error);
}

TEST(ExteriorFunction, BoundsAndTransforms) {
  const ExteriorFunction g({bump(make_vec({3, 0}), 0.5, 2.0), bump(make_vec({-3, 0}), 0.5, -1.0)});
  EXPECT_DOUBLE_EQ(g.upper_bound(), 2.0);
  EXPECT_DOUBLE_EQ(g.lower_bound(), -1.0);
  EXPECT_TRUE(g.has_negative_part());
  EXPECT_DOUBLE_EQ(g(make_vec({3, 0})), 2.0);
  EXPECT_DOUBLE_EQ(g(make_vec({0, 0})), 0.0);
  const Vec shift = make_vec({0.5, -0.25});
  EXPECT_DOUBLE_EQ(g.translated(shift)(make_vec({3.5, -0.25})), 2.0);
  EXPECT_DOUBLE_EQ(g.scaled(3.0).upper_bound(), 6.0);
  EXPECT_DOUBLE_EQ(g.plus(ExteriorFunction::constant(2, 1.0))(make_vec({0, 0})), 1.0);
}

TEST(ExitFunctional, ConditionalEstimatorMatchesPoissonKernel) {
  const std::vector<Vec> starts{make_vec({0, 0}), make_vec({0.5, 0}), make_vec({-0.5, 0.3})};
  ExitBank bank = make_exit_bank(Ball(make_vec({0, 0}), 1.0), starts, 11, SeedMode::Independent);
  extend_exit_bank(bank, build_scheme(cauchy(), 0.01), 3000);
  const ExitFunctional exits(cauchy(), bank);
  for (double dist : {1.4, 4.0}) {
    const ExteriorTerm t = bump(make_vec({dist, 0.4}), 0.25, 1.0);
    const HarmonicField f = exits.extend(ExteriorFunction({t}));
    for (std::size_t s = 0; s < starts.size(); ++s) {
      const double oracle = poisson_oracle(t, starts[s]);
      EXPECT_NEAR(f.value[s], oracle, 4 * f.std_err[s] + 0.02 * oracle) << "dist " << dist << " start " << s;
    }
  }
  // a constant is reproduced without noise
  const HarmonicField one = exits.extend(ExteriorFunction::constant(2, 1.0));
  for (double v : one.value) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(WeakHarnack, ConstantDataGivesOne) {
  const HarnackParams p = unit_params();
  std::vector<Vec> offsets;
  for (const Vec& v : ball_lattice(Ball(make_vec({0, 0}), 1.0), 0.2))
    if (v.norm() < 0.999) offsets.push_back(v);
  const ExteriorFunction one = ExteriorFunction::constant(2, 1.0);
  const HarmonicField f = harmonic_extend(cauchy(), one, Ball(p.x0, 1.0), offsets, 20, 1, SeedMode::Common);
  const HarnackReport rep = verify_weak_harnack(cauchy(), f, one, p);
  EXPECT_DOUBLE_EQ(rep.c_est, 1.0);
  EXPECT_EQ(rep.tail_term, 0.0);
  EXPECT_FALSE(rep.vacuous);
}

TEST(WeakHarnack, NegativeTailIntegral) {
  const HarnackParams p = unit_params();
  EXPECT_EQ(negative_tail_integral(cauchy(), ExteriorFunction::constant(2, 1.0), p), 0.0);
  // small negative bump far away: int g^- f_nu(y - z) dy ~ |g^-|_1 f_nu(center - z)
  const ExteriorTerm t = bump(make_vec({5, 0}), 0.1, -1.0);
  Vec argmax;
  const double tail = negative_tail_integral(cauchy(), ExteriorFunction({t}), p, &argmax);
  double mass = 0.0;
  const auto gl = numerics::gauss_legendre(32);
  for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
    const double rho = 0.05 * (gl.nodes[i] + 1);
    mass += 0.05 * gl.weights[i] * rho * 2 * kPi * std::abs(t.at(make_vec({rho, 0})));
  }
  const double at_argmax = mass * levy_density(cauchy(), Vec(t.center - argmax));
  EXPECT_NEAR(tail / at_argmax, 1.0, 2e-3);
  EXPECT_GT(argmax(0), 0.0);  // the sup sits on the side facing the bump
}

TEST(HoelderConstants, ClosedForm) {
  const HoelderConstants h = hoelder_constants(1.0, 2.0);
  EXPECT_NEAR(h.kappa, 0.25, 1e-15);
  EXPECT_NEAR(h.beta_theory, std::log(2.0 / 1.75) / std::log(2.0), 1e-15);
  EXPECT_THROW(hoelder_constants(0.2, 2.0), Error);
  EXPECT_THROW(hoelder_constants(1.0, 1.0), Error);
}

TEST(NestedLattice, LevelsNest) {
  const HarnackParams p = unit_params();
  const NestedLattice lat = nested_lattice(p, 3, 4);
  ASSERT_EQ(lat.level_nodes.size(), 4u);
  for (int n = 0; n <= 3; ++n) {
    const double radius = std::pow(2.0, -n);
    EXPECT_FALSE(lat.level_nodes[n].empty());
    for (int i : lat.level_nodes[n]) EXPECT_LT(lat.offsets[i].norm(), radius);
  }
}

TEST(HoelderExponent, ConstantDataIsUndefined) {
  const HarnackParams p = unit_params();
  const NestedLattice lat = nested_lattice(p, 2, 4);
  ExitBank bank = make_exit_bank(Ball(p.x0, p.r), lat.offsets, 5, SeedMode::Common);
  extend_exit_bank(bank, build_scheme(cauchy(), 0.01), 50);
  const ExitFunctional exits(cauchy(), bank);
  const ExteriorFunction one = ExteriorFunction::constant(2, 1.0);
  const NestedField nf = nested_field(exits, lat, one, p);
  try {
    estimate_hoelder_exponent(nf);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Precondition);
  }
  const HoelderIteration it = run_oscillation_iteration(nf, one, 2.0);
  EXPECT_TRUE(it.sandwich_ok);
}

TEST(AnnulusMass, IsotropicClosedFormAndOffCenterQuadrature) {
  // from the center: (c / alpha) f |S^1| (R1^{-1} - R2^{-1}) = 1/R1 - 1/R2
  EXPECT_NEAR(annulus_levy_mass(cauchy(), make_vec({0, 0}), 2.0, 4.0), 0.25, 1e-10);
  // off center: polar Gauss rule over the annulus
  const Vec x = make_vec({0.5, 0.2});
  const auto gl = numerics::gauss_legendre(64);
  double s = 0.0;
  for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
    const double rho = 3.0 + gl.nodes[i], wr = gl.weights[i] * rho;
    for (int k = 0; k < 1024; ++k) {
      const double a = 2 * kPi * (k + 0.5) / 1024;
      s += wr * 2 * kPi / 1024 * levy_density(cauchy(), Vec(rho * make_vec({std::cos(a), std::sin(a)}) - x));
    }
  }
  EXPECT_NEAR(annulus_levy_mass(cauchy(), x, 2.0, 4.0) / s, 1.0, 1e-6);
}

TEST(AnnulusTail, GeometricDecay) {
  const TailDecayReport rep = annulus_tail_decay(cauchy(), unit_params(), 3, 6);
  ASSERT_EQ(rep.eta.size(), 6u);
  EXPECT_TRUE(rep.geometric);
  EXPECT_NEAR(rep.zeta_fit, 2.0, 0.1);
  for (std::size_t j = 1; j < rep.eta.size(); ++j) EXPECT_LT(rep.eta[j], rep.eta[j - 1]);
}
