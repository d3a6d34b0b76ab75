// Acceptance checks 1-9. One PASS/FAIL line per criterion; the exit status
// is nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "stable/density.hpp"
#include "stable/experiment.hpp"
#include "stable/green.hpp"
#include "stable/harnack.hpp"
#include "stable/numerics.hpp"
#include "stable/simulate.hpp"

using namespace stable;
using numerics::kPi;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

StableModel cauchy() { return StableModel(2, 1.0, SpectralMeasure::isotropic(0.25)); }

// f_mu(theta) proportional to 1 + 0.5 cos^2 theta
StableModel anisotropic(double level = 1.0) {
  return StableModel(2, 1.0,
                     SpectralMeasure::density([level](const Vec& x) { return level * (1.0 + 0.5 * x(0) * x(0)); },
                                              1.5 * level, "1+0.5cos^2"));
}

StableModel axes_model() {
  std::vector<SpectralMeasure::Atom> atoms;
  for (int i = 0; i < 2; ++i) {
    atoms.push_back({Vec(Vec::Unit(2, i)), 0.5});
    atoms.push_back({Vec(-Vec::Unit(2, i)), 0.5});
  }
  return StableModel(2, 1.0, SpectralMeasure::atomic(atoms));
}

Outcome symbol_exactness() {
  std::mt19937_64 rng(20261017);
  std::uniform_real_distribution<double> coord(-5.0, 5.0), scale(0.1, 10.0), log_scale(-3.0, 3.0);
  // |Phi(cu) - c^alpha Phi(u)| / Phi(u) for c in [0.1, 10]; over c in [1e-3, 1e3] the same gap is
  // measured against Phi(cu), since dividing by Phi(u) scales round-off by c^alpha.
  double worst = 0.0, worst_wide = 0.0;
  for (const StableModel& m : {anisotropic(), StableModel(2, 1.4, SpectralMeasure::isotropic(1.0)),
                               StableModel(3, 0.8, SpectralMeasure::isotropic(1.0))}) {
    for (int i = 0; i < 100; ++i) {
      Vec u(m.dim());
      for (int k = 0; k < m.dim(); ++k) u(k) = coord(rng);
      const double c = scale(rng), wide = std::pow(10.0, log_scale(rng));
      const double phi = char_exponent(m, u);
      worst = std::max(worst, std::abs(char_exponent(m, Vec(c * u)) - std::pow(c, m.alpha()) * phi) / phi);
      const double phi_wide = char_exponent(m, Vec(wide * u));
      worst_wide = std::max(worst_wide, std::abs(phi_wide - std::pow(wide, m.alpha()) * phi) / phi_wide);
    }
  }
  const StableModel iso(2, 1.0, SpectralMeasure::isotropic(1.0));
  double closed = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Vec u = make_vec({coord(rng), coord(rng)});
    closed = std::max(closed, std::abs(char_exponent(iso, u) - 4.0 * u.norm()));
  }
  return {worst <= 1e-12 && worst_wide <= 1e-12 && closed <= 1e-8,
          fmt("homogeneity %.2e (c in [0.1,10]), %.2e (c in [1e-3,1e3], relative to Phi(cu)), both <= 1e-12; "
              "|Phi - 4|u|| %.2e (<= 1e-8)",
              worst, worst_wide, closed)};
}

Outcome density_scaling() {
  const StableModel m = anisotropic(0.25);
  const TransitionDensityGrid unit = unit_density_grid(m, default_extent(2), default_spacing(2));
  double worst_mass = std::abs(unit.mass - 1.0);
  const StableModel iso = cauchy();
  worst_mass = std::max(worst_mass, std::abs(unit_density_grid(iso, default_extent(2), default_spacing(2)).mass - 1.0));

  double worst = 0.0;
  long compared = 0;
  // t = 1/4 needs a finer grid for the cutoff exp(-t Phi_min (pi/h)^alpha) < 1e-12
  const std::pair<double, std::pair<double, double>> runs[] = {{0.25, {20.0, default_spacing(2) / 4.0}},
                                                                {4.0, {default_extent(2), default_spacing(2)}}};
  for (const auto& [t, geom] : runs) {
    const TransitionDensityGrid other = density_grid_at_time(m, t, geom.first, geom.second);
    const double s = std::pow(t, -1.0 / m.alpha());
    for (std::size_t i = 0; i < other.size(); ++i) {
      if (other.values[i] <= 1e-6) continue;
      const Vec x = other.node(i);
      if (!in_grid(unit, Vec(s * x))) continue;
      const DensityValue v = density_at(unit, t, x);
      worst = std::max(worst, std::abs(v.value / other.values[i] - 1.0));
      ++compared;
    }
  }
  return {worst_mass <= 1e-3 && worst <= 2e-3,
          fmt("|mass - 1| %.2e (<= 1e-3), scaling rel err %.2e (<= 2e-3) over %.0f nodes", worst_mass, worst,
              double(compared))};
}

Outcome product_oracle() {
  const TransitionDensityGrid g = unit_density_grid(axes_model(), default_extent(2), default_spacing(2));
  // 33 x 33 nodes, every 16th node around the origin: coordinates k * 0.625, |k| <= 16
  double worst = 0.0;
  const int o = g.n / 2;
  for (int a = -16; a <= 16; ++a)
    for (int b = -16; b <= 16; ++b) {
      const std::size_t idx = g.flat_index(o + 16 * a, o + 16 * b);
      const Vec x = g.node(idx);
      const double oracle = 1.0 / (kPi * kPi * (1 + x(0) * x(0)) * (1 + x(1) * x(1)));
      worst = std::max(worst, std::abs(g.values[idx] / oracle - 1.0));
    }
  return {worst <= 1e-3, fmt("max rel err %.2e (<= 1e-3) on 33x33 nodes in [-10,10]^2", worst)};
}

Outcome green_oracle() {
  const StableModel m = cauchy();
  const RadialGreenProfile p = green_profile(m, unit_density_grid(m, default_extent(2), default_spacing(2)));
  const double target = 1.0 / (2 * kPi);
  const double dev = std::max(std::abs(p.min_value / target - 1.0), std::abs(p.max_value / target - 1.0));
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> coord(-3, 3), scale(0.01, 100);
  double hom = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Vec x = make_vec({coord(rng), coord(rng)});
    const double c = scale(rng);
    hom = std::max(hom, std::abs(green_point(p, Vec(c * x)) * c / green_point(p, x) - 1.0));
  }
  return {dev <= 0.01 && hom <= 1e-13,
          fmt("max |G(0,e)/(1/2pi) - 1| %.2e (<= 1e-2), homogeneity %.2e", dev, hom)};
}

Outcome exit_law() {
  const StableModel m = cauchy();
  const int n = 100000;
  std::vector<std::vector<double>> radial;
  const double radii[] = {1.0, 0.5, 2.0};
  for (int k = 0; k < 3; ++k) {
    const double r = radii[k];
    const IncrementScheme s = build_scheme(m, 0.01 * r);
    const Ball ball(make_vec({0, 0}), r);
    std::vector<double> rho;
    rho.reserve(n);
    for (int p = 0; p < n; ++p) rho.push_back(sample_exit(s, ball, ball.center, 1000 + k, p).position.norm() / r);
    radial.push_back(std::move(rho));
  }
  const double ks = ks_distance_to(radial[0], [](double rho) { return isotropic_exit_radial_cdf(1.0, rho); });
  const double ks_self = ks_distance(radial[1], radial[2]);
  return {ks <= 0.02 && ks_self <= 0.02,
          fmt("KS to closed form %.4f (<= 0.02), KS r=1/2 vs r=2 %.4f (<= 0.02), 1e5 paths each", ks, ks_self)};
}

Outcome lemma_suite() {
  bool ok = true;
  std::ostringstream os;
  const Vec x0 = make_vec({0, 0});
  const double r = 1.0, lambda = 4.0 / 3.0, theta = 2.0, a = 0.9;
  int idx = 0;
  for (const StableModel& m : {cauchy(), anisotropic(0.25)}) {
    const RadialGreenProfile p = green_profile(m, unit_density_grid(m, default_extent(2), default_spacing(2)));
    McOptions mc;
    mc.seed = 11 + idx;
    const LemmaReport l1 = verify_lemma1(m, p, x0, r, lambda, a, spread_points(Ball(x0, a * r), 20, 0.02), mc);
    double worst_rel = 0.0;
    for (const LemmaSample& s : l1.samples)
      if (s.lhs > 0) worst_rel = std::max(worst_rel, s.std_err / s.lhs);
    const double c1 = l1.constants.at("c1");
    const bool ok1 = std::isfinite(c1) && worst_rel <= 0.05;

    const LemmaReport l2 = verify_lemma2(m, p, x0, r, theta, a, spread_points(Ball(x0, r / theta), 5, 0.02), mc);
    const double delta1 = l2.constants.at("delta1");
    const double c2_low = l2.constants.count("c2_minus_2sigma") ? l2.constants.at("c2_minus_2sigma") : 0.0;
    const bool ok2 = delta1 > 0.0 && c2_low > 0.0;

    // 20 pairs xbar in B_{r/theta}, u in B_{ar} with |u - xbar| >= delta1
    std::vector<std::pair<Vec, Vec>> pairs;
    const auto xs = spread_points(Ball(x0, r / theta), 20, 0.02);
    const auto us = spread_points(Ball(x0, a * r), 80, 0.02);
    for (int i = 0; i < 20; ++i)
      for (int j = 0; j < 80; ++j) {
        const Vec& u = us[(4 * i + 7 * j) % 80];
        if ((u - xs[i]).norm() >= std::max(delta1, 1e-9)) {
          pairs.emplace_back(xs[i], u);
          break;
        }
      }
    const LemmaReport l3 = verify_lemma3(m, p, x0, r, lambda, theta, a, delta1 > 0 ? delta1 : 0.1, pairs, mc);
    const double c3 = l3.constants.at("c3");
    const bool ok3 = std::isfinite(c3) && pairs.size() == 20 && l3.constants.at("far_pairs") == 20;
    ok = ok && ok1 && ok2 && ok3;
    os << (idx ? "; " : "") << (idx ? "anisotropic" : "isotropic")
       << fmt(": c1 %.4g (max rel se %.3f), delta1 %.3g c2-2s %.3g", c1, worst_rel, delta1, c2_low)
       << fmt(", c3 %.4g", c3);
    ++idx;
  }
  return {ok, os.str()};
}

struct HarnackShared {
  StableModel model = cauchy();
  HarnackParams params;
  HarnackConstant constant;
};

HarnackShared& harnack_shared() {
  static HarnackShared s = [] {
    HarnackShared h;
    h.params.x0 = make_vec({0, 0});
    EnsembleOptions opts;
    opts.size = 50;
    opts.paths = 2000;
    opts.seed = 1;
    h.constant = estimate_harnack_constant(h.model, h.params, opts);
    return h;
  }();
  return s;
}

Outcome weak_harnack() {
  HarnackShared& h = harnack_shared();
  const double c1 = h.constant.c1;
  bool by_construction = std::isfinite(c1);
  int vacuous = 0;
  for (const EnsembleMember& m : h.constant.members) {
    by_construction = by_construction && m.report.avg_term <= c1 * m.report.inf_term * (1 + 1e-12);
    vacuous += m.report.vacuous;
  }
  const auto trials = signed_trials(h.model, h.params, c1, h.constant.bank, 20, 2);
  int holds = 0, outside = 0;
  for (const SignedTrial& t : trials) {
    holds += t.holds;
    outside += !t.holds && !t.within_noise;
  }
  const double rate = double(holds) / trials.size();
  return {by_construction && vacuous == 0 && rate >= 0.95 && outside == 0,
          fmt("c1 %.4f over %.0f members; signed trials hold %.0f%%, failures beyond 2 sigma %.0f", c1,
              double(h.constant.members.size()), 100 * rate, double(outside))};
}

Outcome hoelder() {
  const HoelderConstants hc = hoelder_constants(1.0, 2.0);
  const double beta_exact = std::log(2.0 / 1.75) / std::log(2.0);
  const bool closed = std::abs(hc.kappa - 0.25) <= 1e-12 && std::abs(hc.beta_theory - beta_exact) <= 1e-12 &&
                      std::abs(hc.beta_theory - 0.19265) < 5e-6;

  HarnackShared& h = harnack_shared();
  const double c1 = h.constant.c1;
  const double beta_theory = hoelder_constants(c1, h.params.theta).beta_theory;
  const NestedLattice lattice = nested_lattice(h.params, 4, 8);
  ExitBank bank = make_exit_bank(Ball(h.params.x0, h.params.r), lattice.offsets, 3, SeedMode::Common);
  extend_exit_bank(bank, build_scheme(h.model, 0.01 * h.params.r), 1000);
  const ExitFunctional exits(h.model, bank);
  Rng rng = make_stream(mix_seed(3, 0x686f656c646572ULL), 0);
  static const char* families[] = {"shell", "bump", "spike"};
  bool sandwich = true;
  double min_beta = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 10; ++i) {
    const ExteriorFunction g = random_exterior(families[i % 3], h.params, rng);
    const NestedField nf = nested_field(exits, lattice, g, h.params);
    sandwich = sandwich && run_oscillation_iteration(nf, g, c1).sandwich_ok;
    min_beta = std::min(min_beta, estimate_hoelder_exponent(nf).beta_fit);
  }
  const TailDecayReport tail = annulus_tail_decay(h.model, h.params, 3, 6);
  const bool tail_ok = tail.max_residual <= 0.10 && std::abs(tail.zeta_fit / 2.0 - 1.0) <= 0.05;
  std::ostringstream os;
  os << fmt("kappa %.15g beta %.15g; ", hc.kappa, hc.beta_theory)
     << "sandwich " << (sandwich ? "ok" : "violated")
     << fmt(" at n <= 4; min beta_fit %.3f vs beta_theory %.4f; ", min_beta, beta_theory)
     << fmt("zeta_fit %.4f (theta^alpha = 2), residual %.3f", tail.zeta_fit, tail.max_residual);
  return {closed && sandwich && min_beta >= beta_theory - 0.02 && tail_ok, os.str()};
}

Outcome determinism() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "stableharnack_acceptance";
  fs::remove_all(root);
  const std::string configs[] = {
      "[task]\nname = exit\nseed = 5\n[model]\nlevel = 0.25\n[params]\npaths = 2000\n",
      "[task]\nname = hoelder\nseed = 5\n[model]\nmeasure = trig\nanisotropy = 0.5\nharmonic = 2\n"
      "[params]\nc1 = 3\nlevels = 2\npaths = 200\nensemble = 3\nnodes_per_radius = 4\n",
      "[task]\nname = lemma1\nseed = 5\n[model]\nmeasure = quadratic\n[params]\nsamples = 2\nmax_paths = 1000\n",
  };
  bool same = true;
  int i = 0;
  std::ostringstream names;
  for (const std::string& text : configs) {
    std::string reports[2];
    for (int k = 0; k < 2; ++k) {
      ExperimentConfig c = parse_config(text);
      c.output_dir = (root / (std::to_string(i) + "_" + std::to_string(k))).string();
      std::ostringstream log;
      run_experiment(c, log);
      std::ifstream in(c.output_dir + "/report.json");
      std::ostringstream ss;
      ss << in.rdbuf();
      reports[k] = ss.str();
    }
    same = same && !reports[0].empty() && reports[0] == reports[1];
    names << (i ? ", " : "") << parse_config(text).task;
    ++i;
  }
  fs::remove_all(root);
  return {same, "report.json byte-identical across two runs for " + names.str()};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"symbol exactness", symbol_exactness}, {"density normalization and scaling", density_scaling},
      {"product oracle", product_oracle},     {"Green oracle", green_oracle},
      {"exit-law oracle", exit_law},          {"lemma suite", lemma_suite},
      {"weak Harnack", weak_harnack},         {"Hoelder", hoelder},
      {"determinism", determinism},
  };
  int failed = 0, k = 0;
  for (const auto& [name, check] : criteria) {
    ++k;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", k, name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
