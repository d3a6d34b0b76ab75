#pragma once

// Green function G(0, x) = int_0^inf p(t, x) dt of the whole space and the
// killed Green function of a ball, G_D(x, z) = G(z - x) - E^x[G(z - X_tau)].

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stable/core_model.hpp"
#include "stable/density.hpp"
#include "stable/simulate.hpp"

namespace stable {

/// G(0, xi) on a direction grid: n equally spaced angles (d = 2) or
/// (n_polar + 1) polar angles in [0, pi] times n_azimuth (d = 3).
struct RadialGreenProfile {
  int dim = 0;
  double alpha = 0.0;
  int n_polar = 0;
  int n_azimuth = 0;
  std::vector<Vec> directions;
  std::vector<double> values;
  double t_split = 0.0;        // times below this come from the grid, above from the tail formula
  double tail_fraction = 0.0;  // largest share of a value contributed by the tail formula
  double min_value = 0.0;
  double max_value = 0.0;
};

struct GreenOptions {
  int directions = 0;  // 0: 256 angles (d = 2), 32 polar rows (d = 3)
  int panels = 0;      // 0: 4096 (d = 2), 1024 (d = 3)
};

/// G(0, xi) = alpha/(d - alpha) int_0^inf p(1, w^{1/(d-alpha)} xi) dw, the
/// substitution of t = s^{-alpha}, w = s^{d-alpha} in int t^{-d/alpha} p(1, t^{-1/alpha} xi) dt.
RadialGreenProfile green_profile(const StableModel& model, const TransitionDensityGrid& grid,
                                 const GreenOptions& opts = {});

/// Interpolated G(0, e) for a unit vector e.
double green_direction(const RadialGreenProfile& profile, const Vec& unit);

/// G(0, x) = |x|^{alpha-d} G(0, x/|x|). Throws Singularity at x = 0.
double green_point(const RadialGreenProfile& profile, const Vec& x);

/// Average of G(0, .) over the ball of volume `cell_volume` centered at 0,
/// used when a lattice node falls on the singularity.
double green_cell_average(const RadialGreenProfile& profile, double cell_volume);

struct KilledGreenEstimate {
  double value = 0.0;
  double std_err = 0.0;
  long n_paths = 0;
  Ball ball;
};

struct McOptions {
  std::uint64_t seed = 1;
  double eps_fraction = 0.01;  // eps_cut = eps_fraction * ball radius
  int batch = 1000;
  int max_paths = 20000;
  double rel_target = 0.05;
  ExitOptions exit;
};

/// G_D(x, z) with exits sampled from x. x outside D gives 0 with zero error.
KilledGreenEstimate killed_green(const StableModel& model, const RadialGreenProfile& profile, const Ball& ball,
                                 const Vec& x, const Vec& z, int n_paths, std::uint64_t seed,
                                 double eps_fraction = 0.01);

struct LemmaSample {
  std::vector<Vec> points;
  double lhs = 0.0;
  double rhs = 0.0;
  double std_err = 0.0;
  double margin = 0.0;
  long n_paths = 0;
  bool pass = false;
  std::string note;
};

struct LemmaReport {
  std::string lemma_id;
  std::map<std::string, double> constants;
  std::map<std::string, double> params;
  std::vector<LemmaSample> samples;
  std::vector<std::string> log;
  bool conclusive = true;
};

/// Uniform lattice of spacing `spacing` restricted to the closed ball.
std::vector<Vec> ball_lattice(const Ball& ball, double spacing);
/// Lattice with at least `min_nodes` nodes; returns the spacing used.
std::vector<Vec> ball_lattice_min(const Ball& ball, int min_nodes, double* spacing = nullptr);

/// `count` points spread over the ball (area-uniform radii, golden-angle
/// directions); the last two sit at distance `edge_gap` from the boundary.
std::vector<Vec> spread_points(const Ball& ball, int count, double edge_gap);

/// Lemma 1: for each z, the lattice average over B_{r/lambda}(x0) of
/// G_{B_ar}(., z) (by symmetry of G_D, exits sampled from z); c1 = max.
LemmaReport verify_lemma1(const StableModel& model, const RadialGreenProfile& profile, const Vec& x0, double r,
                          double lambda, double a, const std::vector<Vec>& z_samples, const McOptions& mc);

/// Lemma 2: largest delta among 0.4 r 2^{-k/2}, k < 8, with
/// min over z in B(xbar, delta) of G_{B_ar}(xbar, z) - 2 sigma > 0; c2 is that minimum.
LemmaReport verify_lemma2(const StableModel& model, const RadialGreenProfile& profile, const Vec& x0, double r,
                          double theta, double a, const std::vector<Vec>& xbar_samples, const McOptions& mc);

/// Lemma 3: c3 = max over pairs with |u - xbar| >= delta1 of
/// avg_{B_{r/lambda}} G_{B_ar}(., u) / G_{B_ar}(xbar, u); pairs closer than
/// delta1 give the constant of the near-diagonal remark.
LemmaReport verify_lemma3(const StableModel& model, const RadialGreenProfile& profile, const Vec& x0, double r,
                          double lambda, double theta, double a, double delta1,
                          const std::vector<std::pair<Vec, Vec>>& pairs, const McOptions& mc);

}  // namespace stable
