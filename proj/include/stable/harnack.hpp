#pragma once

// Harmonic extensions of exterior data, the three terms of the weak Harnack
// inequality, the oscillation iteration behind the Hoelder estimate and the
// annulus tail decay it assumes.

#include <cstdint>
#include <string>
#include <vector>

#include "stable/core_model.hpp"
#include "stable/green.hpp"
#include "stable/simulate.hpp"

namespace stable {

struct HarnackParams {
  Vec x0;
  double r = 1.0;
  double r0 = 1.0;
  double lambda = 4.0 / 3.0;
  double theta = 2.0;
  double sigma_ratio = 3.0;
  double a = 0.9;

  /// theta > lambda > 1, 2 theta > sigma_ratio > 1, 1/lambda < a < 1, 0 < r <= r0.
  void validate() const;
  /// r / (2 theta), the radius bounding the negative part in the iteration.
  double c0() const { return r / (2.0 * theta); }
};

/// One closed-form piece of exterior data.
struct ExteriorTerm {
  enum class Kind { Constant, Shell, Bump, Linear };
  Kind kind = Kind::Constant;
  double amplitude = 0.0;
  Vec center;
  double inner = 0.0;   // Shell: inner radius
  double outer = 0.0;   // Shell: outer radius
  double width = 0.0;   // Bump: support radius
  Vec slope;            // Linear: unit direction
  double scale = 1.0;   // Linear: saturation length R
  double offset = 0.0;  // Linear: additive constant
  std::string family;   // "constant", "shell", "bump", "spike", "linear", "negative-bump"

  /// Value at y, given rel = y - center.
  double at(const Vec& rel) const;
  double lower() const;
  double upper() const;
};

/// g = sum of terms. Only Bump terms may be negative.
class ExteriorFunction {
 public:
  ExteriorFunction() = default;
  explicit ExteriorFunction(std::vector<ExteriorTerm> terms);

  static ExteriorFunction constant(int d, double value);

  double operator()(const Vec& y) const;
  /// g(origin + offset), evaluated term by term as (origin - c) + offset so
  /// that translating origin and terms together is exact for dyadic shifts.
  double at_offset(const Vec& origin, const Vec& offset) const;

  const std::vector<ExteriorTerm>& terms() const { return terms_; }
  double lower_bound() const;
  double upper_bound() const;
  double sup_abs() const { return std::max(std::abs(lower_bound()), std::abs(upper_bound())); }
  bool nonnegative() const { return lower_bound() >= 0.0; }
  bool has_negative_part() const;
  ExteriorFunction scaled(double s) const;
  ExteriorFunction translated(const Vec& shift) const;
  ExteriorFunction plus(const ExteriorFunction& other) const;
  std::string describe() const;

 private:
  std::vector<ExteriorTerm> terms_;
};

/// u(x) = E^x[g(X_tau_B)] on lattice nodes given as offsets from ball.center.
struct HarmonicField {
  Ball ball;
  std::vector<Vec> offsets;
  std::vector<double> value;
  std::vector<double> std_err;
  long n_paths = 0;

  double max_std_err() const;
};

/// Estimates E^x[g(X_tau)] from an exit bank. When the exit is a jump from w,
/// the sample g(X_tau) is replaced by its conditional mean given w,
///   int g(w + y) f_nu(y) dy / int f_nu(y) dy  over {|y| > eps, |w + y| > r},
/// for the terms where that ratio has a direct quadrature (bumps, shells
/// enclosing the ball). Constants, other terms and Gaussian exits use
/// g(X_tau). Without a Levy density every sample is g(X_tau).
class ExitFunctional {
 public:
  ExitFunctional(const StableModel& model, const ExitBank& bank);

  const ExitBank& bank() const { return *bank_; }
  /// One sample per path for start s.
  std::vector<double> samples(const ExteriorFunction& g, std::size_t s) const;
  HarmonicField extend(const ExteriorFunction& g) const;

 private:
  struct PolarRule {
    std::vector<double> radius;  // in (0, 1), times the bump width
    std::vector<double> radial_weight;
    std::vector<Vec> dirs;
    std::vector<double> dir_weight;
  };

  double bump_integral(const ExteriorTerm& t, const Vec& rel_center, const Vec& w) const;
  double shell_integral(const ExteriorTerm& t, const Vec& rel_center, const Vec& w) const;

  const StableModel* model_;
  const ExitBank* bank_;
  bool conditional_ = false;
  struct RayRule {
    std::vector<Vec> dirs;
    std::vector<double> weight;  // quadrature weight times c(alpha) f_mu / alpha
  };

  const RayRule& ray_rule(double gap_ratio) const;
  double neg_pow(double x) const { return alpha_is_one_ ? 1.0 / x : std::pow(x, -alpha_); }

  double alpha_ = 1.0;
  bool alpha_is_one_ = false;
  RayRule ray_rules_[3];           // coarse to fine, chosen by the relative gap to the nearest sphere
  PolarRule bump_rules_[3];        // coarse to fine, chosen by width / distance
  std::vector<std::vector<double>> exit_mass_;  // nu({|y| > eps, |w + y| > r}) per (start, path)
};

HarmonicField harmonic_extend(const StableModel& model, const ExitBank& bank, const ExteriorFunction& g);

/// Builds the bank: n_paths exits per node, eps_cut = eps_fraction * radius.
HarmonicField harmonic_extend(const StableModel& model, const ExteriorFunction& g, const Ball& ball,
                              const std::vector<Vec>& offsets, int n_paths, std::uint64_t seed,
                              SeedMode mode = SeedMode::Independent, double eps_fraction = 0.01);

struct HarnackReport {
  double avg_term = 0.0, avg_err = 0.0;
  double inf_term = 0.0, inf_err = 0.0;
  double tail_term = 0.0, tail_tol = 0.0;
  double c_est = 0.0, c_err = 0.0;
  bool vacuous = false;  // inf + tail indistinguishable from 0 while avg > 0
  Vec inf_node;
  Vec tail_argmax;
  int avg_nodes = 0, inf_nodes = 0, tail_points = 0;
  double sigma_ratio = 0.0, c0 = 0.0;
  std::string diagnostic;
};

/// avg over B_{r/lambda}, inf over B_{r/theta}, sup over z in B_{r/sigma} of
/// int g^-(y) f_nu(y - z) dy (u^- = g^- outside B_r since u >= 0 on B_r), and
/// c_est = avg / (inf + tail). The field must cover B_r(x0).
HarnackReport verify_weak_harnack(const StableModel& model, const HarmonicField& field, const ExteriorFunction& g,
                                  const HarnackParams& params);

/// sup over the z lattice of int g^-(y) f_nu(y - z) dy; 0 exactly when g >= 0.
double negative_tail_integral(const StableModel& model, const ExteriorFunction& g, const HarnackParams& params,
                              Vec* argmax = nullptr, int* n_points = nullptr);

struct EnsembleMember {
  std::string family;
  std::string description;
  HarnackReport report;
};

struct EnsembleOptions {
  int size = 50;
  int paths = 2000;
  double spacing_fraction = 0.1;  // field lattice spacing / r
  std::uint64_t seed = 1;
  double eps_fraction = 0.01;
};

struct HarnackConstant {
  double c1 = 0.0;
  std::vector<EnsembleMember> members;
  HarmonicField field_template;  // lattice and bank geometry used
  ExitBank bank;
};

/// Random nonnegative exterior data: "shell", "bump" or "spike" at distance in [r, 10r].
ExteriorFunction random_exterior(const std::string& family, const HarnackParams& p, Rng& rng);

/// c1 = max c_est over g = 1 and size - 1 random nonnegative members
/// (shells, bumps, spikes in rotation).
HarnackConstant estimate_harnack_constant(const StableModel& model, const HarnackParams& params,
                                          const EnsembleOptions& opts);

struct SignedTrial {
  std::string description;
  HarnackReport report;
  double lhs = 0.0, rhs = 0.0, combined_sigma = 0.0;
  bool holds = false;          // avg <= c1 (inf + tail)
  bool within_noise = false;   // fails by less than 2 combined sigma
  int halvings = 0;
};

/// Nonnegative member plus a negative bump outside B_r, halved until u >= 0
/// on B_r; checks the full inequality with the given c1.
std::vector<SignedTrial> signed_trials(const StableModel& model, const HarnackParams& params, double c1,
                                       const ExitBank& bank, int count, std::uint64_t seed);

struct HoelderConstants {
  double kappa = 0.0;
  double beta_theory = 0.0;
};

/// kappa = 1/(4 c1), beta = log(2/(2 - kappa)) / log(theta). Needs c1 > 1/4, theta > 1.
HoelderConstants hoelder_constants(double c1, double theta);

struct NestedLattice {
  std::vector<Vec> offsets;                   // from x0
  std::vector<std::vector<int>> level_nodes;  // node indices of the level-n lattice
};

/// Per level n = 0..levels a lattice of spacing r theta^{-n} / nodes_per_radius
/// on B_{r theta^{-n}}(x0).
NestedLattice nested_lattice(const HarnackParams& p, int levels, int nodes_per_radius = 8);

/// u on the nested balls B_{r theta^{-n}}(x0), all computed from exits of
/// B_r(x0) with common random numbers, plus the oscillation per level.
struct NestedField {
  HarnackParams params;
  int levels = 0;
  std::vector<std::vector<int>> level_nodes;
  HarmonicField field;
  std::vector<double> osc;     // sup - inf over the level lattice
  std::vector<double> osc_se;  // std error of u(argmax) - u(argmin), from the paired paths
  // exterior sample points (outside B_r), where u = g
  std::vector<Vec> exterior_offsets;
  std::vector<double> exterior_values;
};

/// The bank must be centered at x0 with radius r and its starts must be the
/// lattice offsets.
NestedField nested_field(const ExitFunctional& exits, const NestedLattice& lattice, const ExteriorFunction& g,
                         const HarnackParams& p);

struct IterationLevel {
  int k = 0;
  double m = 0.0, M = 0.0;
  int which_case = 0;            // 1: |{v <= 0}| >= half, 2: otherwise
  double fraction_nonpositive = 0.0;
  int sandwich_violations = 0;   // nodes outside [m - 3 sigma, M + 3 sigma]
  double worst_excess = 0.0;     // largest violation in units of sigma
  int envelope_violations = 0;
  int envelope_checked = 0;
};

struct HoelderIteration {
  double c1_in = 0.0;
  double kappa = 0.0;
  double beta_theory = 0.0;
  double K = 0.0;
  std::vector<double> m, M;
  std::vector<IterationLevel> case_log;
  double width_residual = 0.0;  // max |M_n - m_n - K theta^{-n beta}|
  bool sandwich_ok = true;
  bool envelope_ok = true;
  std::string diagnostic;
};

/// The constructive two-case update with (m_0, M_0) = (inf g, sup |g|).
HoelderIteration run_oscillation_iteration(const NestedField& nf, const ExteriorFunction& g, double c1);

struct HoelderFit {
  double beta_fit = 0.0;
  std::vector<double> osc;
  std::vector<double> noise;  // 3 sigma noise floor per level
  int levels_used = 0;
};

/// Least-squares slope of log osc_n against -n log theta over the levels whose
/// oscillation clears the noise floor. Throws Precondition when osc_0 is noise.
HoelderFit estimate_hoelder_exponent(const NestedField& nf);

struct TailDecayReport {
  int k = 0;
  std::vector<double> eta;  // eta_j, j = 1..J
  double zeta_fit = 0.0;
  double c_fit = 0.0;
  double max_residual = 0.0;  // max |eta_j / fit_j - 1|
  bool geometric = true;      // residual <= 10%
  int sup_points = 0;
};

/// eta_j = sup over x in B_{r theta^{-(k-1)} / sigma} of the f_nu mass of the
/// annulus r theta^{-(k-j)} <= |z - x0| <= r theta^{-(k-j-1)} seen from x.
TailDecayReport annulus_tail_decay(const StableModel& model, const HarnackParams& params, int k, int J);

/// f_nu mass of {R1 <= |z - x0| <= R2} seen from x (|x - x0| < R1).
double annulus_levy_mass(const StableModel& model, const Vec& x_offset, double R1, double R2);

}  // namespace stable
