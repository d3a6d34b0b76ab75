#pragma once

// Increments and first exits of the stable process. Jumps larger than
// eps_cut are simulated exactly as a compound Poisson process; the small
// jumps are replaced by a Brownian motion with the matching covariance.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "stable/core_model.hpp"

namespace stable {

using Rng = std::mt19937_64;

/// Independent stream for (root seed, index), by splitmix64 mixing.
Rng make_stream(std::uint64_t root, std::uint64_t index);
std::uint64_t mix_seed(std::uint64_t root, std::uint64_t index);

/// Vose alias table.
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(const std::vector<double>& weights);
  std::size_t sample(Rng& rng) const;
  std::size_t size() const { return prob_.size(); }
  /// Normalized probability of outcome i (for tests).
  double probability(std::size_t i) const { return mass_[i]; }

 private:
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
  std::vector<double> mass_;
};

struct IncrementScheme {
  int dim = 0;
  double alpha = 0.0;
  double eps_cut = 0.0;
  double big_jump_rate = 0.0;  // Lambda(eps) = c |mu| eps^{-alpha} / alpha
  Mat gauss_cov;               // Sigma(eps) = c eps^{2-alpha} / (2-alpha) int xi xi^T dmu
  Mat gauss_factor;            // Sigma = F F^T
  double phi_max = 0.0;        // for the step-size policy

  // direction law of the big jumps
  std::vector<Vec> directions;
  AliasTable direction_table;
  bool jitter = false;              // spread each node uniformly over its quadrature cell
  double azimuth_cell = 0.0;        // 2 pi / n_azimuth
  std::vector<double> polar_edges;  // d = 3: cell boundaries in cos(polar angle)
  int n_azimuth = 0;

  Vec sample_direction(Rng& rng) const;
  Vec sample_jump(Rng& rng) const;
};

/// eps_cut > 0. Density measures: direction law over the quadrature nodes;
/// atomic measures: over the atoms (exact).
IncrementScheme build_scheme(const StableModel& model, double eps_cut);

/// Characteristic exponent of the scheme: u^T Sigma u / 2 + int_{|x|>eps} (1 - cos u.x) nu(dx).
double scheme_exponent(const StableModel& model, const IncrementScheme& scheme, const Vec& u);

/// int_0^b (1 - cos r) r^{-1-alpha} dr.
double truncated_cosine_integral(double alpha, double b);

double uniform01(Rng& rng);       // [0, 1)
double uniform_open(Rng& rng);    // (0, 1]
double standard_normal(Rng& rng);

/// Gaussian(0, dt Sigma) plus Poisson(dt Lambda) big jumps.
Vec sample_increment(const IncrementScheme& scheme, double dt, Rng& rng);

struct ExitSample {
  Vec position;
  double time = 0.0;
  long n_steps = 0;
  Vec pre_exit;          // position just before the exiting jump
  bool by_jump = false;  // false: the Gaussian part crossed the boundary
};

struct ExitOptions {
  long step_budget = 1000000;
  int max_refine = 256;
};

/// First exit from the closed ball D started at `start` (strictly inside).
/// The main stream is consumed identically for every start; Brownian bridge
/// refinement of the Gaussian part near the boundary draws from `aux`.
ExitSample sample_exit(const IncrementScheme& scheme, const Ball& ball, const Vec& start, Rng& main, Rng& aux,
                       const ExitOptions& opts = {});

/// Convenience overload with streams derived from (seed, path).
ExitSample sample_exit(const IncrementScheme& scheme, const Ball& ball, const Vec& start, std::uint64_t seed,
                       std::uint64_t path, const ExitOptions& opts = {});

enum class SeedMode {
  Independent,  // every (start, path) pair has its own stream
  Common,       // path i uses the same stream from every start
};

/// Same as sample_exit for the ball of radius `radius` centered at 0; the
/// result's position is an offset from the center.
ExitSample sample_exit_offset(const IncrementScheme& scheme, double radius, const Vec& offset, std::uint64_t seed,
                              std::uint64_t path, const ExitOptions& opts = {});

/// Exit positions from several starts, kept for reuse across many
/// functionals of X_tau. Starts and exits are offsets from ball.center, so a
/// translated bank reproduces the same numbers bit for bit.
struct ExitBank {
  Ball ball;
  std::vector<Vec> starts;
  std::vector<std::vector<Vec>> exits;  // exits[start][path]
  std::vector<std::vector<double>> times;
  std::vector<std::vector<Vec>> pre_exits;  // meaningful where by_jump is set
  std::vector<std::vector<char>> by_jump;
  std::uint64_t seed = 0;
  SeedMode mode = SeedMode::Independent;
  double eps_cut = 0.0;
  long total_steps = 0;

  std::size_t paths() const { return exits.empty() ? 0 : exits.front().size(); }
};

ExitBank make_exit_bank(const Ball& ball, std::vector<Vec> offsets, std::uint64_t seed, SeedMode mode);

/// Appends `n` paths to every start (path indices continue from paths()).
void extend_exit_bank(ExitBank& bank, const IncrementScheme& scheme, int n, const ExitOptions& opts = {});

/// ((r^2 - |x|^2) / (|y|^2 - r^2))^{alpha/2} |x - y|^{-d} times the constant
/// making the exterior integral 1 (computed numerically). Ball centered at 0.
double poisson_kernel_isotropic(double alpha, int d, double r, const Vec& x, const Vec& y);
double poisson_kernel_constant(double alpha, int d);

/// P(|X_tau| <= rho r) for the isotropic process started at the center of B_r.
double isotropic_exit_radial_cdf(double alpha, double rho);

/// Two-sample and one-sample Kolmogorov-Smirnov distances.
double ks_distance(std::vector<double> a, std::vector<double> b);
template <class Cdf>
double ks_distance_to(std::vector<double> a, Cdf&& cdf) {
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double f = cdf(a[i]);
    d = std::max({d, std::abs(f - i / n), std::abs((i + 1) / n - f)});
  }
  return d;
}

}  // namespace stable
