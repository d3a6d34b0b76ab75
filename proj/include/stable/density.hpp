#pragma once

// Transition density p(t, x) by discrete Fourier inversion of exp(-t Phi).
//
// Plain periodization of a heavy-tailed density on [-L, L)^d leaves an
// aliasing error of order t L^{-d-alpha}. The grid removes it with a
// sequence of coarser periodizations (periods 2T, 4T, ...) whose differences
// telescope to the missing images, plus a constant Levy-tail remainder for the
// last level.

#include <cstdint>
#include <string>
#include <vector>

#include "stable/core_model.hpp"

namespace stable {

struct GridOptions {
  /// Number of coarser periodization levels; negative picks 3 (d = 2) or 1 (d = 3),
  /// one more for atomic measures.
  int fold_levels = -1;
  /// Skip the cutoff / extent pre-checks (tests that probe the failure path).
  bool check_preconditions = true;
};

/// Samples of p(t_ref, .) on nodes x_j = (j - n/2) h, j = 0..n-1 per axis.
struct TransitionDensityGrid {
  int dim = 0;
  double alpha = 0.0;
  double t_ref = 1.0;
  double L = 0.0;
  double h = 0.0;
  int n = 0;
  std::uint64_t model_hash = 0;
  std::vector<double> values;  // row-major, last axis fastest

  double mass = 0.0;           // total probability of the periodized density
  double cell_mass = 0.0;      // trapezoid integral over [-L, L)^d
  double ringing = 0.0;        // most negative value before clamping (as a magnitude)
  double heat_kernel_c = 0.0;  // max p / min(1, |x|^{-d-alpha}), used for out-of-range bounds
  int fold_levels = 0;

  std::size_t size() const { return values.size(); }
  double coordinate(int j) const { return (j - n / 2) * h; }
  Vec node(std::size_t flat) const;
  std::size_t flat_index(int i0, int i1, int i2 = 0) const;
  /// Nearest node index of the origin.
  std::size_t origin_index() const;
};

/// Defaults: d = 2 -> L = 40, h = 0.0390625 (2048 nodes per axis); d = 3 -> L = 20, h = 0.15625.
double default_extent(int d);
double default_spacing(int d);

/// p(1, .) on [-L, L)^d. Throws GridTooCoarse when exp(-Phi_min (pi/h)^alpha) >= 1e-12
/// or when L is smaller than 4 unit-time spread lengths (Phi_max t)^{1/alpha}.
TransitionDensityGrid unit_density_grid(const StableModel& model, double L, double h,
                                        const GridOptions& opts = {});

/// Independent inversion at time t (oracle for the scaling law).
TransitionDensityGrid density_grid_at_time(const StableModel& model, double t, double L, double h,
                                           const GridOptions& opts = {});

/// Multilinear interpolation of the stored samples at x; requires x inside
/// [-L, L - h]^d.
double interpolate(const TransitionDensityGrid& grid, const Vec& x);
bool in_grid(const TransitionDensityGrid& grid, const Vec& x);

struct DensityValue {
  double value = 0.0;
  bool is_bound = false;  // true: heat-kernel upper bound, not a value
};

/// p(t, x) = (t/t_ref)^{-d/alpha} p(t_ref, (t/t_ref)^{-1/alpha} x).
DensityValue density_at(const TransitionDensityGrid& grid, double t, const Vec& x);

struct HeatKernelBound {
  double c_est = 0.0;
  Vec worst_node;
};

/// C_est = max over nodes of p(1, x) / min(1, |x|^{-alpha-d}).
HeatKernelBound verify_heat_kernel_bound(const TransitionDensityGrid& grid);

/// Sum over nonzero integer vectors m of f_nu(m).
double levy_lattice_sum(const StableModel& model);

void save_grid(const TransitionDensityGrid& grid, const std::string& path);
/// Loads a cached grid; throws Io if the header does not match `model`, L or h.
TransitionDensityGrid load_grid(const std::string& path, const StableModel& model, double L, double h);

/// Radial slices along the coordinate axes: columns r, p(r e_1), ..., p(r e_d).
void write_radial_csv(const TransitionDensityGrid& grid, const std::string& path);

}  // namespace stable
