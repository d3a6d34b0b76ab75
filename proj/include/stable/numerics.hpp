#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace stable::numerics {

inline constexpr double kPi = 3.14159265358979323846;

struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule on [-1, 1] (Newton iteration on P_n).
GaussRule gauss_legendre(int n);

/// Composite Gauss-Legendre over [a, b] with `panels` equal panels.
double integrate_composite(const std::function<double(double)>& f, double a, double b,
                           int panels, int order = 8);

/// Double-exponential quadrature; robust to algebraic endpoint singularities.
double integrate_tanh_sinh(const std::function<double(double)>& f, double a, double b,
                           double tol = 1e-13);

/// Weights of the four-point Lagrange interpolant through nodes -1, 0, 1, 2
/// evaluated at fractional offset s in [0, 1).
inline void lagrange4(double s, double w[4]) {
  const double sm1 = s - 1.0, sm2 = s - 2.0, sp1 = s + 1.0;
  w[0] = -s * sm1 * sm2 / 6.0;
  w[1] = sp1 * sm1 * sm2 / 2.0;
  w[2] = -sp1 * s * sm2 / 2.0;
  w[3] = sp1 * s * sm1 / 6.0;
}

/// Least-squares line y = intercept + slope * x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms_residual = 0.0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Surface area of the unit sphere in R^d.
double sphere_area(int d);

/// Volume of the unit ball in R^d.
double ball_volume(int d);

}  // namespace stable::numerics
