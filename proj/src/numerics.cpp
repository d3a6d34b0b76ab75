#include "stable/numerics.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "stable/error.hpp"

namespace stable {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::DimensionNotImplemented: return "dimension not implemented";
    case ErrorKind::Singularity: return "singularity";
    case ErrorKind::NoDensity: return "no density";
    case ErrorKind::Degenerate: return "degenerate spectral measure";
    case ErrorKind::GridTooCoarse: return "grid too coarse / too small";
    case ErrorKind::QuadratureFailure: return "quadrature did not converge";
    case ErrorKind::BudgetExhausted: return "budget exhausted";
    case ErrorKind::Precondition: return "precondition failed";
    case ErrorKind::Io: return "i/o failure";
    case ErrorKind::Config: return "invalid configuration";
  }
  return "error";
}

namespace numerics {

GaussRule gauss_legendre(int n) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "gauss_legendre needs n >= 1");
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = (n == 1) ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

double integrate_composite(const std::function<double(double)>& f, double a, double b,
                           int panels, int order) {
  const GaussRule rule = gauss_legendre(order);
  const double width = (b - a) / panels;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * width;
    double part = 0.0;
    for (int i = 0; i < order; ++i) part += rule.weights[i] * f(mid + 0.5 * width * rule.nodes[i]);
    sum += 0.5 * width * part;
  }
  return sum;
}

double integrate_tanh_sinh(const std::function<double(double)>& f, double a, double b,
                           double tol) {
  thread_local boost::math::quadrature::tanh_sinh<double> integrator(12);
  return integrator.integrate(f, a, b, tol);
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw Error(ErrorKind::InvalidArgument, "fit_line needs >= 2 points");
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw Error(ErrorKind::InvalidArgument, "fit_line with constant abscissa");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    rss += r * r;
  }
  fit.rms_residual = std::sqrt(rss / n);
  return fit;
}

double sphere_area(int d) {
  return 2.0 * std::pow(kPi, 0.5 * d) / boost::math::tgamma(0.5 * d);
}

double ball_volume(int d) { return sphere_area(d) / d; }

}  // namespace numerics
}  // namespace stable
