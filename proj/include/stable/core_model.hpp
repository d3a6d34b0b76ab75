#pragma once

// Symmetric alpha-stable processes in R^d (d = 2, 3) described by a spectral
// measure on the unit sphere: characteristic exponent, Levy density and the
// sphere quadrature everything else is built on.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stable/error.hpp"

namespace stable {

inline constexpr int kMaxDim = 3;

/// Point or direction in R^d, d <= 3, stored inline.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

inline Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

/// Nodes and weights on S^{d-1}. For d = 2 the nodes are equally spaced
/// angles; for d = 3 a Gauss-Legendre (in cos of the polar angle) times
/// trapezoid (azimuth) product rule. Weights sum to |S^{d-1}|.
struct SphereQuadrature {
  int dim = 0;
  std::vector<Vec> nodes;
  std::vector<double> weights;
  // Product structure, kept for interpolation over directions.
  int n_polar = 0;              // d = 3 only
  int n_azimuth = 0;            // number of angles (d = 2) or azimuth nodes (d = 3)
  std::vector<double> polar_cos;  // d = 3, ascending

  double total_weight() const;
};

/// Equal-angle (d = 2) or Gauss x trapezoid (d = 3) rule. For d = 3, `n` is
/// the number of polar nodes and the azimuth gets 2n nodes.
SphereQuadrature sphere_quadrature(int d, int n);

/// Finite symmetric measure mu on S^{d-1}.
///
/// Density and isotropic variants are absolutely continuous with respect to
/// the surface measure. The atomic variant has no Lebesgue density and is
/// meant for cross-checking only.
class SpectralMeasure {
 public:
  enum class Kind { Density, Atomic, Isotropic };
  using DensityFn = std::function<double(const Vec&)>;

  struct Atom {
    Vec direction;
    double weight = 0.0;
  };

  static SpectralMeasure density(DensityFn f, double bound, std::string label);
  static SpectralMeasure atomic(std::vector<Atom> atoms, std::string label = {});
  static SpectralMeasure isotropic(double value);

  Kind kind() const { return kind_; }
  bool has_density() const { return kind_ != Kind::Atomic; }
  bool oracle_only() const { return kind_ == Kind::Atomic; }

  /// f_mu(xi) for |xi| = 1. Throws NoDensity for the atomic variant.
  double density_at(const Vec& xi) const;
  /// Declared upper bound m of the density.
  double bound() const { return bound_; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::string& label() const { return label_; }

  /// Checks symmetry, 0 <= f <= m on the quadrature nodes, finite positive
  /// mass. Throws InvalidArgument on violation.
  void validate(const SphereQuadrature& quad) const;

  /// mu(S^{d-1}).
  double total_mass(const SphereQuadrature& quad) const;
  /// Integral of xi xi^T against mu.
  Mat second_moment(const SphereQuadrature& quad) const;

 private:
  Kind kind_ = Kind::Isotropic;
  DensityFn f_;
  double bound_ = 0.0;
  std::vector<Atom> atoms_;
  std::string label_;
};

struct Ball {
  Vec center;
  double radius = 0.0;

  Ball() = default;
  Ball(Vec c, double r);

  int dim() const { return static_cast<int>(center.size()); }
  /// Closed-ball membership |x - center| <= radius.
  bool contains(const Vec& x) const { return (x - center).norm() <= radius; }
  bool interior(const Vec& x) const { return (x - center).norm() < radius; }
};

struct NondegeneracyCertificate {
  double min_value = 0.0;
  double max_value = 0.0;
  Vec arg_direction;
  bool accepted = false;
};

/// Relative threshold below which min Phi on the sphere counts as zero.
inline constexpr double kDegeneracyThreshold = 1e-10;

/// min / max of Phi over the directions of `quad` (a dense sample of the
/// unit sphere). Accepted iff min > kDegeneracyThreshold * max.
NondegeneracyCertificate check_nondegenerate(int d, double alpha, const SpectralMeasure& mu,
                                             const SphereQuadrature& quad);

/// I(alpha) = int_0^inf (1 - cos r) r^{-1-alpha} dr, by series on [0,1] and
/// accelerated half-period summation of the oscillatory tail.
double cosine_integral(double alpha);

/// c(alpha) = 1 / I(alpha), the factor in f_nu = c f_mu(x/|x|) |x|^{-d-alpha}.
double levy_normalization(double alpha);

/// int_{S^{d-1}} |e.xi|^alpha f(xi) dsigma(xi) for a unit vector e, by a rule
/// aligned with e so that the kink of |e.xi|^alpha sits on the panel ends.
double aligned_sphere_integral(int d, double alpha, const std::function<double(const Vec&)>& f,
                               const Vec& e);

/// Default quadrature resolution: 512 angles (d = 2), 64 x 128 (d = 3).
int default_quadrature_resolution(int d);

/// (d, alpha, mu) plus derived normalizations. Immutable after construction.
class StableModel {
 public:
  StableModel(int d, double alpha, SpectralMeasure mu, int quadrature_resolution = 0);

  int dim() const { return d_; }
  double alpha() const { return alpha_; }
  const SpectralMeasure& measure() const { return mu_; }
  const SphereQuadrature& quadrature() const { return quad_; }
  double levy_norm() const { return levy_norm_; }
  double total_mass() const { return mass_; }
  const Mat& second_moment() const { return second_moment_; }
  const NondegeneracyCertificate& certificate() const { return cert_; }
  double phi_min() const { return cert_.min_value; }
  double phi_max() const { return cert_.max_value; }

  /// Phi restricted to the unit sphere.
  double directional_exponent(const Vec& unit) const;

  /// Canonical text description; stable across runs.
  std::string description() const;
  std::uint64_t hash() const;

 private:
  int d_;
  double alpha_;
  SpectralMeasure mu_;
  SphereQuadrature quad_;
  double levy_norm_ = 0.0;
  double mass_ = 0.0;
  double isotropic_factor_ = 0.0;  // int |e.xi|^alpha dsigma
  Mat second_moment_;
  NondegeneracyCertificate cert_;
};

/// Phi(u) = int |u.xi|^alpha mu(dxi).
double char_exponent(const StableModel& model, const Vec& u);

/// f_nu(x) = c(alpha) f_mu(x/|x|) |x|^{-d-alpha}. Throws Singularity at x = 0
/// and NoDensity for atomic measures.
double levy_density(const StableModel& model, const Vec& x);

/// Fast evaluation of Phi for bulk use (spectral grids): the directional
/// factor is tabulated and interpolated for density measures, exact otherwise.
class SymbolTable {
 public:
  explicit SymbolTable(const StableModel& model, int resolution = 4096);
  double operator()(const Vec& u) const;
  double operator()(double u1, double u2) const;

 private:
  double directional(const Vec& unit) const;

  const StableModel* model_;
  SpectralMeasure::Kind kind_;
  int d_;
  double alpha_;
  double iso_value_ = 0.0;
  int n_theta_ = 0;
  int n_psi_ = 0;
  std::vector<double> table_;
};

std::uint64_t fnv1a(const std::string& text);

}  // namespace stable
