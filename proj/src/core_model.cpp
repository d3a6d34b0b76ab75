#include "stable/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "stable/numerics.hpp"

namespace stable {

using numerics::kPi;

double SphereQuadrature::total_weight() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

SphereQuadrature sphere_quadrature(int d, int n) {
  SphereQuadrature q;
  q.dim = d;
  if (d == 2) {
    if (n < 4 || n % 2 != 0)
      throw Error(ErrorKind::InvalidArgument, "circle rule needs an even number >= 4 of angles");
    q.n_azimuth = n;
    q.nodes.reserve(n);
    q.weights.assign(n, 2.0 * kPi / n);
    for (int k = 0; k < n; ++k) {
      const double t = 2.0 * kPi * k / n;
      q.nodes.push_back(make_vec({std::cos(t), std::sin(t)}));
    }
    // exact antipodes for the quarter turns
    for (int k = 0; k < n; ++k) {
      if (4 * k % n == 0) {
        const int quarter = 4 * k / n;
        const double c[4] = {1, 0, -1, 0}, s[4] = {0, 1, 0, -1};
        q.nodes[k] = make_vec({c[quarter], s[quarter]});
      }
    }
    return q;
  }
  if (d == 3) {
    if (n < 2) throw Error(ErrorKind::InvalidArgument, "sphere rule needs n >= 2");
    const auto gl = numerics::gauss_legendre(n);
    const int naz = 2 * n;
    q.n_polar = n;
    q.n_azimuth = naz;
    q.polar_cos = gl.nodes;
    for (int i = 0; i < n; ++i) {
      const double t = gl.nodes[i];
      const double s = std::sqrt(std::max(0.0, 1.0 - t * t));
      for (int j = 0; j < naz; ++j) {
        const double psi = 2.0 * kPi * j / naz;
        q.nodes.push_back(make_vec({s * std::cos(psi), s * std::sin(psi), t}));
        q.weights.push_back(gl.weights[i] * 2.0 * kPi / naz);
      }
    }
    return q;
  }
  throw Error(ErrorKind::DimensionNotImplemented, "sphere quadrature for d = " + std::to_string(d));
}

int default_quadrature_resolution(int d) { return d == 2 ? 512 : 64; }

// ---------------------------------------------------------------------------

SpectralMeasure SpectralMeasure::density(DensityFn f, double bound, std::string label) {
  if (!f) throw Error(ErrorKind::InvalidArgument, "empty density");
  if (!(bound > 0.0) || !std::isfinite(bound))
    throw Error(ErrorKind::InvalidArgument, "density bound m must be positive and finite");
  SpectralMeasure m;
  m.kind_ = Kind::Density;
  m.f_ = std::move(f);
  m.bound_ = bound;
  m.label_ = std::move(label);
  return m;
}

SpectralMeasure SpectralMeasure::atomic(std::vector<Atom> atoms, std::string label) {
  if (atoms.empty()) throw Error(ErrorKind::InvalidArgument, "atomic measure without atoms");
  SpectralMeasure m;
  m.kind_ = Kind::Atomic;
  m.atoms_ = std::move(atoms);
  if (label.empty()) {
    std::ostringstream os;
    os.precision(17);
    os << "atomic";
    for (const auto& a : m.atoms_) {
      os << " (";
      for (Eigen::Index i = 0; i < a.direction.size(); ++i) os << (i ? "," : "") << a.direction(i);
      os << ";" << a.weight << ")";
    }
    label = os.str();
  }
  m.label_ = std::move(label);
  for (const auto& a : m.atoms_) m.bound_ = std::max(m.bound_, a.weight);
  return m;
}

SpectralMeasure SpectralMeasure::isotropic(double value) {
  if (!(value > 0.0) || !std::isfinite(value))
    throw Error(ErrorKind::InvalidArgument, "isotropic density must be positive");
  SpectralMeasure m;
  m.kind_ = Kind::Isotropic;
  m.bound_ = value;
  char buf[64];
  std::snprintf(buf, sizeof buf, "isotropic %.17g", value);
  m.label_ = buf;
  return m;
}

double SpectralMeasure::density_at(const Vec& xi) const {
  switch (kind_) {
    case Kind::Density: return f_(xi);
    case Kind::Isotropic: return bound_;
    case Kind::Atomic: break;
  }
  throw Error(ErrorKind::NoDensity, "atomic spectral measure has no density on the sphere");
}

void SpectralMeasure::validate(const SphereQuadrature& quad) const {
  const int d = quad.dim;
  if (kind_ == Kind::Atomic) {
    double mass = 0.0;
    for (const auto& a : atoms_) {
      if (a.direction.size() != d)
        throw Error(ErrorKind::InvalidArgument, "atom direction has wrong dimension");
      if (std::abs(a.direction.norm() - 1.0) > 1e-12)
        throw Error(ErrorKind::InvalidArgument, "atom direction is not a unit vector");
      if (!(a.weight > 0.0) || !std::isfinite(a.weight))
        throw Error(ErrorKind::InvalidArgument, "atom weight must be positive");
      const bool mirrored = std::any_of(atoms_.begin(), atoms_.end(), [&](const Atom& b) {
        return (b.direction + a.direction).norm() < 1e-12 &&
               std::abs(b.weight - a.weight) <= 1e-12 * a.weight;
      });
      if (!mirrored)
        throw Error(ErrorKind::InvalidArgument, "atomic measure is not closed under xi -> -xi");
      mass += a.weight;
    }
    if (!(mass > 0.0) || !std::isfinite(mass))
      throw Error(ErrorKind::InvalidArgument, "atomic mass must be finite and positive");
    return;
  }
  if (kind_ == Kind::Isotropic) return;
  double mass = 0.0;
  for (std::size_t i = 0; i < quad.nodes.size(); ++i) {
    const Vec& xi = quad.nodes[i];
    const double v = f_(xi);
    const double w = f_(Vec(-xi));
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "density is not finite");
    if (v < -1e-14) throw Error(ErrorKind::InvalidArgument, "density is negative");
    if (v > bound_ * (1.0 + 1e-12))
      throw Error(ErrorKind::InvalidArgument, "density exceeds its declared bound m");
    if (std::abs(v - w) > 1e-12 * std::max(1.0, std::abs(v)))
      throw Error(ErrorKind::InvalidArgument, "density is not symmetric under xi -> -xi");
    mass += quad.weights[i] * v;
  }
  if (!(mass > 0.0)) throw Error(ErrorKind::InvalidArgument, "spectral measure has zero mass");
}

double SpectralMeasure::total_mass(const SphereQuadrature& quad) const {
  switch (kind_) {
    case Kind::Isotropic: return bound_ * numerics::sphere_area(quad.dim);
    case Kind::Atomic: {
      double s = 0.0;
      for (const auto& a : atoms_) s += a.weight;
      return s;
    }
    case Kind::Density: break;
  }
  double s = 0.0;
  for (std::size_t i = 0; i < quad.nodes.size(); ++i) s += quad.weights[i] * f_(quad.nodes[i]);
  return s;
}

Mat SpectralMeasure::second_moment(const SphereQuadrature& quad) const {
  const int d = quad.dim;
  Mat m = Mat::Zero(d, d);
  switch (kind_) {
    case Kind::Isotropic:
      m.diagonal().setConstant(bound_ * numerics::sphere_area(d) / d);
      return m;
    case Kind::Atomic:
      for (const auto& a : atoms_) m += a.weight * a.direction * a.direction.transpose();
      return m;
    case Kind::Density: break;
  }
  for (std::size_t i = 0; i < quad.nodes.size(); ++i) {
    const Vec& xi = quad.nodes[i];
    m += quad.weights[i] * f_(xi) * xi * xi.transpose();
  }
  return 0.5 * (m + m.transpose());
}

Ball::Ball(Vec c, double r) : center(std::move(c)), radius(r) {
  if (!(r > 0.0) || !std::isfinite(r)) throw Error(ErrorKind::InvalidArgument, "ball radius must be positive");
}

// ---------------------------------------------------------------------------

double aligned_sphere_integral(int d, double alpha, const std::function<double(const Vec&)>& f,
                               const Vec& e) {
  if (d == 2) {
    const double base = std::atan2(e(1), e(0));
    auto integrand = [&](double phi) {
      const double c = std::max(0.0, std::cos(phi));
      if (c == 0.0) return 0.0;
      const double a = base + phi;
      const Vec xi = make_vec({std::cos(a), std::sin(a)});
      return std::pow(c, alpha) * (f(xi) + f(Vec(-xi)));
    };
    return numerics::integrate_tanh_sinh(integrand, -0.5 * kPi, 0.5 * kPi);
  }
  if (d == 3) {
    // orthonormal frame (a, b, e)
    Vec helper = std::abs(e(0)) < 0.9 ? make_vec({1, 0, 0}) : make_vec({0, 1, 0});
    Vec a = helper - helper.dot(e) * e;
    a.normalize();
    const Eigen::Vector3d e3(e(0), e(1), e(2)), a3(a(0), a(1), a(2));
    const Eigen::Vector3d b3 = e3.cross(a3);
    constexpr int kAz = 64;
    auto ring = [&](double t) {
      const double s = std::sqrt(std::max(0.0, 1.0 - t * t));
      double acc = 0.0;
      for (int j = 0; j < kAz; ++j) {
        const double psi = 2.0 * kPi * (j + 0.5) / kAz;
        const Eigen::Vector3d x = t * e3 + s * (std::cos(psi) * a3 + std::sin(psi) * b3);
        acc += f(make_vec({x(0), x(1), x(2)}));
      }
      return acc * 2.0 * kPi / kAz;
    };
    auto integrand = [&](double t) {
      if (t <= 0.0) return 0.0;
      return std::pow(t, alpha) * (ring(t) + ring(-t));
    };
    return numerics::integrate_tanh_sinh(integrand, 0.0, 1.0);
  }
  throw Error(ErrorKind::DimensionNotImplemented, "aligned sphere integral for d = " + std::to_string(d));
}

namespace {

// Sign-canonical representative of +-e, so that Phi(-u) == Phi(u) bitwise.
Vec canonical_direction(const Vec& e) {
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    if (e(i) > 0.0) return e;
    if (e(i) < 0.0) return -e;
  }
  return e;
}

double directional_value(int d, double alpha, const SpectralMeasure& mu, const Vec& unit,
                         double isotropic_factor) {
  switch (mu.kind()) {
    case SpectralMeasure::Kind::Isotropic: return mu.bound() * isotropic_factor;
    case SpectralMeasure::Kind::Atomic: {
      double s = 0.0;
      for (const auto& a : mu.atoms()) s += a.weight * std::pow(std::abs(unit.dot(a.direction)), alpha);
      return s;
    }
    case SpectralMeasure::Kind::Density: break;
  }
  const Vec e = canonical_direction(unit);
  return aligned_sphere_integral(d, alpha, [&](const Vec& xi) { return mu.density_at(xi); }, e);
}

double isotropic_sphere_factor(int d, double alpha) {
  Vec e = Vec::Zero(d);
  e(0) = 1.0;
  return aligned_sphere_integral(d, alpha, [](const Vec&) { return 1.0; }, e);
}

}  // namespace

NondegeneracyCertificate check_nondegenerate(int d, double alpha, const SpectralMeasure& mu,
                                             const SphereQuadrature& quad) {
  if (quad.dim != d) throw Error(ErrorKind::InvalidArgument, "quadrature dimension mismatch");
  const double iso = mu.kind() == SpectralMeasure::Kind::Isotropic ? isotropic_sphere_factor(d, alpha) : 0.0;
  NondegeneracyCertificate cert;
  cert.min_value = std::numeric_limits<double>::infinity();
  cert.max_value = 0.0;
  // In d = 3 every evaluation is a 2D integral; a 16 x 32 direction sample is
  // dense enough for a relative threshold.
  const SphereQuadrature coarse = d == 3 && quad.n_polar > 16 ? sphere_quadrature(3, 16) : SphereQuadrature{};
  const auto& directions = coarse.nodes.empty() ? quad.nodes : coarse.nodes;
  for (const Vec& xi : directions) {
    const double v = directional_value(d, alpha, mu, xi, iso);
    if (v < cert.min_value) {
      cert.min_value = v;
      cert.arg_direction = xi;
    }
    cert.max_value = std::max(cert.max_value, v);
  }
  cert.accepted = cert.max_value > 0.0 && cert.min_value > kDegeneracyThreshold * cert.max_value;
  return cert;
}

double cosine_integral(double alpha) {
  if (!(alpha > 0.0 && alpha < 2.0))
    throw Error(ErrorKind::InvalidArgument, "alpha must lie in (0, 2)");
  // int_0^1 (1 - cos r) r^{-1-alpha} dr, termwise.
  double head = 0.0;
  double fact = 1.0;
  for (int k = 1; k <= 12; ++k) {
    fact *= (2.0 * k - 1.0) * (2.0 * k);
    const double term = 1.0 / (fact * (2.0 * k - alpha));
    head += (k % 2 == 1) ? term : -term;
  }
  // int_1^inf cos(r) r^{-1-alpha} dr: first piece up to pi/2, then half
  // periods between consecutive zeros of cos, partial sums averaged.
  const auto gl = numerics::gauss_legendre(32);
  auto piece = [&](double a, double b) {
    double s = 0.0;
    for (int i = 0; i < 32; ++i) {
      const double r = 0.5 * (a + b) + 0.5 * (b - a) * gl.nodes[i];
      s += gl.weights[i] * std::cos(r) * std::pow(r, -1.0 - alpha);
    }
    return 0.5 * (b - a) * s;
  };
  constexpr int kTerms = 48;
  std::vector<double> partial(kTerms);
  double acc = piece(1.0, 0.5 * kPi);
  for (int k = 0; k < kTerms; ++k) {
    acc += piece(0.5 * kPi + k * kPi, 0.5 * kPi + (k + 1) * kPi);
    partial[k] = acc;
  }
  for (int level = 0; level < kTerms - 1; ++level)
    for (int i = 0; i + 1 < kTerms - level; ++i) partial[i] = 0.5 * (partial[i] + partial[i + 1]);
  const double tail = 1.0 / alpha - partial[0];
  return head + tail;
}

double levy_normalization(double alpha) { return 1.0 / cosine_integral(alpha); }

// ---------------------------------------------------------------------------

StableModel::StableModel(int d, double alpha, SpectralMeasure mu, int quadrature_resolution)
    : d_(d), alpha_(alpha), mu_(std::move(mu)) {
  if (d != 2 && d != 3)
    throw Error(ErrorKind::DimensionNotImplemented, "only d = 2 and d = 3 are supported, got " + std::to_string(d));
  if (!(alpha > 0.0 && alpha < 2.0))
    throw Error(ErrorKind::InvalidArgument, "alpha must lie in the open interval (0, 2)");
  quad_ = sphere_quadrature(d, quadrature_resolution > 0 ? quadrature_resolution : default_quadrature_resolution(d));
  mu_.validate(quad_);
  cert_ = check_nondegenerate(d, alpha, mu_, quad_);
  if (!cert_.accepted) {
    std::ostringstream os;
    os << "min Phi on the unit sphere is " << cert_.min_value << " at direction (" << cert_.arg_direction.transpose()
       << ")";
    throw Error(ErrorKind::Degenerate, os.str());
  }
  levy_norm_ = levy_normalization(alpha);
  mass_ = mu_.total_mass(quad_);
  second_moment_ = mu_.second_moment(quad_);
  isotropic_factor_ = isotropic_sphere_factor(d, alpha);
}

double StableModel::directional_exponent(const Vec& unit) const {
  return directional_value(d_, alpha_, mu_, unit, isotropic_factor_);
}

std::string StableModel::description() const {
  std::ostringstream os;
  os.precision(17);
  os << "d=" << d_ << ";alpha=" << alpha_ << ";mu=" << mu_.label() << ";quadrature=" << quad_.nodes.size();
  return os.str();
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t StableModel::hash() const { return fnv1a(description()); }

double char_exponent(const StableModel& model, const Vec& u) {
  if (u.size() != model.dim()) throw Error(ErrorKind::InvalidArgument, "char_exponent: dimension mismatch");
  const double n = u.norm();
  if (n == 0.0) return 0.0;
  return std::pow(n, model.alpha()) * model.directional_exponent(u / n);
}

double levy_density(const StableModel& model, const Vec& x) {
  if (!model.measure().has_density())
    throw Error(ErrorKind::NoDensity, "atomic spectral measure: Levy measure has no Lebesgue density");
  const double n = x.norm();
  if (n == 0.0) throw Error(ErrorKind::Singularity, "Levy density is singular at the origin");
  return model.levy_norm() * model.measure().density_at(x / n) *
         std::pow(n, -static_cast<double>(model.dim()) - model.alpha());
}

// ---------------------------------------------------------------------------

SymbolTable::SymbolTable(const StableModel& model, int resolution)
    : model_(&model), kind_(model.measure().kind()), d_(model.dim()), alpha_(model.alpha()) {
  if (kind_ == SpectralMeasure::Kind::Isotropic) {
    Vec e = Vec::Zero(d_);
    e(0) = 1.0;
    iso_value_ = model.directional_exponent(e);
    return;
  }
  if (kind_ == SpectralMeasure::Kind::Atomic) return;
  if (d_ == 2) {
    n_theta_ = resolution;
    table_.resize(n_theta_);
    for (int i = 0; i < n_theta_; ++i) {
      const double t = kPi * i / n_theta_;
      table_[i] = model.directional_exponent(make_vec({std::cos(t), std::sin(t)}));
    }
  } else {
    n_theta_ = std::max(16, resolution / 128);
    n_psi_ = 2 * n_theta_;
    table_.resize(static_cast<std::size_t>(n_theta_ + 1) * n_psi_);
    for (int i = 0; i <= n_theta_; ++i) {
      const double th = kPi * i / n_theta_;
      for (int j = 0; j < n_psi_; ++j) {
        const double ps = 2.0 * kPi * j / n_psi_;
        table_[static_cast<std::size_t>(i) * n_psi_ + j] = model.directional_exponent(
            make_vec({std::sin(th) * std::cos(ps), std::sin(th) * std::sin(ps), std::cos(th)}));
      }
    }
  }
}

double SymbolTable::directional(const Vec& unit) const {
  if (d_ == 2) {
    double t = std::atan2(unit(1), unit(0));
    if (t < 0.0) t += kPi;
    const double pos = t / kPi * n_theta_;
    int i = static_cast<int>(std::floor(pos));
    const double s = pos - i;
    double w[4];
    numerics::lagrange4(s, w);
    double v = 0.0;
    for (int k = 0; k < 4; ++k) {
      int idx = (i - 1 + k) % n_theta_;
      if (idx < 0) idx += n_theta_;
      v += w[k] * table_[idx];
    }
    return v;
  }
  const double th = std::acos(std::clamp(unit(2), -1.0, 1.0));
  double ps = std::atan2(unit(1), unit(0));
  if (ps < 0.0) ps += 2.0 * kPi;
  const double pi_ = th / kPi * n_theta_, pj = ps / (2.0 * kPi) * n_psi_;
  const int i0 = std::min(static_cast<int>(std::floor(pi_)), n_theta_ - 1);
  const int j0 = static_cast<int>(std::floor(pj));
  double wi[4], wj[4];
  numerics::lagrange4(pi_ - i0, wi);
  numerics::lagrange4(pj - j0, wj);
  auto at = [&](int i, int j) {
    if (i < 0) {
      i = -i;
      j += n_psi_ / 2;
    } else if (i > n_theta_) {
      i = 2 * n_theta_ - i;
      j += n_psi_ / 2;
    }
    j %= n_psi_;
    if (j < 0) j += n_psi_;
    return table_[static_cast<std::size_t>(i) * n_psi_ + j];
  };
  double v = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) v += wi[a] * wj[b] * at(i0 - 1 + a, j0 - 1 + b);
  return v;
}

double SymbolTable::operator()(const Vec& u) const {
  const double n = u.norm();
  if (n == 0.0) return 0.0;
  switch (kind_) {
    case SpectralMeasure::Kind::Isotropic: return iso_value_ * std::pow(n, alpha_);
    case SpectralMeasure::Kind::Atomic: {
      double s = 0.0;
      for (const auto& a : model_->measure().atoms()) s += a.weight * std::pow(std::abs(u.dot(a.direction)), alpha_);
      return s;
    }
    case SpectralMeasure::Kind::Density: break;
  }
  return std::pow(n, alpha_) * directional(u / n);
}

double SymbolTable::operator()(double u1, double u2) const {
  const double n2 = u1 * u1 + u2 * u2;
  if (n2 == 0.0) return 0.0;
  switch (kind_) {
    case SpectralMeasure::Kind::Isotropic: return iso_value_ * std::pow(n2, 0.5 * alpha_);
    case SpectralMeasure::Kind::Atomic: {
      double s = 0.0;
      for (const auto& a : model_->measure().atoms())
        s += a.weight * std::pow(std::abs(u1 * a.direction(0) + u2 * a.direction(1)), alpha_);
      return s;
    }
    case SpectralMeasure::Kind::Density: break;
  }
  const double n = std::sqrt(n2);
  double t = std::atan2(u2, u1);
  if (t < 0.0) t += kPi;
  const double pos = t / kPi * n_theta_;
  int i = static_cast<int>(std::floor(pos));
  double w[4];
  numerics::lagrange4(pos - i, w);
  double v = 0.0;
  for (int k = 0; k < 4; ++k) {
    int idx = (i - 1 + k) % n_theta_;
    if (idx < 0) idx += n_theta_;
    v += w[k] * table_[idx];
  }
  return std::pow(n, alpha_) * v;
}

}  // namespace stable
