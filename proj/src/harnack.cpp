#include "stable/harnack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "stable/numerics.hpp"
#include "stable/parallel.hpp"

namespace stable {

using numerics::kPi;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string vec_text(const Vec& v) {
  std::ostringstream os;
  os.precision(6);
  os << "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? "," : "") << v(i);
  os << ")";
  return os.str();
}

Vec zero_vec(int d) { return Vec::Zero(d); }

// Points strictly inside the ball of radius `radius` around 0.
std::vector<Vec> interior_lattice(int d, double radius, double spacing) {
  std::vector<Vec> out;
  for (const Vec& v : ball_lattice(Ball(zero_vec(d), radius), spacing))
    if (v.norm() < radius * (1.0 - 1e-9)) out.push_back(v);
  return out;
}

// Well spread unit vectors: equal angles (d = 2) or a Fibonacci sphere (d = 3).
std::vector<Vec> spread_directions(int d, int count) {
  std::vector<Vec> out;
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < count; ++k) {
    if (d == 2) {
      const double t = 2.0 * kPi * (k + 0.5) / count;
      out.push_back(make_vec({std::cos(t), std::sin(t)}));
    } else {
      const double z = 1.0 - 2.0 * (k + 0.5) / count;
      const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
      out.push_back(make_vec({s * std::cos(golden * k), s * std::sin(golden * k), z}));
    }
  }
  return out;
}

Vec random_unit(int d, Rng& rng) {
  Vec e(d);
  do {
    for (int i = 0; i < d; ++i) e(i) = standard_normal(rng);
  } while (e.norm() < 1e-12);
  return e / e.norm();
}

double uniform_in(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

struct TailQuadrature {
  std::vector<Vec> points;  // offsets from x0
  std::vector<double> weights;  // includes g^-, the partition of unity and the volume element
};

// Polar Gauss rule around each negative bump, restricted to |y - x0| > r.
TailQuadrature build_tail_quadrature(const ExteriorFunction& g, const HarnackParams& p, int n_radial, int n_angular) {
  const int d = static_cast<int>(p.x0.size());
  std::vector<const ExteriorTerm*> negative;
  for (const ExteriorTerm& t : g.terms())
    if (t.kind == ExteriorTerm::Kind::Bump && t.amplitude < 0.0) negative.push_back(&t);
  TailQuadrature q;
  if (negative.empty()) return q;

  std::vector<Vec> dirs;
  std::vector<double> dir_w;
  if (d == 2) {
    for (int k = 0; k < n_angular; ++k) {
      const double t = 2.0 * kPi * (k + 0.5) / n_angular;
      dirs.push_back(make_vec({std::cos(t), std::sin(t)}));
      dir_w.push_back(2.0 * kPi / n_angular);
    }
  } else {
    const SphereQuadrature sq = sphere_quadrature(3, std::max(4, n_angular / 4));
    dirs = sq.nodes;
    dir_w = sq.weights;
  }
  const numerics::GaussRule gl = numerics::gauss_legendre(n_radial);

  std::vector<Vec> centers;
  for (const ExteriorTerm* t : negative) centers.push_back(Vec(t->center - p.x0));
  for (std::size_t b = 0; b < negative.size(); ++b) {
    const double w = negative[b]->width;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      const double rho = 0.5 * w * (gl.nodes[i] + 1.0);
      const double radial_w = 0.5 * w * gl.weights[i] * std::pow(rho, d - 1);
      for (std::size_t k = 0; k < dirs.size(); ++k) {
        const Vec y = centers[b] + rho * dirs[k];
        if (y.norm() <= p.r) continue;
        const double neg = std::max(0.0, -g.at_offset(p.x0, y));
        if (neg == 0.0) continue;
        int cover = 0;
        for (std::size_t c = 0; c < negative.size(); ++c)
          if ((y - centers[c]).norm() < negative[c]->width) ++cover;
        q.points.push_back(y);
        q.weights.push_back(neg * radial_w * dir_w[k] / std::max(cover, 1));
      }
    }
  }
  return q;
}

double tail_at(const StableModel& model, const TailQuadrature& q, const Vec& z) {
  double s = 0.0;
  for (std::size_t i = 0; i < q.points.size(); ++i) s += q.weights[i] * levy_density(model, Vec(q.points[i] - z));
  return s;
}

struct TailResult {
  double value = 0.0;
  double tol = 0.0;
  Vec argmax;
  int n_points = 0;
};

TailResult tail_term(const StableModel& model, const ExteriorFunction& g, const HarnackParams& p) {
  const int d = static_cast<int>(p.x0.size());
  TailResult res;
  const std::vector<Vec> zs = ball_lattice_min(Ball(zero_vec(d), p.r / p.sigma_ratio), 200);
  res.n_points = static_cast<int>(zs.size());
  res.argmax = zero_vec(d);
  if (!g.has_negative_part()) return res;
  const int n_radial = d == 2 ? 24 : 16;
  const int n_angular = d == 2 ? 96 : 64;
  const TailQuadrature fine = build_tail_quadrature(g, p, n_radial, n_angular);
  if (fine.points.empty()) return res;
  std::vector<double> vals(zs.size());
  parallel_for(zs.size(), [&](std::size_t i) { vals[i] = tail_at(model, fine, zs[i]); });
  const std::size_t best = std::max_element(vals.begin(), vals.end()) - vals.begin();
  res.value = vals[best];
  res.argmax = zs[best];
  const TailQuadrature coarse = build_tail_quadrature(g, p, n_radial / 2, n_angular / 2);
  res.tol = std::abs(res.value - tail_at(model, coarse, zs[best]));
  return res;
}

void check_centered(const Ball& ball, const HarnackParams& p, const char* what) {
  if ((ball.center - p.x0).norm() > 1e-12 * (1.0 + p.x0.norm()) || std::abs(ball.radius - p.r) > 1e-12 * p.r)
    throw Error(ErrorKind::Precondition, std::string(what) + ": field ball must be B_r(x0)");
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / v.size();
}

}  // namespace

void HarnackParams::validate() const {
  std::ostringstream os;
  if (!(r > 0.0) || !(r <= r0)) os << "need 0 < r <= r0; ";
  if (!(theta > lambda && lambda > 1.0)) os << "need theta > lambda > 1; ";
  if (!(2.0 * theta > sigma_ratio && sigma_ratio > 1.0)) os << "need 2 theta > sigma > 1; ";
  if (!(1.0 / lambda < a && a < 1.0)) os << "need 1/lambda < a < 1; ";
  if (x0.size() < 2 || x0.size() > 3) os << "x0 must have 2 or 3 coordinates; ";
  const std::string msg = os.str();
  if (!msg.empty()) throw Error(ErrorKind::InvalidArgument, "HarnackParams: " + msg.substr(0, msg.size() - 2));
}

double ExteriorTerm::at(const Vec& rel) const {
  switch (kind) {
    case Kind::Constant:
      return amplitude;
    case Kind::Shell: {
      const double n = rel.norm();
      return (n >= inner && n <= outer) ? amplitude : 0.0;
    }
    case Kind::Bump: {
      const double q = 1.0 - rel.squaredNorm() / (width * width);
      return q > 0.0 ? amplitude * q * q : 0.0;
    }
    case Kind::Linear:
      return offset + amplitude * scale * std::tanh(slope.dot(rel) / scale);
  }
  return 0.0;
}

double ExteriorTerm::lower() const {
  switch (kind) {
    case Kind::Constant:
      return amplitude;
    case Kind::Linear:
      return offset - std::abs(amplitude) * scale;
    default:
      return std::min(0.0, amplitude);
  }
}

double ExteriorTerm::upper() const {
  switch (kind) {
    case Kind::Constant:
      return amplitude;
    case Kind::Linear:
      return offset + std::abs(amplitude) * scale;
    default:
      return std::max(0.0, amplitude);
  }
}

ExteriorFunction::ExteriorFunction(std::vector<ExteriorTerm> terms) : terms_(std::move(terms)) {
  for (const ExteriorTerm& t : terms_) {
    if (!std::isfinite(t.amplitude)) throw Error(ErrorKind::InvalidArgument, "exterior term with non-finite amplitude");
    switch (t.kind) {
      case ExteriorTerm::Kind::Constant:
        if (t.amplitude < 0.0) throw Error(ErrorKind::InvalidArgument, "constant exterior data must be nonnegative");
        break;
      case ExteriorTerm::Kind::Shell:
        if (t.amplitude < 0.0 || !(t.inner >= 0.0 && t.outer > t.inner))
          throw Error(ErrorKind::InvalidArgument, "shell needs amplitude >= 0 and 0 <= inner < outer");
        break;
      case ExteriorTerm::Kind::Bump:
        if (!(t.width > 0.0)) throw Error(ErrorKind::InvalidArgument, "bump needs a positive width");
        break;
      case ExteriorTerm::Kind::Linear:
        if (!(t.scale > 0.0) || std::abs(t.slope.norm() - 1.0) > 1e-12 || t.offset < std::abs(t.amplitude) * t.scale)
          throw Error(ErrorKind::InvalidArgument, "linear term needs a unit slope, scale > 0 and offset >= |A| R");
        break;
    }
  }
}

ExteriorFunction ExteriorFunction::constant(int d, double value) {
  ExteriorTerm t;
  t.kind = ExteriorTerm::Kind::Constant;
  t.amplitude = value;
  t.center = Vec::Zero(d);
  t.family = "constant";
  return ExteriorFunction({t});
}

double ExteriorFunction::operator()(const Vec& y) const {
  double s = 0.0;
  for (const ExteriorTerm& t : terms_) s += t.kind == ExteriorTerm::Kind::Constant ? t.amplitude : t.at(Vec(y - t.center));
  return s;
}

double ExteriorFunction::at_offset(const Vec& origin, const Vec& offset) const {
  double s = 0.0;
  for (const ExteriorTerm& t : terms_)
    s += t.kind == ExteriorTerm::Kind::Constant ? t.amplitude : t.at(Vec((origin - t.center) + offset));
  return s;
}

double ExteriorFunction::lower_bound() const {
  double s = 0.0;
  for (const ExteriorTerm& t : terms_) s += t.lower();
  return s;
}

double ExteriorFunction::upper_bound() const {
  double s = 0.0;
  for (const ExteriorTerm& t : terms_) s += t.upper();
  return s;
}

bool ExteriorFunction::has_negative_part() const {
  for (const ExteriorTerm& t : terms_)
    if (t.kind == ExteriorTerm::Kind::Bump && t.amplitude < 0.0) return true;
  return false;
}

ExteriorFunction ExteriorFunction::scaled(double s) const {
  if (!(s > 0.0)) throw Error(ErrorKind::InvalidArgument, "scale factor must be positive");
  std::vector<ExteriorTerm> out = terms_;
  for (ExteriorTerm& t : out) {
    t.amplitude *= s;
    t.offset *= s;
  }
  return ExteriorFunction(out);
}

ExteriorFunction ExteriorFunction::translated(const Vec& shift) const {
  std::vector<ExteriorTerm> out = terms_;
  for (ExteriorTerm& t : out) t.center = t.center + shift;
  return ExteriorFunction(out);
}

ExteriorFunction ExteriorFunction::plus(const ExteriorFunction& other) const {
  std::vector<ExteriorTerm> out = terms_;
  out.insert(out.end(), other.terms_.begin(), other.terms_.end());
  return ExteriorFunction(out);
}

std::string ExteriorFunction::describe() const {
  std::ostringstream os;
  os.precision(6);
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    const ExteriorTerm& t = terms_[i];
    if (i) os << " + ";
    switch (t.kind) {
      case ExteriorTerm::Kind::Constant:
        os << "const(" << t.amplitude << ")";
        break;
      case ExteriorTerm::Kind::Shell:
        os << "shell(A=" << t.amplitude << ",c=" << vec_text(t.center) << ",R=[" << t.inner << "," << t.outer << "])";
        break;
      case ExteriorTerm::Kind::Bump:
        os << (t.family.empty() ? "bump" : t.family) << "(A=" << t.amplitude << ",c=" << vec_text(t.center)
           << ",w=" << t.width << ")";
        break;
      case ExteriorTerm::Kind::Linear:
        os << "linear(A=" << t.amplitude << ",c=" << vec_text(t.center) << ",e=" << vec_text(t.slope)
           << ",R=" << t.scale << ",b=" << t.offset << ")";
        break;
    }
  }
  return os.str();
}

double HarmonicField::max_std_err() const {
  return std_err.empty() ? 0.0 : *std::max_element(std_err.begin(), std_err.end());
}

ExitFunctional::ExitFunctional(const StableModel& model, const ExitBank& bank) : model_(&model), bank_(&bank) {
  if (bank.paths() < 2) throw Error(ErrorKind::BudgetExhausted, "exit bank holds fewer than two paths");
  conditional_ = model.measure().has_density();
  if (!conditional_) return;
  const int d = model.dim();
  alpha_ = model.alpha();
  alpha_is_one_ = alpha_ == 1.0;
  const double c = model.levy_norm() / alpha_;
  const int n_2d[3] = {64, 256, 1024};
  const int n_3d[3] = {8, 16, 32};
  for (int level = 0; level < 3; ++level) {
    RayRule& rule = ray_rules_[level];
    if (d == 2) {
      const int n = n_2d[level];
      for (int k = 0; k < n; ++k) {
        const double t = 2.0 * kPi * (k + 0.5) / n;
        rule.dirs.push_back(make_vec({std::cos(t), std::sin(t)}));
        rule.weight.push_back(c * model.measure().density_at(rule.dirs.back()) * 2.0 * kPi / n);
      }
    } else {
      const SphereQuadrature q = sphere_quadrature(3, n_3d[level]);
      rule.dirs = q.nodes;
      for (std::size_t i = 0; i < q.nodes.size(); ++i)
        rule.weight.push_back(c * model.measure().density_at(q.nodes[i]) * q.weights[i]);
    }
  }

  const int radial[3] = {4, 8, 16};
  const int angular_2d[3] = {8, 16, 48};
  const int polar_3d[3] = {3, 5, 8};
  for (int level = 0; level < 3; ++level) {
    PolarRule& rule = bump_rules_[level];
    const numerics::GaussRule gl = numerics::gauss_legendre(radial[level]);
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      const double s = 0.5 * (gl.nodes[i] + 1.0);
      rule.radius.push_back(s);
      rule.radial_weight.push_back(0.5 * gl.weights[i] * std::pow(s, d - 1));
    }
    if (d == 2) {
      for (int k = 0; k < angular_2d[level]; ++k) {
        const double t = 2.0 * kPi * (k + 0.5) / angular_2d[level];
        rule.dirs.push_back(make_vec({std::cos(t), std::sin(t)}));
        rule.dir_weight.push_back(2.0 * kPi / angular_2d[level]);
      }
    } else {
      const SphereQuadrature q = sphere_quadrature(3, polar_3d[level]);
      rule.dirs = q.nodes;
      rule.dir_weight = q.weights;
    }
  }

  const double r = bank.ball.radius, eps = bank.eps_cut;
  exit_mass_.resize(bank.starts.size());
  parallel_for(bank.starts.size(), [&](std::size_t s) {
    exit_mass_[s].assign(bank.paths(), 0.0);
    for (std::size_t p = 0; p < bank.paths(); ++p) {
      if (!bank.by_jump[s][p]) continue;
      const Vec& w = bank.pre_exits[s][p];
      const double ww = w.squaredNorm();
      const RayRule& rule = ray_rule((r - std::sqrt(ww)) / r);
      double m = 0.0;
      for (std::size_t i = 0; i < rule.dirs.size(); ++i) {
        const double b = w.dot(rule.dirs[i]);
        const double rho = -b + std::sqrt(std::max(0.0, b * b - ww + r * r));
        m += rule.weight[i] * neg_pow(std::max(eps, rho));
      }
      exit_mass_[s][p] = m;
    }
  });
}

const ExitFunctional::RayRule& ExitFunctional::ray_rule(double gap_ratio) const {
  return ray_rules_[gap_ratio > 0.3 ? 0 : (gap_ratio > 0.08 ? 1 : 2)];
}

double ExitFunctional::bump_integral(const ExteriorTerm& t, const Vec& rel_center, const Vec& w) const {
  const double dist = (rel_center - w).norm();
  const double q = dist > 0.0 ? t.width / dist : kInf;
  const PolarRule& rule = bump_rules_[q < 0.25 ? 0 : (q < 0.6 ? 1 : 2)];
  const double r = bank_->ball.radius, eps = bank_->eps_cut;
  const int d = model_->dim();
  const double vol = std::pow(t.width, d);
  double s = 0.0;
  for (std::size_t i = 0; i < rule.radius.size(); ++i) {
    const double rho = rule.radius[i] * t.width;
    const double shape = 1.0 - rule.radius[i] * rule.radius[i];
    const double radial = rule.radial_weight[i] * shape * shape;
    for (std::size_t k = 0; k < rule.dirs.size(); ++k) {
      const Vec y = rel_center + rho * rule.dirs[k];
      const Vec jump = y - w;
      if (y.norm() <= r || jump.norm() <= eps) continue;
      s += radial * rule.dir_weight[k] * levy_density(*model_, jump);
    }
  }
  return t.amplitude * vol * s;
}

double ExitFunctional::shell_integral(const ExteriorTerm& t, const Vec& rel_center, const Vec& w) const {
  const double eps = bank_->eps_cut;
  const Vec v = w - rel_center;
  const double vv = v.squaredNorm();
  const RayRule& rule = ray_rule((t.inner - std::sqrt(vv)) / t.inner);
  double s = 0.0;
  for (std::size_t i = 0; i < rule.dirs.size(); ++i) {
    const double b = v.dot(rule.dirs[i]);
    const double rho1 = -b + std::sqrt(b * b - vv + t.inner * t.inner);
    const double rho2 = -b + std::sqrt(b * b - vv + t.outer * t.outer);
    s += rule.weight[i] * (neg_pow(std::max(eps, rho1)) - neg_pow(std::max(eps, rho2)));
  }
  return t.amplitude * s;
}

std::vector<double> ExitFunctional::samples(const ExteriorFunction& g, std::size_t s) const {
  const ExitBank& bank = *bank_;
  const Vec& center = bank.ball.center;
  const double r = bank.ball.radius;
  std::vector<const ExteriorTerm*> direct, conditional;
  std::vector<Vec> rel;
  for (const ExteriorTerm& t : g.terms()) {
    bool cond = false;
    if (conditional_ && t.kind == ExteriorTerm::Kind::Bump) cond = true;
    if (conditional_ && t.kind == ExteriorTerm::Kind::Shell && (t.center - center).norm() + r <= t.inner) cond = true;
    if (cond) {
      conditional.push_back(&t);
      rel.push_back(Vec(t.center - center));
    } else {
      direct.push_back(&t);
    }
  }
  std::vector<double> out(bank.paths());
  for (std::size_t p = 0; p < out.size(); ++p) {
    const Vec& y = bank.exits[s][p];
    double v = 0.0;
    for (const ExteriorTerm* t : direct)
      v += t->kind == ExteriorTerm::Kind::Constant ? t->amplitude : t->at(Vec((center - t->center) + y));
    if (conditional.empty()) {
      out[p] = v;
      continue;
    }
    if (!bank.by_jump[s][p]) {
      for (const ExteriorTerm* t : conditional) v += t->at(Vec((center - t->center) + y));
    } else {
      const Vec& w = bank.pre_exits[s][p];
      double num = 0.0;
      for (std::size_t k = 0; k < conditional.size(); ++k)
        num += conditional[k]->kind == ExteriorTerm::Kind::Bump ? bump_integral(*conditional[k], rel[k], w)
                                                                 : shell_integral(*conditional[k], rel[k], w);
      v += num / exit_mass_[s][p];
    }
    out[p] = v;
  }
  return out;
}

HarmonicField ExitFunctional::extend(const ExteriorFunction& g) const {
  const ExitBank& bank = *bank_;
  const std::size_t n = bank.paths();
  HarmonicField f;
  f.ball = bank.ball;
  f.offsets = bank.starts;
  f.value.resize(bank.starts.size());
  f.std_err.resize(bank.starts.size());
  f.n_paths = static_cast<long>(n);
  parallel_for(bank.starts.size(), [&](std::size_t s) {
    double sum = 0.0, sq = 0.0;
    for (double v : samples(g, s)) {
      sum += v;
      sq += v * v;
    }
    const double mean = sum / n;
    f.value[s] = mean;
    f.std_err[s] = std::sqrt(std::max(0.0, (sq - n * mean * mean) / (n - 1)) / n);
  });
  return f;
}

HarmonicField harmonic_extend(const StableModel& model, const ExitBank& bank, const ExteriorFunction& g) {
  return ExitFunctional(model, bank).extend(g);
}

HarmonicField harmonic_extend(const StableModel& model, const ExteriorFunction& g, const Ball& ball,
                              const std::vector<Vec>& offsets, int n_paths, std::uint64_t seed, SeedMode mode,
                              double eps_fraction) {
  const IncrementScheme scheme = build_scheme(model, eps_fraction * ball.radius);
  ExitBank bank = make_exit_bank(ball, offsets, seed, mode);
  extend_exit_bank(bank, scheme, n_paths);
  return harmonic_extend(model, bank, g);
}

double negative_tail_integral(const StableModel& model, const ExteriorFunction& g, const HarnackParams& params,
                              Vec* argmax, int* n_points) {
  const TailResult t = tail_term(model, g, params);
  if (argmax) *argmax = t.argmax;
  if (n_points) *n_points = t.n_points;
  return t.value;
}

HarnackReport verify_weak_harnack(const StableModel& model, const HarmonicField& field, const ExteriorFunction& g,
                                  const HarnackParams& params) {
  params.validate();
  check_centered(field.ball, params, "verify_weak_harnack");
  const int d = model.dim();
  HarnackReport rep;
  rep.sigma_ratio = params.sigma_ratio;
  rep.c0 = params.c0();

  std::vector<double> avg_vals, avg_errs;
  double inf_val = kInf, inf_err = 0.0;
  Vec inf_node = zero_vec(d);
  for (std::size_t i = 0; i < field.offsets.size(); ++i) {
    const double n = field.offsets[i].norm();
    if (n <= params.r / params.lambda) {
      avg_vals.push_back(field.value[i]);
      avg_errs.push_back(field.std_err[i]);
    }
    if (n <= params.r / params.theta) {
      ++rep.inf_nodes;
      if (field.value[i] < inf_val) {
        inf_val = field.value[i];
        inf_err = field.std_err[i];
        inf_node = field.offsets[i];
      }
    }
  }
  if (avg_vals.empty() || rep.inf_nodes == 0)
    throw Error(ErrorKind::GridTooCoarse, "verify_weak_harnack: no lattice nodes in B_{r/theta}");
  rep.avg_nodes = static_cast<int>(avg_vals.size());
  rep.avg_term = mean_of(avg_vals);
  rep.avg_err = mean_of(avg_errs);  // the node estimates are correlated; the mean error bounds the average's
  rep.inf_term = inf_val;
  rep.inf_err = inf_err;
  rep.inf_node = Vec(params.x0 + inf_node);

  const TailResult tail = tail_term(model, g, params);
  rep.tail_term = tail.value;
  rep.tail_tol = tail.tol;
  rep.tail_argmax = Vec(params.x0 + tail.argmax);
  rep.tail_points = tail.n_points;

  const double denom = rep.inf_term + rep.tail_term;
  const double denom_err = rep.inf_err + rep.tail_tol;
  rep.vacuous = rep.avg_term > 2.0 * rep.avg_err && denom <= 2.0 * denom_err;
  if (denom > 0.0) {
    rep.c_est = rep.avg_term / denom;
    const double ra = rep.avg_term != 0.0 ? rep.avg_err / rep.avg_term : 0.0;
    const double rd = denom_err / denom;
    rep.c_err = rep.c_est * std::sqrt(ra * ra + rd * rd);
  } else {
    rep.c_est = kInf;
    rep.c_err = kInf;
  }
  if (rep.vacuous) rep.diagnostic = "inequality vacuously tight: inf + tail is indistinguishable from 0";
  return rep;
}

ExteriorFunction random_exterior(const std::string& family, const HarnackParams& p, Rng& rng) {
  const int d = static_cast<int>(p.x0.size());
  const double r = p.r;
  ExteriorTerm t;
  t.family = family;
  if (family == "shell") {
    t.kind = ExteriorTerm::Kind::Shell;
    t.center = p.x0;
    t.inner = r * uniform_in(rng, 1.0, 8.0);
    t.outer = std::min(10.0 * r, t.inner + r * uniform_in(rng, 0.2, 2.0));
    t.amplitude = uniform_in(rng, 0.5, 2.0);
  } else if (family == "bump" || family == "spike") {
    t.kind = ExteriorTerm::Kind::Bump;
    const bool spike = family == "spike";
    t.width = spike ? 0.1 * r : r * uniform_in(rng, 0.2, 1.0);
    // gap between the support and the sphere |y - x0| = r
    const double gap = spike ? r * 0.05 * std::pow(180.0, uniform01(rng)) : r * uniform_in(rng, 0.0, 8.0);
    const double dist = std::min(r + t.width + gap, 10.0 * r - t.width);
    const Vec e = random_unit(d, rng);
    t.center = p.x0 + dist * e;
    t.amplitude = spike ? uniform_in(rng, 5.0, 20.0) : uniform_in(rng, 0.5, 2.0);
  } else {
    throw Error(ErrorKind::InvalidArgument, "unknown exterior family '" + family + "'");
  }
  return ExteriorFunction({t});
}

HarnackConstant estimate_harnack_constant(const StableModel& model, const HarnackParams& params,
                                          const EnsembleOptions& opts) {
  params.validate();
  if (opts.size < 1) throw Error(ErrorKind::InvalidArgument, "ensemble size must be at least 1");
  const int d = model.dim();
  const Ball ball(params.x0, params.r);
  const IncrementScheme scheme = build_scheme(model, opts.eps_fraction * params.r);
  HarnackConstant out;
  out.bank = make_exit_bank(ball, interior_lattice(d, params.r, opts.spacing_fraction * params.r), opts.seed,
                            SeedMode::Common);
  extend_exit_bank(out.bank, scheme, opts.paths);
  const ExitFunctional exits(model, out.bank);

  Rng rng = make_stream(mix_seed(opts.seed, 0x656e73656d626c65ULL), 0);
  static const char* families[] = {"shell", "bump", "spike"};
  for (int i = 0; i < opts.size; ++i) {
    EnsembleMember m;
    const ExteriorFunction g =
        i == 0 ? ExteriorFunction::constant(d, 1.0) : random_exterior(families[(i - 1) % 3], params, rng);
    m.family = i == 0 ? "constant" : families[(i - 1) % 3];
    m.description = g.describe();
    const HarmonicField f = exits.extend(g);
    if (i == 0) out.field_template = f;
    m.report = verify_weak_harnack(model, f, g, params);
    out.c1 = std::max(out.c1, m.report.c_est);
    out.members.push_back(std::move(m));
  }
  return out;
}

std::vector<SignedTrial> signed_trials(const StableModel& model, const HarnackParams& params, double c1,
                                       const ExitBank& bank, int count, std::uint64_t seed) {
  params.validate();
  check_centered(bank.ball, params, "signed_trials");
  const int d = model.dim();
  const double r = params.r;
  const ExitFunctional exits(model, bank);
  Rng rng = make_stream(mix_seed(seed, 0x7369676e6564ULL), 0);
  static const char* families[] = {"shell", "bump", "spike"};
  std::vector<SignedTrial> out;
  for (int i = 0; i < count; ++i) {
    const ExteriorFunction base = random_exterior(families[i % 3], params, rng);
    ExteriorTerm neg;
    neg.kind = ExteriorTerm::Kind::Bump;
    neg.family = "negative-bump";
    neg.width = r * uniform_in(rng, 0.3, 1.0);
    neg.center = params.x0 + r * uniform_in(rng, 2.0, 6.0) * random_unit(d, rng);
    neg.amplitude = -8.0 * base.upper_bound();

    SignedTrial t;
    // u is linear in the amplitude: halve on the two separate fields
    const HarmonicField base_field = exits.extend(base);
    ExteriorTerm unit = neg;
    unit.amplitude = -1.0;
    const HarmonicField neg_field = exits.extend(ExteriorFunction({unit}));
    while (true) {
      double lowest = kInf;
      for (std::size_t k = 0; k < base_field.value.size(); ++k)
        lowest = std::min(lowest, base_field.value[k] - neg.amplitude * neg_field.value[k]);
      if (lowest >= 0.0) break;
      if (++t.halvings > 40) throw Error(ErrorKind::BudgetExhausted, "signed trial: cannot make u nonnegative on B_r");
      neg.amplitude *= 0.5;
    }
    const ExteriorFunction g = base.plus(ExteriorFunction({neg}));
    const HarmonicField f = exits.extend(g);
    t.description = g.describe();
    t.report = verify_weak_harnack(model, f, g, params);
    t.lhs = t.report.avg_term;
    t.rhs = c1 * (t.report.inf_term + t.report.tail_term);
    t.combined_sigma = std::sqrt(t.report.avg_err * t.report.avg_err +
                                 c1 * c1 * (t.report.inf_err * t.report.inf_err + t.report.tail_tol * t.report.tail_tol));
    t.holds = t.lhs <= t.rhs;
    t.within_noise = t.lhs - t.rhs <= 2.0 * t.combined_sigma;
    out.push_back(std::move(t));
  }
  return out;
}

HoelderConstants hoelder_constants(double c1, double theta) {
  if (!(c1 > 0.25)) throw Error(ErrorKind::InvalidArgument, "hoelder_constants: need c1 > 1/4 so that kappa < 1");
  if (!(theta > 1.0)) throw Error(ErrorKind::InvalidArgument, "hoelder_constants: need theta > 1");
  HoelderConstants h;
  h.kappa = 1.0 / (4.0 * c1);
  h.beta_theory = std::log(2.0 / (2.0 - h.kappa)) / std::log(theta);
  return h;
}

NestedLattice nested_lattice(const HarnackParams& p, int levels, int nodes_per_radius) {
  p.validate();
  if (levels < 0 || nodes_per_radius < 1) throw Error(ErrorKind::InvalidArgument, "nested_lattice: bad level count");
  const int d = static_cast<int>(p.x0.size());
  NestedLattice out;
  std::map<std::vector<long long>, int> index;
  const double key_unit = 1e-10 * p.r;
  for (int n = 0; n <= levels; ++n) {
    const double rho = p.r * std::pow(p.theta, -n);
    std::vector<int> nodes;
    for (const Vec& v : interior_lattice(d, rho, rho / nodes_per_radius)) {
      std::vector<long long> key(d);
      for (int i = 0; i < d; ++i) key[i] = std::llround(v(i) / key_unit);
      auto [it, fresh] = index.emplace(key, static_cast<int>(out.offsets.size()));
      if (fresh) out.offsets.push_back(v);
      nodes.push_back(it->second);
    }
    out.level_nodes.push_back(std::move(nodes));
  }
  return out;
}

NestedField nested_field(const ExitFunctional& exits, const NestedLattice& lattice, const ExteriorFunction& g,
                         const HarnackParams& p) {
  p.validate();
  const ExitBank& bank = exits.bank();
  check_centered(bank.ball, p, "nested_field");
  if (bank.starts.size() != lattice.offsets.size())
    throw Error(ErrorKind::InvalidArgument, "nested_field: bank starts do not match the lattice");
  const int d = static_cast<int>(p.x0.size());
  NestedField nf;
  nf.params = p;
  nf.levels = static_cast<int>(lattice.level_nodes.size()) - 1;
  nf.level_nodes = lattice.level_nodes;
  nf.field = exits.extend(g);

  const std::size_t n = bank.paths();
  for (const std::vector<int>& nodes : lattice.level_nodes) {
    int hi = nodes.front(), lo = nodes.front();
    for (int i : nodes) {
      if (nf.field.value[i] > nf.field.value[hi]) hi = i;
      if (nf.field.value[i] < nf.field.value[lo]) lo = i;
    }
    nf.osc.push_back(nf.field.value[hi] - nf.field.value[lo]);
    const std::vector<double> a = exits.samples(g, hi), b = exits.samples(g, lo);
    double sum = 0.0, sq = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double diff = a[k] - b[k];
      sum += diff;
      sq += diff * diff;
    }
    const double mean = sum / n;
    nf.osc_se.push_back(std::sqrt(std::max(0.0, (sq - n * mean * mean) / (n - 1)) / n));
  }

  // log-spaced radii in [r, 10 r]
  const int n_ext = 256;
  const std::vector<Vec> dirs = spread_directions(d, n_ext);
  for (int i = 0; i < n_ext; ++i) {
    const double rho = p.r * std::pow(10.0, (i + 0.5) / n_ext);
    const Vec off = rho * dirs[(i * 37) % n_ext];
    nf.exterior_offsets.push_back(off);
    nf.exterior_values.push_back(g.at_offset(p.x0, off));
  }
  return nf;
}

HoelderIteration run_oscillation_iteration(const NestedField& nf, const ExteriorFunction& g, double c1) {
  const HarnackParams& p = nf.params;
  const HoelderConstants hc = hoelder_constants(c1, p.theta);
  HoelderIteration it;
  it.c1_in = c1;
  it.kappa = hc.kappa;
  it.beta_theory = hc.beta_theory;
  const double beta = hc.beta_theory;
  const HarmonicField& f = nf.field;

  double m0 = g.lower_bound(), M0 = g.sup_abs();
  for (double v : f.value) {
    m0 = std::min(m0, v);
    M0 = std::max(M0, std::abs(v));
  }
  for (double v : nf.exterior_values) {
    m0 = std::min(m0, v);
    M0 = std::max(M0, std::abs(v));
  }
  const double K = M0 - m0;
  it.K = K;
  it.m.push_back(m0);
  it.M.push_back(M0);
  std::ostringstream diag;

  for (int k = 1; k <= nf.levels; ++k) {
    IterationLevel lev;
    lev.k = k;
    const double width = K * std::pow(p.theta, -k * beta);
    const double prev_m = it.m[k - 1], prev_M = it.M[k - 1];
    const double mid = 0.5 * (prev_m + prev_M);
    const double outer = p.r * std::pow(p.theta, -(k - 1));
    if (K == 0.0) {
      lev.m = prev_m;
      lev.M = prev_M;
    } else {
      const double scale = 2.0 * std::pow(p.theta, (k - 1) * beta) / K;
      int below = 0, total = 0;
      for (int i : nf.level_nodes[k - 1]) {
        if (f.offsets[i].norm() > outer / p.lambda) continue;
        ++total;
        if ((f.value[i] - mid) * scale <= 0.0) ++below;
      }
      lev.fraction_nonpositive = total ? double(below) / total : 0.0;
      if (lev.fraction_nonpositive >= 0.5) {
        lev.which_case = 1;
        lev.m = prev_m;
        lev.M = lev.m + width;
      } else {
        lev.which_case = 2;
        lev.M = prev_M;
        lev.m = lev.M - width;
      }

      // exterior growth envelope of v at |z - x0| >= r theta^{-(k-1)}
      auto check_envelope = [&](const Vec& off, double value, double se) {
        const double dist = off.norm();
        if (dist < outer) return;
        const double bound = 2.0 * std::pow(p.theta * dist / outer, beta) - 1.0;
        const double v = (value - mid) * scale;
        const double tol = 3.0 * se * scale + 1e-12;
        ++lev.envelope_checked;
        if (v > bound + tol || v < -bound - tol) {
          if (lev.envelope_violations == 0)
            diag << "level " << k << ": envelope violated at offset " << vec_text(off) << " (v = " << v
                 << ", bound " << bound << "); ";
          ++lev.envelope_violations;
        }
      };
      for (std::size_t i = 0; i < f.offsets.size(); ++i) check_envelope(f.offsets[i], f.value[i], f.std_err[i]);
      for (std::size_t i = 0; i < nf.exterior_offsets.size(); ++i)
        check_envelope(nf.exterior_offsets[i], nf.exterior_values[i], 0.0);
    }

    for (int i : nf.level_nodes[k]) {
      const double se = f.std_err[i];
      const double u = f.value[i];
      const double excess = std::max(lev.m - u, u - lev.M);
      if (excess > 3.0 * se + 1e-12 * std::max(1.0, K)) {
        if (lev.sandwich_violations == 0)
          diag << "level " << k << ": u = " << u << " at offset " << vec_text(f.offsets[i]) << " outside ["
               << lev.m << ", " << lev.M << "]; ";
        ++lev.sandwich_violations;
      }
      if (se > 0.0) lev.worst_excess = std::max(lev.worst_excess, excess / se);
    }
    it.sandwich_ok = it.sandwich_ok && lev.sandwich_violations == 0;
    it.envelope_ok = it.envelope_ok && lev.envelope_violations == 0;
    it.m.push_back(lev.m);
    it.M.push_back(lev.M);
    it.case_log.push_back(lev);
  }
  for (std::size_t n = 0; n < it.m.size(); ++n)
    it.width_residual = std::max(it.width_residual,
                                 std::abs(it.M[n] - it.m[n] - K * std::pow(p.theta, -static_cast<double>(n) * beta)));
  it.diagnostic = diag.str();
  return it;
}

HoelderFit estimate_hoelder_exponent(const NestedField& nf) {
  HoelderFit fit;
  fit.osc = nf.osc;
  for (double se : nf.osc_se) fit.noise.push_back(3.0 * se);
  if (fit.osc.empty() || !(fit.osc[0] > fit.noise[0]) || fit.osc[0] <= 0.0)
    throw Error(ErrorKind::Precondition, "constant function, exponent undefined");
  std::vector<double> xs, ys;
  for (std::size_t n = 0; n < fit.osc.size(); ++n) {
    if (!(fit.osc[n] > fit.noise[n]) || fit.osc[n] <= 0.0) break;
    xs.push_back(-static_cast<double>(n) * std::log(nf.params.theta));
    ys.push_back(std::log(fit.osc[n]));
  }
  fit.levels_used = static_cast<int>(xs.size());
  if (fit.levels_used < 2)
    throw Error(ErrorKind::Precondition, "oscillation drops below the noise floor after level 0");
  fit.beta_fit = numerics::fit_line(xs, ys).slope;
  return fit;
}

double annulus_levy_mass(const StableModel& model, const Vec& x_offset, double R1, double R2) {
  if (!model.measure().has_density()) throw Error(ErrorKind::NoDensity, "annulus mass needs a Levy density");
  if (!(x_offset.norm() < R1 && R1 <= R2)) throw Error(ErrorKind::InvalidArgument, "annulus mass: need |x| < R1 <= R2");
  const double alpha = model.alpha();
  const SphereQuadrature& q = model.quadrature();
  const double xx = x_offset.squaredNorm();
  double s = 0.0;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    const double b = x_offset.dot(q.nodes[i]);
    const double rho1 = -b + std::sqrt(b * b - xx + R1 * R1);
    const double rho2 = -b + std::sqrt(b * b - xx + R2 * R2);
    s += q.weights[i] * model.measure().density_at(q.nodes[i]) * (std::pow(rho1, -alpha) - std::pow(rho2, -alpha));
  }
  return model.levy_norm() / alpha * s;
}

TailDecayReport annulus_tail_decay(const StableModel& model, const HarnackParams& params, int k, int J) {
  params.validate();
  if (J < 3) throw Error(ErrorKind::InvalidArgument, "annulus_tail_decay needs J >= 3");
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "annulus_tail_decay needs k >= 1");
  const int d = model.dim();
  const double rho = params.r * std::pow(params.theta, -(k - 1)) / params.sigma_ratio;
  std::vector<Vec> xs = ball_lattice_min(Ball(zero_vec(d), rho), 200);
  for (const Vec& e : spread_directions(d, d == 2 ? 64 : 128)) xs.push_back(rho * (1.0 - 1e-12) * e);

  TailDecayReport rep;
  rep.k = k;
  rep.sup_points = static_cast<int>(xs.size());
  std::vector<double> jx, ly;
  for (int j = 1; j <= J; ++j) {
    const double R1 = params.r * std::pow(params.theta, -(k - j));
    const double R2 = params.r * std::pow(params.theta, -(k - j - 1));
    std::vector<double> vals(xs.size());
    parallel_for(xs.size(), [&](std::size_t i) { vals[i] = annulus_levy_mass(model, xs[i], R1, R2); });
    const double eta = *std::max_element(vals.begin(), vals.end());
    rep.eta.push_back(eta);
    jx.push_back(j + 1.0);
    ly.push_back(std::log(eta));
  }
  const numerics::LineFit lf = numerics::fit_line(jx, ly);
  rep.zeta_fit = std::exp(-lf.slope);
  rep.c_fit = std::exp(lf.intercept);
  for (int j = 1; j <= J; ++j) {
    const double model_val = rep.c_fit * std::pow(rep.zeta_fit, -(j + 1.0));
    rep.max_residual = std::max(rep.max_residual, std::abs(rep.eta[j - 1] / model_val - 1.0));
  }
  rep.geometric = rep.max_residual <= 0.1;
  return rep;
}

}  // namespace stable
