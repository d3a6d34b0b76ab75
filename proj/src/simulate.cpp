#include "stable/simulate.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "stable/numerics.hpp"
#include "stable/parallel.hpp"

namespace stable {

using numerics::kPi;

std::uint64_t mix_seed(std::uint64_t root, std::uint64_t index) {
  auto splitmix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  return splitmix(splitmix(root) ^ (index * 0xd1b54a32d192ed03ull + 0x8cb92ba72f3d8dd7ull));
}

Rng make_stream(std::uint64_t root, std::uint64_t index) { return Rng(mix_seed(root, index)); }

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double uniform_open(Rng& rng) { return static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53; }
double standard_normal(Rng& rng) { return std::normal_distribution<double>{}(rng); }

AliasTable::AliasTable(const std::vector<double>& weights) {
  const std::size_t n = weights.size();
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "alias table needs weights");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw Error(ErrorKind::InvalidArgument, "alias table weights sum to zero");
  prob_.assign(n, 0.0);
  alias_.assign(n, 0);
  mass_.resize(n);
  std::vector<double> scaled(n);
  std::vector<std::size_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i] < 0.0) throw Error(ErrorKind::InvalidArgument, "negative alias weight");
    mass_[i] = weights[i] / total;
    scaled[i] = mass_[i] * n;
    (scaled[i] < 1.0 ? small : large).push_back(i);
  }
  while (!small.empty() && !large.empty()) {
    const std::size_t s = small.back(), l = large.back();
    small.pop_back();
    large.pop_back();
    prob_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = scaled[l] + scaled[s] - 1.0;
    (scaled[l] < 1.0 ? small : large).push_back(l);
  }
  for (std::size_t i : large) prob_[i] = 1.0;
  for (std::size_t i : small) prob_[i] = 1.0;
}

std::size_t AliasTable::sample(Rng& rng) const {
  const double u = uniform01(rng) * prob_.size();
  const std::size_t i = std::min(static_cast<std::size_t>(u), prob_.size() - 1);
  return (u - i) < prob_[i] ? i : alias_[i];
}

Vec IncrementScheme::sample_direction(Rng& rng) const {
  const std::size_t i = direction_table.sample(rng);
  const double u1 = uniform01(rng), u2 = uniform01(rng);
  if (!jitter) return directions[i];
  if (dim == 2) {
    const double a = std::atan2(directions[i](1), directions[i](0)) + (u1 - 0.5) * azimuth_cell;
    return make_vec({std::cos(a), std::sin(a)});
  }
  const std::size_t polar = i / n_azimuth, az = i % n_azimuth;
  const double t = polar_edges[polar] + u1 * (polar_edges[polar + 1] - polar_edges[polar]);
  const double s = std::sqrt(std::max(0.0, 1.0 - t * t));
  const double psi = (static_cast<double>(az) + u2 - 0.5) * azimuth_cell;
  return make_vec({s * std::cos(psi), s * std::sin(psi), t});
}

Vec IncrementScheme::sample_jump(Rng& rng) const {
  const double radius = eps_cut * std::pow(uniform_open(rng), -1.0 / alpha);
  return radius * sample_direction(rng);
}

IncrementScheme build_scheme(const StableModel& model, double eps_cut) {
  if (!(eps_cut > 0.0) || !std::isfinite(eps_cut))
    throw Error(ErrorKind::InvalidArgument, "eps_cut must be positive");
  const int d = model.dim();
  const double alpha = model.alpha();
  const double c = model.levy_norm();
  IncrementScheme s;
  s.dim = d;
  s.alpha = alpha;
  s.eps_cut = eps_cut;
  s.phi_max = model.phi_max();
  s.big_jump_rate = c * model.total_mass() * std::pow(eps_cut, -alpha) / alpha;
  s.gauss_cov = c * std::pow(eps_cut, 2.0 - alpha) / (2.0 - alpha) * model.second_moment();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Eigen::MatrixXd(s.gauss_cov));
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  s.gauss_factor = Mat(eig.eigenvectors() * root.asDiagonal());

  const auto& mu = model.measure();
  std::vector<double> weights;
  if (mu.kind() == SpectralMeasure::Kind::Atomic) {
    for (const auto& a : mu.atoms()) {
      s.directions.push_back(a.direction);
      weights.push_back(a.weight);
    }
  } else {
    const auto& q = model.quadrature();
    s.directions = q.nodes;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) weights.push_back(q.weights[i] * mu.density_at(q.nodes[i]));
    s.jitter = true;
    s.n_azimuth = q.n_azimuth;
    s.azimuth_cell = 2.0 * kPi / q.n_azimuth;
    if (d == 3) {
      const auto gl = numerics::gauss_legendre(q.n_polar);
      s.polar_edges.push_back(-1.0);
      for (double w : gl.weights) s.polar_edges.push_back(s.polar_edges.back() + w);
      s.polar_edges.back() = 1.0;
    }
  }
  s.direction_table = AliasTable(weights);
  return s;
}

double truncated_cosine_integral(double alpha, double b) {
  if (b <= 0.0) return 0.0;
  const double split = std::min(b, 4.0);
  double sum = 0.0, fact = 1.0;
  for (int k = 1; k <= 30; ++k) {
    fact *= (2.0 * k - 1.0) * (2.0 * k);
    const double term = std::pow(split, 2.0 * k - alpha) / (fact * (2.0 * k - alpha));
    sum += (k % 2 == 1) ? term : -term;
    if (term < 1e-18 * std::abs(sum)) break;
  }
  if (b > split) {
    const int panels = std::max(8, static_cast<int>(std::ceil((b - split) / 2.0)));
    sum += numerics::integrate_composite(
        [alpha](double r) { return (1.0 - std::cos(r)) * std::pow(r, -1.0 - alpha); }, split, b, panels);
  }
  return sum;
}

double scheme_exponent(const StableModel& model, const IncrementScheme& scheme, const Vec& u) {
  const double n = u.norm();
  if (n == 0.0) return 0.0;
  const double alpha = model.alpha();
  const double full = cosine_integral(alpha);
  const double gauss = 0.5 * u.dot(scheme.gauss_cov * u);
  const auto& mu = model.measure();
  double jumps = 0.0;
  if (mu.kind() == SpectralMeasure::Kind::Atomic) {
    for (const auto& a : mu.atoms()) {
      const double s = std::abs(u.dot(a.direction));
      jumps += a.weight * std::pow(s, alpha) * (full - truncated_cosine_integral(alpha, scheme.eps_cut * s));
    }
  } else {
    const Vec e = u / n;
    jumps = std::pow(n, alpha) * aligned_sphere_integral(
                                     model.dim(), alpha,
                                     [&](const Vec& xi) {
                                       const double s = n * std::abs(e.dot(xi));
                                       return mu.density_at(xi) *
                                              (full - truncated_cosine_integral(alpha, scheme.eps_cut * s));
                                     },
                                     e);
  }
  return gauss + model.levy_norm() * jumps;
}

namespace {

Vec gaussian(const IncrementScheme& s, double variance_scale, Rng& rng) {
  Vec z(s.dim);
  for (int i = 0; i < s.dim; ++i) z(i) = standard_normal(rng);
  return s.gauss_factor * z * std::sqrt(variance_scale);
}

}  // namespace

Vec sample_increment(const IncrementScheme& scheme, double dt, Rng& rng) {
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
  Vec x = gaussian(scheme, dt, rng);
  const long jumps = std::poisson_distribution<long>(dt * scheme.big_jump_rate)(rng);
  for (long k = 0; k < jumps; ++k) x += scheme.sample_jump(rng);
  return x;
}

namespace {

// Works in coordinates relative to the ball center; returns the exit offset.
template <class AuxSource>
ExitSample exit_impl(const IncrementScheme& scheme, double r, const Vec& offset, Rng& main, AuxSource&& aux_source,
                     const ExitOptions& opts) {
  Vec pos = offset;
  if (!(pos.norm() < r)) throw Error(ErrorKind::Precondition, "exit sampling needs a start strictly inside the ball");
  double time = 0.0;
  long steps = 0;
  auto finish = [&](const Vec& rel, double t) { return ExitSample{rel, t, steps, Vec(), false}; };
  const double rate = scheme.big_jump_rate;
  for (;;) {
    const double wait = -std::log(uniform_open(main)) / rate;
    const Vec g = gaussian(scheme, wait, main);
    const Vec jump = scheme.sample_jump(main);

    const double dist = r - pos.norm();
    const double dt_policy = std::pow(0.25 * dist, scheme.alpha) / scheme.phi_max;
    if (wait > dt_policy) {
      const int k = static_cast<int>(std::min<double>(opts.max_refine, std::ceil(wait / dt_policy)));
      Vec prev = Vec::Zero(scheme.dim);
      double s_prev = 0.0;
      for (int i = 1; i < k; ++i) {
        const double s_i = wait * i / k;
        const double frac = (s_i - s_prev) / (wait - s_prev);
        const Vec mean = prev + (g - prev) * frac;
        const Vec b = mean + gaussian(scheme, (s_i - s_prev) * (wait - s_i) / (wait - s_prev), aux_source());
        ++steps;
        if ((pos + b).norm() > r) return finish(pos + b, time + s_i);
        prev = b;
        s_prev = s_i;
      }
    }
    pos += g;
    time += wait;
    ++steps;
    if (pos.norm() > r) return finish(pos, time);
    const Vec before = pos;
    pos += jump;
    if (pos.norm() > r) return ExitSample{pos, time, steps, before, true};
    if (steps > opts.step_budget)
      throw Error(ErrorKind::BudgetExhausted,
                  "exit sampling exceeded " + std::to_string(opts.step_budget) + " steps (time " +
                      std::to_string(time) + ", |x - x0| = " + std::to_string(pos.norm()) + ")");
  }
}

}  // namespace

ExitSample sample_exit(const IncrementScheme& scheme, const Ball& ball, const Vec& start, Rng& main, Rng& aux,
                       const ExitOptions& opts) {
  ExitSample e = exit_impl(scheme, ball.radius, Vec(start - ball.center), main, [&aux]() -> Rng& { return aux; }, opts);
  e.position += ball.center;
  if (e.by_jump) e.pre_exit += ball.center;
  return e;
}

ExitSample sample_exit_offset(const IncrementScheme& scheme, double radius, const Vec& offset, std::uint64_t seed,
                              std::uint64_t path, const ExitOptions& opts) {
  Rng main = make_stream(seed, 2 * path);
  std::optional<Rng> aux;
  auto source = [&]() -> Rng& {
    if (!aux) aux.emplace(make_stream(seed, 2 * path + 1));
    return *aux;
  };
  return exit_impl(scheme, radius, offset, main, source, opts);
}

ExitSample sample_exit(const IncrementScheme& scheme, const Ball& ball, const Vec& start, std::uint64_t seed,
                       std::uint64_t path, const ExitOptions& opts) {
  ExitSample e = sample_exit_offset(scheme, ball.radius, Vec(start - ball.center), seed, path, opts);
  e.position += ball.center;
  if (e.by_jump) e.pre_exit += ball.center;
  return e;
}

ExitBank make_exit_bank(const Ball& ball, std::vector<Vec> offsets, std::uint64_t seed, SeedMode mode) {
  for (const Vec& o : offsets)
    if (!(o.norm() < ball.radius)) throw Error(ErrorKind::Precondition, "exit bank start not strictly inside the ball");
  ExitBank b;
  b.ball = ball;
  b.starts = std::move(offsets);
  b.exits.resize(b.starts.size());
  b.times.resize(b.starts.size());
  b.pre_exits.resize(b.starts.size());
  b.by_jump.resize(b.starts.size());
  b.seed = seed;
  b.mode = mode;
  return b;
}

void extend_exit_bank(ExitBank& bank, const IncrementScheme& scheme, int n, const ExitOptions& opts) {
  if (n <= 0) return;
  const std::size_t first = bank.paths();
  if (first > 0 && bank.eps_cut != scheme.eps_cut)
    throw Error(ErrorKind::InvalidArgument, "extend_exit_bank: scheme differs from the one the bank was built with");
  bank.eps_cut = scheme.eps_cut;
  const std::size_t starts = bank.starts.size();
  for (std::size_t s = 0; s < starts; ++s) {
    bank.exits[s].resize(first + n);
    bank.times[s].resize(first + n);
    bank.pre_exits[s].resize(first + n);
    bank.by_jump[s].resize(first + n);
  }
  std::vector<long> steps(starts * n, 0);
  parallel_for(starts * n, [&](std::size_t task) {
    const std::size_t s = task / n, p = first + task % n;
    const std::uint64_t path = bank.mode == SeedMode::Common ? p : (static_cast<std::uint64_t>(s) << 32) + p;
    const ExitSample e = sample_exit_offset(scheme, bank.ball.radius, bank.starts[s], bank.seed, path, opts);
    bank.exits[s][p] = e.position;
    bank.times[s][p] = e.time;
    bank.by_jump[s][p] = e.by_jump;
    if (e.by_jump) bank.pre_exits[s][p] = e.pre_exit;
    steps[task] = e.n_steps;
  });
  for (long k : steps) bank.total_steps += k;
}

double poisson_kernel_constant(double alpha, int d) {
  if (!(alpha > 0.0 && alpha < 2.0)) throw Error(ErrorKind::InvalidArgument, "alpha must lie in (0, 2)");
  // x = 0, r = 1: |S| int_1^inf (s^2 - 1)^{-alpha/2} s^{-1} ds = |S| B(1 - alpha/2, alpha/2) / 2.
  const double radial = 0.5 * std::beta(1.0 - 0.5 * alpha, 0.5 * alpha);
  return 1.0 / (numerics::sphere_area(d) * radial);
}

double poisson_kernel_isotropic(double alpha, int d, double r, const Vec& x, const Vec& y) {
  const double x2 = x.squaredNorm(), y2 = y.squaredNorm(), r2 = r * r;
  if (!(x2 < r2 && y2 > r2)) throw Error(ErrorKind::Precondition, "Poisson kernel needs |x| < r < |y|");
  return poisson_kernel_constant(alpha, d) * std::pow((r2 - x2) / (y2 - r2), 0.5 * alpha) *
         std::pow((x - y).norm(), -static_cast<double>(d));
}

double isotropic_exit_radial_cdf(double alpha, double rho) {
  if (rho <= 1.0) return 0.0;
  if (!std::isfinite(rho)) return 1.0;
  // The radial law is a Beta(1 - alpha/2, alpha/2) law in w = 1 - 1/rho^2.
  const double w = 1.0 - 1.0 / (rho * rho);
  return boost::math::ibeta(1.0 - 0.5 * alpha, 0.5 * alpha, w);
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return d;
}

}  // namespace stable
