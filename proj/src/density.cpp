#include "stable/density.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "stable/numerics.hpp"
#include "stable/parallel.hpp"

namespace stable {

using numerics::kPi;

namespace {

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

// Exact samples of the period-(n*h) periodization of p(t, .) at the nodes
// (j - n/2) h: inverse DFT of the frequency-aliased spectrum.
std::vector<double> periodized_samples(const StableModel& model, const SymbolTable& symbol, double t,
                                       double h, int n) {
  const int d = model.dim();
  const double alpha = model.alpha();
  const double period = n * h;
  const int half = n / 2 + 1;
  const std::size_t spectrum_size =
      d == 2 ? static_cast<std::size_t>(n) * half : static_cast<std::size_t>(n) * n * half;
  const std::size_t real_size = d == 2 ? static_cast<std::size_t>(n) * n : static_cast<std::size_t>(n) * n * n;

  std::unique_ptr<fftw_complex, FftwFree> spectrum(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * spectrum_size)));
  std::vector<double> out(real_size);
  if (!spectrum) throw Error(ErrorKind::InvalidArgument, "FFT buffer allocation failed");

  // exp(-t Phi) < 1e-16 beyond this radius.
  const double phi_floor = 0.9 * model.phi_min();
  const double cut = std::pow(37.0 / (t * phi_floor), 1.0 / alpha);
  const double alias_step = 2.0 * kPi / h;
  const int m_max = static_cast<int>(std::ceil(cut / alias_step)) + 1;
  const double freq = 2.0 * kPi / period;
  const double scale = 1.0 / std::pow(period, d);

  auto wrap = [n](int k) { return k < n / 2 ? k : k - n; };
  auto alias_sum = [&](const double* xi0) {
    double s = 0.0;
    if (d == 2) {
      for (int a = -m_max; a <= m_max; ++a) {
        const double u1 = xi0[0] + a * alias_step;
        if (std::abs(u1) > cut) continue;
        for (int b = -m_max; b <= m_max; ++b) {
          const double u2 = xi0[1] + b * alias_step;
          if (u1 * u1 + u2 * u2 > cut * cut) continue;
          s += std::exp(-t * symbol(u1, u2));
        }
      }
      return s;
    }
    Vec u(3);
    for (int a = -m_max; a <= m_max; ++a) {
      u(0) = xi0[0] + a * alias_step;
      if (std::abs(u(0)) > cut) continue;
      for (int b = -m_max; b <= m_max; ++b) {
        u(1) = xi0[1] + b * alias_step;
        if (u(0) * u(0) + u(1) * u(1) > cut * cut) continue;
        for (int c = -m_max; c <= m_max; ++c) {
          u(2) = xi0[2] + c * alias_step;
          if (u.squaredNorm() > cut * cut) continue;
          s += std::exp(-t * symbol(u));
        }
      }
    }
    return s;
  };

  fftw_complex* spec = spectrum.get();
  const std::size_t rows = d == 2 ? static_cast<std::size_t>(n) : static_cast<std::size_t>(n) * n;
  parallel_for(rows, [&](std::size_t row) {
    double xi0[3];
    int ks[3];
    if (d == 2) {
      ks[0] = static_cast<int>(row);
    } else {
      ks[0] = static_cast<int>(row / n);
      ks[1] = static_cast<int>(row % n);
    }
    for (int last = 0; last < half; ++last) {
      ks[d - 1] = last;
      int parity = 0;
      for (int i = 0; i < d; ++i) {
        xi0[i] = freq * (i == d - 1 ? last : wrap(ks[i]));
        parity += ks[i];
      }
      const double v = alias_sum(xi0) * scale * ((parity & 1) ? -1.0 : 1.0);
      fftw_complex& c = spec[row * half + last];
      c[0] = v;
      c[1] = 0.0;
    }
  });

  fftw_plan plan = d == 2 ? fftw_plan_dft_c2r_2d(n, n, spec, out.data(), FFTW_ESTIMATE)
                          : fftw_plan_dft_c2r_3d(n, n, n, spec, out.data(), FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);
  return out;
}

int positive_mod(int a, int n) {
  const int r = a % n;
  return r < 0 ? r + n : r;
}

// Periodic tensor-product cubic interpolation of samples on nodes (j - n/2) h.
double periodic_cubic(const std::vector<double>& v, int d, int n, double h, const double* x) {
  int base[3] = {0, 0, 0};
  double w[3][4];
  for (int i = 0; i < d; ++i) {
    const double pos = x[i] / h + n / 2;
    const double fl = std::floor(pos);
    base[i] = static_cast<int>(fl) - 1;
    numerics::lagrange4(pos - fl, w[i]);
  }
  double s = 0.0;
  if (d == 2) {
    for (int a = 0; a < 4; ++a) {
      const std::size_t ra = static_cast<std::size_t>(positive_mod(base[0] + a, n)) * n;
      double inner = 0.0;
      for (int b = 0; b < 4; ++b) inner += w[1][b] * v[ra + positive_mod(base[1] + b, n)];
      s += w[0][a] * inner;
    }
    return s;
  }
  for (int a = 0; a < 4; ++a) {
    const std::size_t ra = static_cast<std::size_t>(positive_mod(base[0] + a, n)) * n;
    double mid = 0.0;
    for (int b = 0; b < 4; ++b) {
      const std::size_t rb = (ra + positive_mod(base[1] + b, n)) * n;
      double inner = 0.0;
      for (int c = 0; c < 4; ++c) inner += w[2][c] * v[rb + positive_mod(base[2] + c, n)];
      mid += w[1][b] * inner;
    }
    s += w[0][a] * mid;
  }
  return s;
}

void check_grid_parameters(const StableModel& model, double t, double L, double h, const GridOptions& opts) {
  if (!(t > 0.0)) throw Error(ErrorKind::InvalidArgument, "time must be positive");
  if (!(L > 0.0) || !(h > 0.0) || h >= L) throw Error(ErrorKind::InvalidArgument, "need 0 < h < L");
  const double ratio = L / h;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
    throw Error(ErrorKind::InvalidArgument, "L must be an integer multiple of h");
  if (!opts.check_preconditions) return;
  const double cutoff = kPi / h;
  const double leak = std::exp(-t * model.phi_min() * std::pow(cutoff, model.alpha()));
  if (!(leak < 1e-12)) {
    std::ostringstream os;
    os << "grid too coarse: exp(-t Phi_min (pi/h)^alpha) = " << leak << " >= 1e-12 at h = " << h;
    throw Error(ErrorKind::GridTooCoarse, os.str());
  }
  const double spread = std::pow(t * model.phi_max(), 1.0 / model.alpha());
  if (L < 4.0 * spread) {
    std::ostringstream os;
    os << "grid too small: L = " << L << " < 4 (t Phi_max)^{1/alpha} = " << 4.0 * spread;
    throw Error(ErrorKind::GridTooCoarse, os.str());
  }
}

TransitionDensityGrid invert(const StableModel& model, double t, double L, double h, const GridOptions& opts) {
  check_grid_parameters(model, t, L, h, opts);
  const int d = model.dim();
  const int n = static_cast<int>(std::lround(2.0 * L / h));
  if (n % 2 != 0) throw Error(ErrorKind::InvalidArgument, "2L/h must be even");
  // without a Levy density there is no remainder for the last level, so fold further instead
  const int default_levels = (d == 2 ? 3 : 1) + (model.measure().has_density() ? 0 : 1);
  const int levels = opts.fold_levels >= 0 ? opts.fold_levels : default_levels;
  const SymbolTable symbol(model);

  TransitionDensityGrid g;
  g.dim = d;
  g.alpha = model.alpha();
  g.t_ref = t;
  g.L = L;
  g.h = h;
  g.n = n;
  g.model_hash = model.hash();
  g.fold_levels = levels;

  const std::size_t total = d == 2 ? static_cast<std::size_t>(n) * n : static_cast<std::size_t>(n) * n * n;
  std::vector<double> correction(total, 0.0);
  const int corners = (1 << d) - 1;
  for (int level = levels; level >= 1; --level) {
    const double coarse_h = h * std::ldexp(1.0, level);
    const double shift = n * h * std::ldexp(1.0, level - 1);
    const std::vector<double> coarse = periodized_samples(model, symbol, t, coarse_h, n);
    parallel_for(total, [&](std::size_t flat) {
      const Vec x = g.node(flat);
      double acc = 0.0;
      for (int k = 1; k <= corners; ++k) {
        double y[3];
        for (int i = 0; i < d; ++i) y[i] = x(i) + ((k >> i) & 1 ? shift : 0.0);
        acc += periodic_cubic(coarse, d, n, coarse_h, y);
      }
      correction[flat] += acc;
    });
  }
  std::vector<double> base = periodized_samples(model, symbol, t, h, n);

  double remainder = 0.0;
  if (model.measure().has_density()) {
    const double last_period = n * h * std::ldexp(1.0, levels);
    remainder = t * std::pow(last_period, -d - model.alpha()) * levy_lattice_sum(model);
  }
  const double cell = std::pow(h, d);
  double mass = 0.0, cell_mass = 0.0, most_negative = 0.0;
  g.values.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    mass += base[i];
    const double v = base[i] - correction[i] - remainder;
    most_negative = std::min(most_negative, v);
    g.values[i] = std::max(v, 0.0);
    cell_mass += g.values[i];
  }
  g.mass = mass * cell;
  g.cell_mass = cell_mass * cell;
  g.ringing = -most_negative;
  g.heat_kernel_c = verify_heat_kernel_bound(g).c_est;
  return g;
}

}  // namespace

Vec TransitionDensityGrid::node(std::size_t flat) const {
  Vec x(dim);
  for (int i = dim - 1; i >= 0; --i) {
    x(i) = coordinate(static_cast<int>(flat % n));
    flat /= n;
  }
  return x;
}

std::size_t TransitionDensityGrid::flat_index(int i0, int i1, int i2) const {
  const std::size_t nn = static_cast<std::size_t>(n);
  return dim == 2 ? i0 * nn + i1 : (i0 * nn + i1) * nn + i2;
}

std::size_t TransitionDensityGrid::origin_index() const { return flat_index(n / 2, n / 2, n / 2); }

double default_extent(int d) { return d == 2 ? 40.0 : 20.0; }
double default_spacing(int d) { return d == 2 ? 0.0390625 : 0.15625; }

TransitionDensityGrid unit_density_grid(const StableModel& model, double L, double h, const GridOptions& opts) {
  return invert(model, 1.0, L, h, opts);
}

TransitionDensityGrid density_grid_at_time(const StableModel& model, double t, double L, double h,
                                           const GridOptions& opts) {
  return invert(model, t, L, h, opts);
}

bool in_grid(const TransitionDensityGrid& grid, const Vec& x) {
  for (int i = 0; i < grid.dim; ++i)
    if (!(x(i) >= -grid.L && x(i) <= grid.L - grid.h)) return false;
  return true;
}

double interpolate(const TransitionDensityGrid& grid, const Vec& x) {
  const int d = grid.dim;
  int base[3];
  double frac[3];
  for (int i = 0; i < d; ++i) {
    const double pos = x(i) / grid.h + grid.n / 2;
    int b = static_cast<int>(std::floor(pos));
    b = std::clamp(b, 0, grid.n - 2);
    base[i] = b;
    frac[i] = std::clamp(pos - b, 0.0, 1.0);
  }
  double s = 0.0;
  for (int corner = 0; corner < (1 << d); ++corner) {
    double w = 1.0;
    int idx[3] = {0, 0, 0};
    for (int i = 0; i < d; ++i) {
      const int bit = (corner >> i) & 1;
      w *= bit ? frac[i] : 1.0 - frac[i];
      idx[i] = base[i] + bit;
    }
    if (w != 0.0) s += w * grid.values[grid.flat_index(idx[0], idx[1], idx[2])];
  }
  return s;
}

DensityValue density_at(const TransitionDensityGrid& grid, double t, const Vec& x) {
  if (!(t > 0.0)) throw Error(ErrorKind::InvalidArgument, "density_at: time must be positive");
  const double d = grid.dim;
  const double s = t / grid.t_ref;
  const Vec y = x * std::pow(s, -1.0 / grid.alpha);
  if (in_grid(grid, y)) return {std::pow(s, -d / grid.alpha) * interpolate(grid, y), false};
  const double r = x.norm();
  const double bound = grid.heat_kernel_c * std::min(std::pow(t, -d / grid.alpha), t * std::pow(r, -d - grid.alpha));
  return {bound, true};
}

HeatKernelBound verify_heat_kernel_bound(const TransitionDensityGrid& grid) {
  const double d = grid.dim;
  // p(1, y) = t_ref^{d/alpha} p(t_ref, t_ref^{1/alpha} y)
  const double stretch = std::pow(grid.t_ref, -1.0 / grid.alpha);
  const double amp = std::pow(grid.t_ref, d / grid.alpha);
  HeatKernelBound out;
  out.c_est = 0.0;
  std::size_t worst = grid.origin_index();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec y = grid.node(i) * stretch;
    const double r = y.norm();
    const double envelope = r <= 1.0 ? 1.0 : std::pow(r, -d - grid.alpha);
    const double ratio = amp * grid.values[i] / envelope;
    if (ratio > out.c_est) {
      out.c_est = ratio;
      worst = i;
    }
  }
  out.worst_node = grid.node(worst) * stretch;
  return out;
}

double levy_lattice_sum(const StableModel& model) {
  const int d = model.dim();
  const int m = d == 2 ? 40 : 12;
  double s = 0.0;
  if (d == 2) {
    for (int a = -m; a <= m; ++a)
      for (int b = -m; b <= m; ++b)
        if (a != 0 || b != 0) s += levy_density(model, make_vec({double(a), double(b)}));
  } else {
    for (int a = -m; a <= m; ++a)
      for (int b = -m; b <= m; ++b)
        for (int c = -m; c <= m; ++c)
          if (a != 0 || b != 0 || c != 0) s += levy_density(model, make_vec({double(a), double(b), double(c)}));
  }
  // beyond the cube of half side m + 1/2: (c/alpha) int f(w) rho(w)^{-alpha} dw
  const auto& q = model.quadrature();
  double tail = 0.0;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    const Vec& w = q.nodes[i];
    const double rho = (m + 0.5) / w.cwiseAbs().maxCoeff();
    tail += q.weights[i] * model.measure().density_at(w) * std::pow(rho, -model.alpha());
  }
  return s + model.levy_norm() / model.alpha() * tail;
}

namespace {
constexpr char kMagic[8] = {'S', 'H', 'G', 'R', 'I', 'D', '0', '1'};

struct GridHeader {
  char magic[8];
  std::uint64_t model_hash;
  std::int32_t dim;
  std::int32_t n;
  std::int32_t fold_levels;
  std::int32_t reserved;
  double alpha, t_ref, L, h, mass, cell_mass, ringing, heat_kernel_c;
};
}  // namespace

void save_grid(const TransitionDensityGrid& grid, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write grid cache " + path);
  GridHeader hd{};
  std::memcpy(hd.magic, kMagic, sizeof kMagic);
  hd.model_hash = grid.model_hash;
  hd.dim = grid.dim;
  hd.n = grid.n;
  hd.fold_levels = grid.fold_levels;
  hd.alpha = grid.alpha;
  hd.t_ref = grid.t_ref;
  hd.L = grid.L;
  hd.h = grid.h;
  hd.mass = grid.mass;
  hd.cell_mass = grid.cell_mass;
  hd.ringing = grid.ringing;
  hd.heat_kernel_c = grid.heat_kernel_c;
  out.write(reinterpret_cast<const char*>(&hd), sizeof hd);
  out.write(reinterpret_cast<const char*>(grid.values.data()),
            static_cast<std::streamsize>(grid.values.size() * sizeof(double)));
  if (!out) throw Error(ErrorKind::Io, "short write to grid cache " + path);
}

TransitionDensityGrid load_grid(const std::string& path, const StableModel& model, double L, double h) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open grid cache " + path);
  GridHeader hd{};
  in.read(reinterpret_cast<char*>(&hd), sizeof hd);
  if (!in || std::memcmp(hd.magic, kMagic, sizeof kMagic) != 0)
    throw Error(ErrorKind::Io, "not a grid cache: " + path);
  if (hd.model_hash != model.hash() || hd.dim != model.dim() || hd.alpha != model.alpha() || hd.L != L ||
      hd.h != h || hd.t_ref != 1.0)
    throw Error(ErrorKind::Io, "grid cache header does not match the requested model/grid: " + path);
  TransitionDensityGrid g;
  g.dim = hd.dim;
  g.n = hd.n;
  g.fold_levels = hd.fold_levels;
  g.alpha = hd.alpha;
  g.t_ref = hd.t_ref;
  g.L = hd.L;
  g.h = hd.h;
  g.mass = hd.mass;
  g.cell_mass = hd.cell_mass;
  g.ringing = hd.ringing;
  g.heat_kernel_c = hd.heat_kernel_c;
  g.model_hash = hd.model_hash;
  std::size_t total = 1;
  for (int i = 0; i < g.dim; ++i) total *= static_cast<std::size_t>(g.n);
  g.values.resize(total);
  in.read(reinterpret_cast<char*>(g.values.data()), static_cast<std::streamsize>(total * sizeof(double)));
  if (!in) throw Error(ErrorKind::Io, "truncated grid cache " + path);
  return g;
}

void write_radial_csv(const TransitionDensityGrid& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  out.precision(12);
  out << "r";
  for (int i = 0; i < grid.dim; ++i) out << ",p_axis" << i + 1;
  out << "\n";
  const int c = grid.n / 2;
  for (int j = c; j < grid.n; ++j) {
    out << grid.coordinate(j);
    for (int axis = 0; axis < grid.dim; ++axis) {
      int idx[3] = {c, c, c};
      idx[axis] = j;
      out << "," << grid.values[grid.flat_index(idx[0], idx[1], idx[2])];
    }
    out << "\n";
  }
}

}  // namespace stable
