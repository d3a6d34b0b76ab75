#include "stable/experiment.hpp"

#include <glob.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <boost/version.hpp>

#include "stable/density.hpp"
#include "stable/green.hpp"
#include "stable/harnack.hpp"
#include "stable/numerics.hpp"
#include "stable/parallel.hpp"
#include "stable/simulate.hpp"

namespace stable {

namespace {

constexpr const char* kVersion = "0.1.0";

const std::set<std::string> kTasks = {"symbol", "density", "green",  "exit",    "lemma1",
                                      "lemma2", "lemma3",  "harnack", "hoelder", "tail"};

const std::map<std::string, std::set<std::string>> kSectionKeys = {
    {"model", {"dim", "alpha", "measure", "level", "anisotropy", "harmonic", "quadrature"}},
    {"task", {"name", "seed"}},
    {"params", {}},
    {"grid", {"L", "h", "fold_levels", "cache"}},
    {"scheme", {"eps_fraction", "step_budget", "max_refine"}},
    {"output", {"dir", "csv"}},
};

const std::set<std::string> kGeometryKeys = {"x0", "r", "r0", "lambda", "theta", "sigma", "a"};

const std::map<std::string, std::set<std::string>> kTaskKeys = {
    {"symbol", {"points"}},
    {"density", {"t"}},
    {"green", {"directions"}},
    {"exit", {"paths", "start"}},
    {"lemma1", {"samples", "batch", "max_paths", "rel_target"}},
    {"lemma2", {"samples", "batch", "max_paths"}},
    {"lemma3", {"pairs", "batch", "max_paths", "delta1"}},
    {"harnack", {"g", "ensemble", "paths", "spacing", "signed"}},
    {"hoelder", {"g", "c1", "levels", "nodes_per_radius", "paths", "ensemble", "harnack_ensemble", "harnack_paths"}},
    {"tail", {"k", "J"}},
};

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::Config, what); }

double parse_number(const std::string& text, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    config_error(where + ": '" + text + "' is not a number");
  }
  if (used != text.size()) config_error(where + ": '" + text + "' is not a number");
  return v;
}

Vec parse_vec(const std::string& text, const std::string& where) {
  std::vector<double> xs;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    xs.push_back(parse_number(item, where));
  }
  if (xs.empty() || xs.size() > 3) config_error(where + ": expected 1 to 3 comma separated numbers");
  Vec v(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) v(i) = xs[i];
  return v;
}

std::vector<Vec> parse_vec_list(const std::string& text, const std::string& where) {
  std::vector<Vec> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';'))
    if (item.find_first_not_of(" \t") != std::string::npos) out.push_back(parse_vec(item, where));
  return out;
}

Vec config_vec(const ExperimentConfig& c, const std::string& section, const std::string& key, int d) {
  if (!c.has(section, key)) return Vec::Zero(d);
  Vec v = parse_vec(c.get(section, key), section + "." + key);
  if (v.size() != d) config_error(section + "." + key + ": expected " + std::to_string(d) + " coordinates");
  return v;
}

HarnackParams harnack_params(const ExperimentConfig& c, int d) {
  HarnackParams p;
  p.x0 = config_vec(c, "params", "x0", d);
  p.r = c.number("params", "r", 1.0);
  p.r0 = c.number("params", "r0", std::max(1.0, p.r));
  p.lambda = c.number("params", "lambda", 4.0 / 3.0);
  p.theta = c.number("params", "theta", 2.0);
  p.sigma_ratio = c.number("params", "sigma", 3.0);
  p.a = c.number("params", "a", 0.9);
  return p;
}

double eps_fraction(const ExperimentConfig& c) {
  const double e = c.number("scheme", "eps_fraction", 0.01);
  if (!(e > 0.0 && e < 1.0)) config_error("scheme.eps_fraction must lie in (0, 1)");
  return e;
}

ExitOptions exit_options(const ExperimentConfig& c) {
  ExitOptions o;
  o.step_budget = c.integer("scheme", "step_budget", o.step_budget);
  o.max_refine = static_cast<int>(c.integer("scheme", "max_refine", o.max_refine));
  if (o.step_budget < 1 || o.max_refine < 1) config_error("scheme budgets must be positive");
  return o;
}

long positive(const ExperimentConfig& c, const std::string& key, long fallback) {
  const long v = c.integer("params", key, fallback);
  if (v < 1) config_error("params." + key + " must be positive");
  return v;
}

TransitionDensityGrid unit_grid(const ExperimentConfig& c, const StableModel& model) {
  const int d = model.dim();
  const double L = c.number("grid", "L", default_extent(d));
  const double h = c.number("grid", "h", default_spacing(d));
  GridOptions opts;
  opts.fold_levels = static_cast<int>(c.integer("grid", "fold_levels", -1));
  const std::string cache = c.get("grid", "cache");
  if (!cache.empty() && std::filesystem::exists(cache)) return load_grid(cache, model, L, h);
  TransitionDensityGrid g = unit_density_grid(model, L, h, opts);
  if (!cache.empty()) save_grid(g, cache);
  return g;
}

McOptions mc_options(const ExperimentConfig& c) {
  McOptions mc;
  mc.seed = c.seed;
  mc.eps_fraction = eps_fraction(c);
  mc.batch = static_cast<int>(positive(c, "batch", mc.batch));
  mc.max_paths = static_cast<int>(positive(c, "max_paths", mc.max_paths));
  mc.rel_target = c.number("params", "rel_target", mc.rel_target);
  mc.exit = exit_options(c);
  return mc;
}

// ---- tasks ----

void task_symbol(const ExperimentConfig& c, const StableModel& model, RunResult& res) {
  const int d = model.dim();
  std::vector<Vec> points;
  if (c.has("params", "points")) {
    points = parse_vec_list(c.get("params", "points"), "params.points");
    for (const Vec& u : points)
      if (u.size() != d) config_error("params.points: every point needs " + std::to_string(d) + " coordinates");
  } else {
    for (int i = 0; i < d; ++i) points.push_back(Vec::Unit(d, i));
    points.push_back(Vec::Ones(d));
  }
  Json values = Json::array();
  CsvTable csv(d == 2 ? std::vector<std::string>{"u1", "u2", "phi"} : std::vector<std::string>{"u1", "u2", "u3", "phi"});
  double worst_homogeneity = 0.0;
  for (const Vec& u : points) {
    const double phi = char_exponent(model, u);
    double hom = 0.0;
    for (double s : {0.5, 2.0, 10.0}) {
      const double scaled = char_exponent(model, Vec(s * u));
      if (phi > 0.0) hom = std::max(hom, std::abs(scaled - std::pow(s, model.alpha()) * phi) / phi);
    }
    worst_homogeneity = std::max(worst_homogeneity, hom);
    values.push_back(Json{{"u", to_json(u)}, {"phi", Json{{"value", phi}, {"tol", 1e-10 * std::max(phi, 1.0)}}},
                          {"homogeneity_residual", hom}});
    std::vector<std::string> row;
    for (int i = 0; i < d; ++i) row.push_back(num(u(i)));
    row.push_back(num(phi));
    csv.add(row);
  }
  res.report["values"] = values;
  res.report["homogeneity_residual"] = worst_homogeneity;
  res.headline["phi"] = char_exponent(model, points.front());
  res.headline["homogeneity_residual"] = worst_homogeneity;
  res.csv["symbol.csv"] = csv.str();
}

void task_density(const ExperimentConfig& c, const StableModel& model, RunResult& res) {
  const double t = c.number("params", "t", 1.0);
  if (!(t > 0.0)) config_error("params.t must be positive");
  const TransitionDensityGrid grid = unit_grid(c, model);
  const HeatKernelBound hk = verify_heat_kernel_bound(grid);
  res.report["grid"] = to_json(grid);
  res.report["heat_kernel"] = Json{{"c_est", hk.c_est}, {"worst_node", to_json(hk.worst_node)}};
  res.report["t"] = t;
  const int d = model.dim();
  std::vector<std::string> header{"r"};
  for (int i = 0; i < d; ++i) header.push_back("p_e" + std::to_string(i + 1));
  CsvTable csv(header);
  const double reach = std::min(grid.L - grid.h, 10.0);
  for (double r = 0.0; r <= reach + 1e-12; r += 4.0 * grid.h) {
    std::vector<std::string> row{num(r)};
    for (int i = 0; i < d; ++i) row.push_back(num(density_at(grid, t, Vec(r * Vec::Unit(d, i))).value));
    csv.add(row);
  }
  res.csv["radial.csv"] = csv.str();
  res.headline["mass"] = grid.mass;
  res.headline["ringing"] = grid.ringing;
  res.headline["heat_kernel_c"] = hk.c_est;
  if (std::abs(grid.mass - 1.0) > 1e-3) {
    res.status = RunStatus::Inconclusive;
    res.message = "grid mass differs from 1 by more than 1e-3";
  }
}

void task_green(const ExperimentConfig& c, const StableModel& model, RunResult& res) {
  GreenOptions opts;
  opts.directions = static_cast<int>(c.integer("params", "directions", 0));
  const TransitionDensityGrid grid = unit_grid(c, model);
  const RadialGreenProfile prof = green_profile(model, grid, opts);
  res.report["profile"] = to_json(prof);
  const Vec e1 = Vec::Unit(model.dim(), 0);
  res.report["G_e1"] = green_direction(prof, e1);
  CsvTable csv(model.dim() == 2 ? std::vector<std::string>{"e1", "e2", "G"}
                                : std::vector<std::string>{"e1", "e2", "e3", "G"});
  for (std::size_t i = 0; i < prof.values.size(); ++i) {
    std::vector<std::string> row;
    for (int k = 0; k < model.dim(); ++k) row.push_back(num(prof.directions[i](k)));
    row.push_back(num(prof.values[i]));
    csv.add(row);
  }
  res.csv["green.csv"] = csv.str();
  res.headline["G_e1"] = green_direction(prof, e1);
  res.headline["G_min"] = prof.min_value;
  res.headline["G_max"] = prof.max_value;
  res.headline["tail_fraction"] = prof.tail_fraction;
}

void task_exit(const ExperimentConfig& c, const StableModel& model, RunResult& res) {
  const int d = model.dim();
  const Vec x0 = config_vec(c, "params", "x0", d);
  const double r = c.number("params", "r", 1.0);
  if (!(r > 0.0)) config_error("params.r must be positive");
  const Vec start = config_vec(c, "params", "start", d);
  const int paths = static_cast<int>(positive(c, "paths", 10000));
  const IncrementScheme scheme = build_scheme(model, eps_fraction(c) * r);
  ExitBank bank = make_exit_bank(Ball(x0, r), {start}, c.seed, SeedMode::Independent);
  extend_exit_bank(bank, scheme, paths, exit_options(c));

  std::vector<double> radii, times;
  for (int p = 0; p < paths; ++p) {
    radii.push_back(bank.exits[0][p].norm() / r);
    times.push_back(bank.times[0][p]);
  }
  double mean_t = 0.0, sq = 0.0;
  for (double t : times) mean_t += t;
  mean_t /= paths;
  for (double t : times) sq += (t - mean_t) * (t - mean_t);
  std::vector<double> sorted = radii;
  std::sort(sorted.begin(), sorted.end());
  Json q = Json::object();
  for (double level : {0.1, 0.25, 0.5, 0.75, 0.9})
    q[num(level)] = sorted[static_cast<std::size_t>(level * (paths - 1))];
  res.report["paths"] = paths;
  res.report["eps_cut"] = scheme.eps_cut;
  res.report["mean_exit_time"] = Json{{"value", mean_t}, {"std_err", std::sqrt(sq / (paths - 1) / paths)}};
  res.report["radius_quantiles"] = q;
  res.report["total_steps"] = bank.total_steps;
  res.headline["mean_exit_time"] = mean_t;
  if (model.measure().kind() == SpectralMeasure::Kind::Isotropic && start.norm() == 0.0) {
    const double ks = ks_distance_to(radii, [&](double rho) { return isotropic_exit_radial_cdf(model.alpha(), rho); });
    res.report["ks_to_closed_form"] = ks;
    res.headline["ks"] = ks;
  }
  CsvTable csv({"radius_over_r", "time"});
  for (int p = 0; p < paths; ++p) csv.add({num(radii[p]), num(times[p])});
  res.csv["exits.csv"] = csv.str();
}

std::vector<Vec> lemma1_points(const HarnackParams& p, int count) {
  return spread_points(Ball(p.x0, p.a * p.r), count, 0.02 * p.r);
}

std::vector<Vec> lemma2_points(const HarnackParams& p, int count) {
  return spread_points(Ball(p.x0, p.r / p.theta), count, 0.02 * p.r);
}

std::vector<std::pair<Vec, Vec>> lemma3_pairs(const HarnackParams& p, int count, double delta1) {
  const std::vector<Vec> xs = spread_points(Ball(p.x0, p.r / p.theta), count, 0.02 * p.r);
  const std::vector<Vec> us = spread_points(Ball(p.x0, p.a * p.r), 4 * count, 0.02 * p.r);
  std::vector<std::pair<Vec, Vec>> out;
  std::size_t next = 0;
  for (int i = 0; i < count; ++i) {
    for (std::size_t tries = 0; tries < us.size(); ++tries, ++next) {
      const Vec& u = us[(next * 7 + 3) % us.size()];
      if ((u - xs[i]).norm() >= delta1) {
        out.emplace_back(xs[i], u);
        ++next;
        break;
      }
    }
  }
  // one near-diagonal pair for the remark's constant
  if (!xs.empty()) out.emplace_back(xs.front(), Vec(xs.front() + 0.5 * delta1 * Vec::Unit(p.x0.size(), 0)));
  return out;
}

void lemma_csv(const LemmaReport& rep, RunResult& res) {
  CsvTable csv({"index", "lhs", "std_err", "rhs", "margin", "n_paths", "pass"});
  for (std::size_t i = 0; i < rep.samples.size(); ++i) {
    const LemmaSample& s = rep.samples[i];
    csv.add({std::to_string(i), num(s.lhs), num(s.std_err), num(s.rhs), num(s.margin), std::to_string(s.n_paths),
             s.pass ? "1" : "0"});
  }
  res.csv["samples.csv"] = csv.str();
  res.report["lemma"] = to_json(rep);
  for (const auto& [k, v] : rep.constants) res.headline[k] = v;
  bool all_pass = true;
  for (const LemmaSample& s : rep.samples) all_pass = all_pass && (s.pass || !s.note.empty());
  if (!rep.conclusive || !all_pass) {
    res.status = RunStatus::Inconclusive;
    res.message = "verification inconclusive at this budget";
  }
}

void task_lemma(const ExperimentConfig& c, const StableModel& model, RunResult& res) {
  const HarnackParams p = harnack_params(c, model.dim());
  const McOptions mc = mc_options(c);
  const TransitionDensityGrid grid = unit_grid(c, model);
  const RadialGreenProfile prof = green_profile(model, grid);
  LemmaReport rep;
  if (c.task == "lemma1") {
    rep = verify_lemma1(model, prof, p.x0, p.r, p.lambda, p.a, lemma1_points(p, static_cast<int>(positive(c, "samples", 20))),
                        mc);
  } else if (c.task == "lemma2") {
    rep = verify_lemma2(model, prof, p.x0, p.r, p.theta, p.a, lemma2_points(p, static_cast<int>(positive(c, "samples", 5))),
                        mc);
  } else {
    const double delta1 = c.number("params", "delta1", 0.1 * p.r);
    if (!(delta1 > 0.0)) config_error("params.delta1 must be positive");
    rep = verify_lemma3(model, prof, p.x0, p.r, p.lambda, p.theta, p.a, delta1,
                        lemma3_pairs(p, static_cast<int>(positive(c, "pairs", 20)), delta1), mc);
  }
  lemma_csv(rep, res);
}

ExteriorFunction smooth_exterior(const HarnackParams& p) {
  ExteriorTerm t;
  t.kind = ExteriorTerm::Kind::Linear;
  t.family = "linear";
  t.center = p.x0;
  t.slope = Vec::Unit(p.x0.size(), 0);
  t.amplitude = 1.0;
  t.scale = 5.0 * p.r;
  t.offset = t.amplitude * t.scale;
  return ExteriorFunction({t});
}

Json member_json(const EnsembleMember& m) {
  return Json{{"family", m.family}, {"g", m.description}, {"report", to_json(m.report)}};
}

void task_harnack(const ExperimentConfig& c, const StableModel& model, RunResult& res) {
  const HarnackParams p = harnack_params(c, model.dim());
  p.validate();
  const std::string g = c.get("params", "g", "ensemble");
  res.report["params"] = to_json(p);
  if (g == "constant") {
    const double spacing = c.number("params", "spacing", 0.1) * p.r;
    std::vector<Vec> offsets;
    for (const Vec& v : ball_lattice(Ball(Vec::Zero(model.dim()), p.r), spacing))
      if (v.norm() < p.r * (1.0 - 1e-9)) offsets.push_back(v);
    const ExteriorFunction one = ExteriorFunction::constant(model.dim(), 1.0);
    const HarmonicField f = harmonic_extend(model, one, Ball(p.x0, p.r), offsets,
                                            static_cast<int>(positive(c, "paths", 100)), c.seed,
                                            SeedMode::Common, eps_fraction(c));
    const HarnackReport rep = verify_weak_harnack(model, f, one, p);
    res.report["g"] = one.describe();
    res.report["report"] = to_json(rep);
    res.headline["c_est"] = rep.c_est;
    res.headline["c1"] = rep.c_est;
    return;
  }
  if (g != "ensemble") config_error("params.g must be 'ensemble' or 'constant' for task harnack");
  EnsembleOptions opts;
  opts.size = static_cast<int>(positive(c, "ensemble", 50));
  opts.paths = static_cast<int>(positive(c, "paths", 2000));
  opts.spacing_fraction = c.number("params", "spacing", 0.1);
  opts.seed = c.seed;
  opts.eps_fraction = eps_fraction(c);
  const HarnackConstant hc = estimate_harnack_constant(model, p, opts);
  const int n_signed = static_cast<int>(c.integer("params", "signed", 20));
  const std::vector<SignedTrial> trials =
      n_signed > 0 ? signed_trials(model, p, hc.c1, hc.bank, n_signed, c.seed) : std::vector<SignedTrial>{};

  Json members = Json::array();
  CsvTable ens({"index", "family", "avg", "avg_err", "inf", "inf_err", "tail", "c_est", "c_err"});
  int vacuous = 0;
  for (std::size_t i = 0; i < hc.members.size(); ++i) {
    const EnsembleMember& m = hc.members[i];
    members.push_back(member_json(m));
    vacuous += m.report.vacuous;
    ens.add({std::to_string(i), m.family, num(m.report.avg_term), num(m.report.avg_err), num(m.report.inf_term),
             num(m.report.inf_err), num(m.report.tail_term), num(m.report.c_est), num(m.report.c_err)});
  }
  Json signed_json = Json::array();
  CsvTable sig({"index", "lhs", "rhs", "combined_sigma", "tail", "holds", "within_noise", "halvings"});
  int holds = 0, beyond_noise = 0;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const SignedTrial& t = trials[i];
    signed_json.push_back(to_json(t));
    holds += t.holds;
    beyond_noise += !t.holds && !t.within_noise;
    sig.add({std::to_string(i), num(t.lhs), num(t.rhs), num(t.combined_sigma), num(t.report.tail_term),
             t.holds ? "1" : "0", t.within_noise ? "1" : "0", std::to_string(t.halvings)});
  }
  const double rate = trials.empty() ? 1.0 : double(holds) / trials.size();
  res.report["c1"] = Json{{"value", hc.c1}, {"members", opts.size}, {"paths", hc.bank.paths()},
                          {"nodes", hc.bank.starts.size()}};
  res.report["members"] = members;
  res.report["signed"] = signed_json;
  res.report["signed_pass_rate"] = rate;
  res.report["signed_failures_beyond_noise"] = beyond_noise;
  res.report["vacuous_members"] = vacuous;
  res.csv["ensemble.csv"] = ens.str();
  res.csv["signed.csv"] = sig.str();
  res.headline["c1"] = hc.c1;
  res.headline["signed_pass_rate"] = rate;
  if (rate < 0.95 || beyond_noise > 0 || vacuous > 0) {
    res.status = RunStatus::Inconclusive;
    res.message = "signed trials or ensemble members did not confirm the inequality";
  }
}

void task_hoelder(const ExperimentConfig& c, const StableModel& model, RunResult& res) {
  const int d = model.dim();
  const HarnackParams p = harnack_params(c, d);
  p.validate();
  res.report["params"] = to_json(p);
  double c1 = c.number("params", "c1", 0.0);
  if (!c.has("params", "c1")) {
    EnsembleOptions opts;
    opts.size = static_cast<int>(positive(c, "harnack_ensemble", 50));
    opts.paths = static_cast<int>(positive(c, "harnack_paths", 2000));
    opts.seed = c.seed;
    opts.eps_fraction = eps_fraction(c);
    c1 = estimate_harnack_constant(model, p, opts).c1;
    res.report["c1_source"] = "ensemble";
  } else {
    res.report["c1_source"] = "config";
  }
  const HoelderConstants hc = hoelder_constants(c1, p.theta);
  res.report["constants"] = Json{{"c1", c1}, {"kappa", hc.kappa}, {"beta_theory", hc.beta_theory}};

  const int levels = static_cast<int>(positive(c, "levels", 5));
  const NestedLattice lattice = nested_lattice(p, levels, static_cast<int>(positive(c, "nodes_per_radius", 8)));
  const IncrementScheme scheme = build_scheme(model, eps_fraction(c) * p.r);
  ExitBank bank = make_exit_bank(Ball(p.x0, p.r), lattice.offsets, c.seed, SeedMode::Common);
  extend_exit_bank(bank, scheme, static_cast<int>(positive(c, "paths", 1000)), exit_options(c));
  const ExitFunctional exits(model, bank);

  std::vector<ExteriorFunction> gs;
  const std::string which = c.get("params", "g", "ensemble");
  if (which == "linear") {
    gs.push_back(smooth_exterior(p));
  } else if (which == "constant") {
    gs.push_back(ExteriorFunction::constant(d, 1.0));
  } else if (which == "ensemble") {
    Rng rng = make_stream(mix_seed(c.seed, 0x686f656c646572ULL), 0);
    static const char* families[] = {"shell", "bump", "spike"};
    const int n = static_cast<int>(positive(c, "ensemble", 10));
    for (int i = 0; i < n; ++i) gs.push_back(random_exterior(families[i % 3], p, rng));
  } else {
    config_error("params.g must be 'ensemble', 'linear' or 'constant' for task hoelder");
  }

  Json runs = Json::array();
  CsvTable osc({"g_index", "n", "log_radius", "osc", "osc_se", "log_osc"});
  double min_beta = std::numeric_limits<double>::infinity();
  bool sandwich = true, fit_ok = true;
  for (std::size_t i = 0; i < gs.size(); ++i) {
    const NestedField nf = nested_field(exits, lattice, gs[i], p);
    const HoelderIteration it = run_oscillation_iteration(nf, gs[i], c1);
    Json run{{"g", gs[i].describe()}, {"iteration", to_json(it)}};
    sandwich = sandwich && it.sandwich_ok;
    try {
      const HoelderFit fit = estimate_hoelder_exponent(nf);
      run["fit"] = to_json(fit);
      min_beta = std::min(min_beta, fit.beta_fit);
      if (fit.beta_fit < hc.beta_theory - 0.02) fit_ok = false;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Precondition) throw;
      run["fit_error"] = e.what();
    }
    for (int n = 0; n <= nf.levels; ++n)
      osc.add({std::to_string(i), std::to_string(n), num(std::log(p.r) - n * std::log(p.theta)), num(nf.osc[n]),
               num(nf.osc_se[n]), nf.osc[n] > 0.0 ? num(std::log(nf.osc[n])) : "nan"});
    runs.push_back(run);
  }
  res.report["runs"] = runs;
  res.report["levels"] = levels;
  res.report["nodes"] = bank.starts.size();
  res.report["paths"] = bank.paths();
  res.csv["oscillation.csv"] = osc.str();
  res.headline["beta_theory"] = hc.beta_theory;
  res.headline["kappa"] = hc.kappa;
  res.headline["c1"] = c1;
  if (std::isfinite(min_beta)) res.headline["beta_fit"] = min_beta;
  res.headline["sandwich_ok"] = sandwich ? 1.0 : 0.0;
  if (!sandwich || !fit_ok) {
    res.status = RunStatus::Inconclusive;
    res.message = !sandwich ? "sandwich check failed at some level" : "beta_fit below beta_theory - 0.02";
  }
}

void task_tail(const ExperimentConfig& c, const StableModel& model, RunResult& res) {
  const HarnackParams p = harnack_params(c, model.dim());
  const int k = static_cast<int>(positive(c, "k", 3));
  const int J = static_cast<int>(positive(c, "J", 6));
  const TailDecayReport rep = annulus_tail_decay(model, p, k, J);
  res.report["params"] = to_json(p);
  res.report["decay"] = to_json(rep);
  res.report["theta_pow_alpha"] = std::pow(p.theta, model.alpha());
  CsvTable csv({"j", "eta", "log_eta"});
  for (int j = 1; j <= J; ++j) csv.add({std::to_string(j), num(rep.eta[j - 1]), num(std::log(rep.eta[j - 1]))});
  res.csv["tail.csv"] = csv.str();
  res.headline["zeta_fit"] = rep.zeta_fit;
  res.headline["c_fit"] = rep.c_fit;
  res.headline["max_residual"] = rep.max_residual;
  if (!rep.geometric) {
    res.status = RunStatus::Inconclusive;
    res.message = "annulus masses deviate from a geometric law by more than 10%";
  }
}

Json config_echo(const ExperimentConfig& c) {
  Json j = Json::object();
  for (const auto& [section, keys] : c.sections)
    for (const auto& [k, v] : keys) j[section][k] = v;
  return j;
}

const char* status_name(RunStatus s) {
  switch (s) {
    case RunStatus::Ok:
      return "ok";
    case RunStatus::Inconclusive:
      return "inconclusive";
    default:
      return "error";
  }
}

}  // namespace

std::string ExperimentConfig::get(const std::string& section, const std::string& key,
                                  const std::string& fallback) const {
  const auto s = sections.find(section);
  if (s == sections.end()) return fallback;
  const auto k = s->second.find(key);
  return k == s->second.end() ? fallback : k->second;
}

bool ExperimentConfig::has(const std::string& section, const std::string& key) const {
  const auto s = sections.find(section);
  return s != sections.end() && s->second.count(key) > 0;
}

double ExperimentConfig::number(const std::string& section, const std::string& key, double fallback) const {
  return has(section, key) ? parse_number(get(section, key), section + "." + key) : fallback;
}

long ExperimentConfig::integer(const std::string& section, const std::string& key, long fallback) const {
  if (!has(section, key)) return fallback;
  const double v = parse_number(get(section, key), section + "." + key);
  if (v != std::floor(v) || std::abs(v) > 9e15) config_error(section + "." + key + " must be an integer");
  return static_cast<long>(v);
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    config_error((source.empty() ? std::string("config") : source) + ": " + e.message() + " (line " +
                 std::to_string(e.line()) + ")");
  }
  ExperimentConfig c;
  c.source = source;
  for (const auto& [section, body] : tree) {
    if (!kSectionKeys.count(section)) {
      if (body.empty()) config_error("key '" + section + "' outside any section");
      config_error("unknown section [" + section + "]");
    }
    for (const auto& [key, value] : body) c.sections[section][key] = value.get_value<std::string>();
  }
  c.task = c.get("task", "name");
  if (c.task.empty()) config_error("[task] name is required");
  if (!kTasks.count(c.task)) config_error("unknown task '" + c.task + "'");
  for (const auto& [section, keys] : c.sections) {
    for (const auto& [key, value] : keys) {
      bool known = kSectionKeys.at(section).count(key) > 0;
      if (section == "params") known = kGeometryKeys.count(key) || kTaskKeys.at(c.task).count(key);
      if (!known) config_error("unknown key '" + key + "' in [" + section + "] for task " + c.task);
    }
  }
  if (c.has("task", "seed")) {
    const std::string s = c.get("task", "seed");
    try {
      std::size_t used = 0;
      c.seed = std::stoull(s, &used, 0);
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      config_error("task.seed: '" + s + "' is not a 64-bit unsigned integer");
    }
  }
  c.output_dir = c.get("output", "dir", "out");
  const std::string csv = c.get("output", "csv", "true");
  if (csv != "true" && csv != "false") config_error("output.csv must be true or false");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

StableModel build_model(const ExperimentConfig& c) {
  const long d = c.integer("model", "dim", 2);
  if (d != 2 && d != 3) throw Error(ErrorKind::DimensionNotImplemented, "model.dim must be 2 or 3");
  const double alpha = c.number("model", "alpha", 1.0);
  const std::string kind = c.get("model", "measure", "isotropic");
  const double level = c.number("model", "level", 1.0);
  const double aniso = c.number("model", "anisotropy", 0.5);
  const int quadrature = static_cast<int>(c.integer("model", "quadrature", 0));
  if (!(level > 0.0)) config_error("model.level must be positive");
  std::ostringstream label;
  label.precision(17);
  if (kind == "isotropic") return StableModel(static_cast<int>(d), alpha, SpectralMeasure::isotropic(level), quadrature);
  if (kind == "quadratic") {
    if (aniso < 0.0) config_error("model.anisotropy must be >= 0 for the quadratic measure");
    label << "quadratic(level=" << level << ",a=" << aniso << ")";
    auto f = [level, aniso](const Vec& xi) { return level * (1.0 + aniso * xi(0) * xi(0)); };
    return StableModel(static_cast<int>(d), alpha, SpectralMeasure::density(f, level * (1.0 + aniso), label.str()),
                       quadrature);
  }
  if (kind == "trig") {
    if (d != 2) throw Error(ErrorKind::DimensionNotImplemented, "the trig measure is defined for d = 2 only");
    const long k = c.integer("model", "harmonic", 2);
    if (k < 0 || k % 2 != 0) config_error("model.harmonic must be an even nonnegative integer (symmetry)");
    if (std::abs(aniso) > 1.0) config_error("model.anisotropy must lie in [-1, 1] for the trig measure");
    label << "trig(level=" << level << ",a=" << aniso << ",k=" << k << ")";
    auto f = [level, aniso, k](const Vec& xi) { return level * (1.0 + aniso * std::cos(k * std::atan2(xi(1), xi(0)))); };
    return StableModel(2, alpha, SpectralMeasure::density(f, level * (1.0 + std::abs(aniso)), label.str()), quadrature);
  }
  if (kind == "atomic") {
    std::vector<SpectralMeasure::Atom> atoms;
    for (int i = 0; i < d; ++i) {
      atoms.push_back({Vec(Vec::Unit(d, i)), level});
      atoms.push_back({Vec(-Vec::Unit(d, i)), level});
    }
    label << "axes(level=" << level << ")";
    return StableModel(static_cast<int>(d), alpha, SpectralMeasure::atomic(atoms, label.str()), quadrature);
  }
  config_error("model.measure must be isotropic, quadratic, trig or atomic");
}

void validate_config(const ExperimentConfig& c) {
  const StableModel model = build_model(c);
  const int d = model.dim();
  eps_fraction(c);
  exit_options(c);
  if (c.task == "lemma1" || c.task == "lemma2" || c.task == "lemma3" || c.task == "harnack" || c.task == "hoelder" ||
      c.task == "tail")
    harnack_params(c, d).validate();
  if (c.has("params", "x0")) config_vec(c, "params", "x0", d);
  for (const auto& [key, value] : c.sections.count("params") ? c.sections.at("params")
                                                             : std::map<std::string, std::string>{}) {
    if (key == "x0" || key == "start") {
      config_vec(c, "params", key, d);
    } else if (key == "points") {
      parse_vec_list(value, "params.points");
    } else if (key != "g") {
      parse_number(value, "params." + key);
    }
  }
  if (c.has("params", "c1")) hoelder_constants(c.number("params", "c1", 0.0), harnack_params(c, d).theta);
  if (c.task == "density" || c.task == "green" || c.task == "lemma1" || c.task == "lemma2" || c.task == "lemma3") {
    const double h = c.number("grid", "h", default_spacing(d));
    const double L = c.number("grid", "L", default_extent(d));
    if (!(h > 0.0 && L > h)) config_error("grid needs 0 < h < L");
  }
}

RunResult execute(const ExperimentConfig& c) {
  RunResult res;
  const StableModel model = build_model(c);
  res.report = Json{{"task", c.task}, {"seed", c.seed}, {"model", to_json(model)}};
  if (c.task == "symbol") task_symbol(c, model, res);
  else if (c.task == "density") task_density(c, model, res);
  else if (c.task == "green") task_green(c, model, res);
  else if (c.task == "exit") task_exit(c, model, res);
  else if (c.task == "lemma1" || c.task == "lemma2" || c.task == "lemma3") task_lemma(c, model, res);
  else if (c.task == "harnack") task_harnack(c, model, res);
  else if (c.task == "hoelder") task_hoelder(c, model, res);
  else task_tail(c, model, res);
  res.report["status"] = status_name(res.status);
  if (!res.message.empty()) res.report["message"] = res.message;
  return res;
}

RunResult run_experiment(const ExperimentConfig& c, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  std::uint64_t hash = 0;
  try {
    validate_config(c);
    hash = build_model(c).hash();
    res = execute(c);
  } catch (const Error& e) {
    res.status = RunStatus::Error;
    res.message = e.what();
    res.report = Json{{"task", c.task}, {"seed", c.seed}, {"status", "error"}, {"message", e.what()},
                      {"error_kind", to_string(e.kind())}};
  } catch (const std::exception& e) {
    res.status = RunStatus::Error;
    res.message = e.what();
    res.report = Json{{"task", c.task}, {"seed", c.seed}, {"status", "error"}, {"message", e.what()}};
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  Json manifest{{"config", config_echo(c)},
                {"source", c.source},
                {"task", c.task},
                {"seed", c.seed},
                {"model_hash", hex64(hash)},
                {"status", status_name(res.status)},
                {"wall_time_s", wall},
                {"threads", default_thread_count()},
                {"versions",
                 Json{{"stableharnack", kVersion},
                      {"compiler", __VERSION__},
                      {"boost", BOOST_LIB_VERSION},
                      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                    std::to_string(EIGEN_MINOR_VERSION)}}}};
  try {
    std::filesystem::create_directories(c.output_dir);
    write_text(c.output_dir + "/manifest.json", manifest.dump(2) + "\n");
    write_text(c.output_dir + "/report.json", res.report.dump(2) + "\n");
    if (c.get("output", "csv", "true") == "true")
      for (const auto& [name, text] : res.csv) write_text(c.output_dir + "/" + name, text);
  } catch (const std::exception& e) {
    res.status = RunStatus::Error;
    res.message = std::string("writing outputs: ") + e.what();
  }
  log << c.task << ": " << status_name(res.status);
  if (!res.message.empty()) log << " (" << res.message << ")";
  log << " -> " << c.output_dir << "\n";
  return res;
}

std::vector<std::string> expand_glob(const std::string& pattern) {
  glob_t g{};
  std::vector<std::string> out;
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  if (rc == 0)
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  globfree(&g);
  if (rc != 0 && rc != GLOB_NOMATCH) throw Error(ErrorKind::Io, "glob failed for " + pattern);
  std::sort(out.begin(), out.end());
  return out;
}

int run_sweep(const std::vector<std::string>& paths, const std::string& table_path, std::ostream& out,
              std::ostream& log) {
  std::vector<ExperimentConfig> configs;
  for (const std::string& p : paths) configs.push_back(load_config(p));
  for (const ExperimentConfig& c : configs)
    if (c.task != configs.front().task)
      throw Error(ErrorKind::Config, "sweep needs a single task; found '" + configs.front().task + "' and '" + c.task + "'");

  std::vector<RunResult> results;
  std::set<std::string> keys;
  for (const ExperimentConfig& c : configs) {
    results.push_back(run_experiment(c, log));
    for (const auto& [k, v] : results.back().headline) keys.insert(k);
  }
  std::vector<std::string> header{"config", "task", "status", "message"};
  header.insert(header.end(), keys.begin(), keys.end());
  CsvTable table(header);
  for (std::size_t i = 0; i < configs.size(); ++i) {
    std::vector<std::string> row{configs[i].source, configs[i].task, status_name(results[i].status),
                                 results[i].message};
    for (const std::string& k : keys) {
      const auto it = results[i].headline.find(k);
      row.push_back(it == results[i].headline.end() ? "" : num(it->second));
    }
    table.add(row);
  }
  out << table.str();
  if (!table_path.empty()) {
    const std::filesystem::path parent = std::filesystem::path(table_path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    write_text(table_path, table.str());
  }
  return 0;
}

}  // namespace stable
