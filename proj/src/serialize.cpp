#include "stable/serialize.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace stable {

namespace {

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

// Each MC quantity is paired with its std error, each quadrature quantity with a tolerance.
Json measured(double value, double std_err) { return Json{{"value", number(value)}, {"std_err", number(std_err)}}; }
Json computed(double value, double tol) { return Json{{"value", number(value)}, {"tol", number(tol)}}; }

}  // namespace

std::string num(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

Json to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

Json to_json(const StableModel& model) {
  return Json{{"dim", model.dim()},
              {"alpha", model.alpha()},
              {"measure", model.measure().label()},
              {"description", model.description()},
              {"hash", hex64(model.hash())},
              {"levy_norm", number(model.levy_norm())},
              {"total_mass", number(model.total_mass())},
              {"phi_min", number(model.phi_min())},
              {"phi_max", number(model.phi_max())}};
}

Json to_json(const TransitionDensityGrid& grid) {
  return Json{{"dim", grid.dim},
              {"alpha", grid.alpha},
              {"t", grid.t_ref},
              {"L", grid.L},
              {"h", grid.h},
              {"n", grid.n},
              {"fold_levels", grid.fold_levels},
              {"model_hash", hex64(grid.model_hash)},
              {"mass", computed(grid.mass, grid.ringing)},
              {"cell_mass", number(grid.cell_mass)},
              {"ringing", number(grid.ringing)},
              {"heat_kernel_c", number(grid.heat_kernel_c)}};
}

Json to_json(const RadialGreenProfile& p) {
  Json values = Json::array();
  for (std::size_t i = 0; i < p.values.size(); ++i)
    values.push_back(Json{{"direction", to_json(p.directions[i])}, {"G", number(p.values[i])}});
  return Json{{"dim", p.dim},
              {"alpha", p.alpha},
              {"n_polar", p.n_polar},
              {"n_azimuth", p.n_azimuth},
              {"t_split", number(p.t_split)},
              {"tail_fraction", number(p.tail_fraction)},
              {"min", number(p.min_value)},
              {"max", number(p.max_value)},
              {"values", values}};
}

Json to_json(const LemmaReport& rep) {
  Json samples = Json::array();
  for (const LemmaSample& s : rep.samples) {
    Json pts = Json::array();
    for (const Vec& v : s.points) pts.push_back(to_json(v));
    Json j{{"points", pts},
           {"lhs", measured(s.lhs, s.std_err)},
           {"rhs", number(s.rhs)},
           {"margin", number(s.margin)},
           {"n_paths", s.n_paths},
           {"pass", s.pass}};
    if (!s.note.empty()) j["note"] = s.note;
    samples.push_back(j);
  }
  Json constants = Json::object(), params = Json::object();
  for (const auto& [k, v] : rep.constants) constants[k] = number(v);
  for (const auto& [k, v] : rep.params) params[k] = number(v);
  return Json{{"lemma", rep.lemma_id},
              {"constants", constants},
              {"params", params},
              {"samples", samples},
              {"log", rep.log},
              {"conclusive", rep.conclusive}};
}

Json to_json(const HarnackParams& p) {
  return Json{{"x0", to_json(p.x0)},  {"r", p.r},         {"r0", p.r0}, {"lambda", p.lambda},
              {"theta", p.theta},     {"sigma", p.sigma_ratio}, {"a", p.a}, {"c0", p.c0()}};
}

Json to_json(const HarnackReport& r) {
  Json j{{"avg", measured(r.avg_term, r.avg_err)},
         {"inf", measured(r.inf_term, r.inf_err)},
         {"tail", computed(r.tail_term, r.tail_tol)},
         {"c_est", measured(r.c_est, r.c_err)},
         {"vacuous", r.vacuous},
         {"inf_node", to_json(r.inf_node)},
         {"tail_argmax", to_json(r.tail_argmax)},
         {"avg_nodes", r.avg_nodes},
         {"inf_nodes", r.inf_nodes},
         {"tail_points", r.tail_points},
         {"sigma", r.sigma_ratio},
         {"c0", r.c0}};
  if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
  return j;
}

Json to_json(const SignedTrial& t) {
  return Json{{"g", t.description},
              {"report", to_json(t.report)},
              {"lhs", number(t.lhs)},
              {"rhs", number(t.rhs)},
              {"combined_sigma", number(t.combined_sigma)},
              {"holds", t.holds},
              {"within_noise", t.within_noise},
              {"halvings", t.halvings}};
}

Json to_json(const HoelderIteration& it) {
  Json levels = Json::array();
  for (const IterationLevel& l : it.case_log)
    levels.push_back(Json{{"k", l.k},
                          {"m", number(l.m)},
                          {"M", number(l.M)},
                          {"case", l.which_case},
                          {"fraction_nonpositive", number(l.fraction_nonpositive)},
                          {"sandwich_violations", l.sandwich_violations},
                          {"worst_excess_sigma", number(l.worst_excess)},
                          {"envelope_violations", l.envelope_violations},
                          {"envelope_checked", l.envelope_checked}});
  Json m = Json::array(), M = Json::array();
  for (double v : it.m) m.push_back(number(v));
  for (double v : it.M) M.push_back(number(v));
  Json j{{"c1", number(it.c1_in)},
         {"kappa", number(it.kappa)},
         {"beta_theory", number(it.beta_theory)},
         {"K", number(it.K)},
         {"m", m},
         {"M", M},
         {"levels", levels},
         {"width_residual", number(it.width_residual)},
         {"sandwich_ok", it.sandwich_ok},
         {"envelope_ok", it.envelope_ok}};
  if (!it.diagnostic.empty()) j["diagnostic"] = it.diagnostic;
  return j;
}

Json to_json(const HoelderFit& f) {
  Json osc = Json::array();
  for (std::size_t n = 0; n < f.osc.size(); ++n) osc.push_back(measured(f.osc[n], f.noise[n] / 3.0));
  return Json{{"beta_fit", number(f.beta_fit)}, {"osc", osc}, {"levels_used", f.levels_used}};
}

Json to_json(const TailDecayReport& r) {
  Json eta = Json::array();
  for (double v : r.eta) eta.push_back(number(v));
  return Json{{"k", r.k},
              {"eta", eta},
              {"zeta_fit", number(r.zeta_fit)},
              {"c_fit", number(r.c_fit)},
              {"max_residual", number(r.max_residual)},
              {"geometric", r.geometric},
              {"sup_points", r.sup_points}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path + " for writing");
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write to " + path + " failed");
}

void CsvTable::add(std::vector<std::string> row) {
  row.resize(header_.size());
  rows_.push_back(std::move(row));
}

std::string CsvTable::str() const {
  auto cell = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  std::ostringstream os;
  for (std::size_t i = 0; i < header_.size(); ++i) os << (i ? "," : "") << cell(header_[i]);
  os << "\n";
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << cell(row[i]);
    os << "\n";
  }
  return os.str();
}

}  // namespace stable
