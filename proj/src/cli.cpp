#include "medcal/cli.hpp"

#include "medcal/inference.hpp"
#include "medcal/tuning.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace medcal::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\"");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

bool parse_double(const std::string& s, double& value) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  value = std::strtod(s.c_str(), &end);
  return errno == 0 && end == s.c_str() + s.size() && std::isfinite(value);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

json optional_number(const VectorXd& v, Index k) {
  if (v.size() == 0) return nullptr;
  return v(k);
}

std::string csv_number(const VectorXd& v, Index k) { return v.size() == 0 ? "" : fmt(v(k)); }

bool wants_csv(const RunConfig& c) {
  if (c.format == "csv") return true;
  if (c.format == "json") return false;
  if (c.format != "auto") throw std::invalid_argument("unknown output format '" + c.format + "'");
  return c.output.size() >= 4 && c.output.substr(c.output.size() - 4) == ".csv";
}

void emit(const RunConfig& c, const std::string& text, std::ostream& out) {
  if (c.output.empty()) {
    out << text;
    return;
  }
  std::ofstream f(c.output, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open output file '" + c.output + "'");
  f << text;
  if (!f) throw std::runtime_error("failed writing output file '" + c.output + "'");
}

std::string csv_header(const RunConfig& c) { return "# " + json{{"config", to_json(c)}}.dump() + "\n"; }

std::vector<double> default_grid_for(const Dataset& d, double t_prime) {
  if (d.kind == TreatmentKind::discrete) {
    std::vector<double> g;
    for (double l : d.levels) {
      if (l != t_prime) g.push_back(l);
    }
    return g;
  }
  std::vector<double> sorted(d.t.data(), d.t.data() + d.t.size());
  std::sort(sorted.begin(), sorted.end());
  auto q = [&](double p) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  const double a = q(0.1), b = q(0.9);
  std::vector<double> g;
  for (int k = 0; k <= 16; ++k) g.push_back(a + (b - a) * k / 16.0);
  return g;
}

struct Resolved {
  SieveDims dims;
  bool k0_fixed = false;
  std::vector<int> k0_candidates;
  KernelFamily kernel = KernelFamily::epanechnikov2;
  double bandwidth_constant = 0.0;
  std::vector<double> grid;
  double t_prime = 0.0;
  json tuning = json::object();
};

Resolved resolve(const RunConfig& c, const Dataset& d) {
  Resolved r;
  TuningGrid tg;
  r.k0_candidates = tg.k0_candidates;
  r.kernel = kernel_family_from_string(c.kernel);
  r.bandwidth_constant = c.bandwidth_constant;
  r.t_prime = c.t_prime;
  r.grid = c.grid.empty() ? default_grid_for(d, c.t_prime) : parse_grid(c.grid);
  if (r.grid.empty()) throw std::invalid_argument("empty evaluation grid");

  r.dims = SieveDims{c.k1, c.kx, c.kmx, c.k0};
  if (c.k1 > 0) tg.k1_candidates = {c.k1};
  if (c.kx > 0) tg.kx_candidates = {c.kx};
  if (c.kmx > 0) tg.kmx_candidates = {c.kmx};
  if (c.k1 <= 0 || c.kx <= 0 || c.kmx <= 0) {
    const WeightDims w = select_weight_dims(d, tg);
    r.dims.k1 = w.k1;
    r.dims.kx = w.kx;
    r.dims.kmx = w.kmx;
    json audit = json::array();
    for (const auto& a : w.audit) {
      audit.push_back({{"weight", a.which == WeightTarget::x ? "x" : "mx"},
                       {"k1", a.k1},
                       {"kz", a.kz},
                       {"gcv", std::isfinite(a.value) ? json(a.value) : json(nullptr)}});
    }
    r.tuning["gcv"] = audit;
  }
  r.k0_fixed = c.k0 > 0;
  if (!r.k0_fixed) r.dims.k0 = r.k0_candidates.front();
  return r;
}

std::vector<EffectCurve> estimate_method(const std::string& method, const Dataset& d, const Resolved& r,
                                         const SolverOptions& solver, std::optional<MediationFit>* keep_fit = nullptr) {
  const auto& panels = all_panels();
  if (method == "ols") {
    const OlsFit f = ols_baseline(d);
    return effect_curves([&](double a, double b) { return f.mu(a, b); }, r.grid, r.t_prime, method, panels);
  }
  if (method == "ipw") {
    const IpwFit f = ipw_binary_baseline(d);
    return effect_curves([&](double a, double b) { return f.mu(a, b); }, r.grid, r.t_prime, method, panels);
  }
  if (method != "cbs" && method != "cbk") throw std::invalid_argument("unknown method '" + method + "'");
  MediationFit fit = fit_mediation(d, r.dims, solver);
  if (!fit.converged()) throw std::runtime_error("calibration did not converge");
  std::vector<EffectCurve> curves;
  if (method == "cbs") {
    CbsEstimator est(fit, CbsOptions{r.k0_fixed ? r.dims.k0 : 0, r.k0_candidates});
    curves = effect_curves([&](double a, double b) { return est.mu(a, b); }, r.grid, r.t_prime, method, panels);
  } else {
    const double h = select_bandwidth(d.n(), r.bandwidth_constant, r.kernel);
    CbkEstimator est(fit, KernelSpec{r.kernel, h});
    curves = effect_curves([&](double a, double b) { return est.mu(a, b); }, r.grid, r.t_prime, method, panels);
  }
  if (keep_fit) keep_fit->emplace(std::move(fit));
  return curves;
}

json curve_rows(const std::vector<EffectCurve>& curves) {
  json rows = json::array();
  for (const auto& c : curves) {
    for (std::size_t g = 0; g < c.grid.size(); ++g) {
      const Index k = static_cast<Index>(g);
      rows.push_back({{"method", c.method},
                      {"panel", to_string(c.panel)},
                      {"t", c.grid[g]},
                      {"t_prime", c.t_prime},
                      {"estimate", c.estimate(k)},
                      {"se", optional_number(c.se, k)},
                      {"ci_low", optional_number(c.ci_low, k)},
                      {"ci_high", optional_number(c.ci_high, k)}});
    }
  }
  return rows;
}

json calibration_summary(const CalibrationFit& f, const CalibrationProblem& p) {
  const VectorXd& w = f.in_sample_weights;
  return {{"k1", p.k1()},
          {"kz", p.kz()},
          {"converged", f.converged},
          {"iterations", f.iterations},
          {"grad_norm", f.grad_norm},
          {"min", w.minCoeff()},
          {"max", w.maxCoeff()},
          {"mean", w.mean()},
          {"balancing_residual", balancing_residual(p, w)},
          {"clipped_scores", f.clipped_scores},
          {"ridge_events", f.ridge_events}};
}

std::string run_estimate(const RunConfig& c) {
  const Dataset d = ingest_csv(c.input, c.columns, treatment_kind_from_string(c.treatment));
  const Resolved r = resolve(c, d);
  const SolverOptions solver;
  std::vector<EffectCurve> all;
  json diag = {{"n", d.n()},
               {"dims", {{"k1", r.dims.k1}, {"kx", r.dims.kx}, {"kmx", r.dims.kmx}}},
               {"tuning", r.tuning}};
  for (const auto& method : c.methods) {
    std::optional<MediationFit> fit;
    std::vector<EffectCurve> curves = estimate_method(method, d, r, solver, &fit);
    json md = json::object();
    if (method == "cbs") {
      CbsEstimator est(*fit, CbsOptions{r.k0_fixed ? r.dims.k0 : 0, r.k0_candidates});
      PluginNuisances nuis(*fit, c.density_constant);
      CbsInference inf(est, nuis);
      attach_plugin_se(curves, inf);
      json k0 = json::object();
      Index extrapolated = 0;
      for (double t : r.grid) {
        for (double delta : {0.0, r.t_prime - t, t - r.t_prime}) {
          k0[fmt(delta)] = est.series(delta).k0;
          extrapolated = std::max(extrapolated, est.weights().at(delta).extrapolated);
        }
      }
      md["k0_by_shift"] = k0;
      md["max_extrapolated_shifted_treatments"] = extrapolated;
      md["density_floor_hits"] = nuis.floored();
    }
    if (fit) {
      md["weights_x"] = calibration_summary(fit->fit_x, fit->problem_x);
      md["weights_mx"] = calibration_summary(fit->fit_mx, fit->problem_mx);
    }
    if (method == "cbk") md["bandwidth"] = select_bandwidth(d.n(), r.bandwidth_constant, r.kernel);
    if (c.bootstrap > 0) {
      const BootstrapResult b = bootstrap_ci(
          [&](const Dataset& sample) { return estimate_method(method, sample, r, solver); }, d, c.bootstrap, c.seed,
          c.threads);
      for (std::size_t k = 0; k < curves.size(); ++k) {
        curves[k].ci_low = b.curves[k].ci_low;
        curves[k].ci_high = b.curves[k].ci_high;
      }
      md["bootstrap"] = {{"replicates", b.replicates}, {"dropped", b.dropped}};
    }
    diag[method] = md;
    all.insert(all.end(), curves.begin(), curves.end());
  }

  if (wants_csv(c)) {
    std::ostringstream os;
    os << csv_header(c) << "method,panel,t,t_prime,estimate,se,ci_low,ci_high\n";
    for (const auto& cv : all) {
      for (std::size_t g = 0; g < cv.grid.size(); ++g) {
        const Index k = static_cast<Index>(g);
        os << cv.method << ',' << to_string(cv.panel) << ',' << fmt(cv.grid[g]) << ',' << fmt(cv.t_prime) << ','
           << fmt(cv.estimate(k)) << ',' << csv_number(cv.se, k) << ',' << csv_number(cv.ci_low, k) << ','
           << csv_number(cv.ci_high, k) << '\n';
      }
    }
    return os.str();
  }
  json out = {{"config", to_json(c)}, {"grid", r.grid}, {"curves", curve_rows(all)}, {"diagnostics", diag}};
  return out.dump(2) + "\n";
}

std::string run_tune(const RunConfig& c) {
  const Dataset d = ingest_csv(c.input, c.columns, treatment_kind_from_string(c.treatment));
  TuningGrid tg;
  tg.kernel = kernel_family_from_string(c.kernel);
  tg.bandwidth_constant = c.bandwidth_constant;
  const TuningResult t = tune(d, tg);
  if (wants_csv(c)) {
    std::ostringstream os;
    os << csv_header(c) << "criterion,weight,k1,kz,k0,value\n";
    for (const auto& a : t.gcv_audit) {
      os << "gcv," << (a.which == WeightTarget::x ? "x" : "mx") << ',' << a.k1 << ',' << a.kz << ",," << fmt(a.value)
         << '\n';
    }
    for (std::size_t k = 0; k < t.k0_audit.candidates.size(); ++k) {
      os << "loo,,,," << t.k0_audit.candidates[k] << ',' << fmt(t.k0_audit.scores[k]) << '\n';
    }
    return os.str();
  }
  json gcv = json::array();
  for (const auto& a : t.gcv_audit) {
    gcv.push_back({{"weight", a.which == WeightTarget::x ? "x" : "mx"},
                   {"k1", a.k1},
                   {"kz", a.kz},
                   {"gcv", std::isfinite(a.value) ? json(a.value) : json(nullptr)}});
  }
  json loo = json::array();
  for (std::size_t k = 0; k < t.k0_audit.candidates.size(); ++k) {
    loo.push_back({{"k0", t.k0_audit.candidates[k]},
                   {"loo", std::isfinite(t.k0_audit.scores[k]) ? json(t.k0_audit.scores[k]) : json(nullptr)}});
  }
  json out = {{"config", to_json(c)},
              {"selected", {{"k1", t.k1}, {"kx", t.kx}, {"kmx", t.kmx}, {"k0", t.k0}, {"h", t.h}}},
              {"gcv", gcv},
              {"loo_k0", loo}};
  return out.dump(2) + "\n";
}

std::string run_weights(const RunConfig& c) {
  const Dataset d = ingest_csv(c.input, c.columns, treatment_kind_from_string(c.treatment));
  RunConfig local = c;
  if (local.grid.empty()) local.grid = "0";  // the grid is irrelevant here
  const Resolved r = resolve(local, d);
  const MediationFit fit = fit_mediation(d, r.dims);
  if (wants_csv(c)) {
    std::ostringstream os;
    os << csv_header(c) << "row,pi_x,pi_mx\n";
    for (Index i = 0; i < d.n(); ++i) {
      os << i + 1 << ',' << fmt(fit.fit_x.in_sample_weights(i)) << ',' << fmt(fit.fit_mx.in_sample_weights(i)) << '\n';
    }
    return os.str();
  }
  json out = {{"config", to_json(c)},
              {"n", d.n()},
              {"weights_x", calibration_summary(fit.fit_x, fit.problem_x)},
              {"weights_mx", calibration_summary(fit.fit_mx, fit.problem_mx)},
              {"tuning", r.tuning},
              {"pi_x", std::vector<double>(fit.fit_x.in_sample_weights.data(),
                                           fit.fit_x.in_sample_weights.data() + d.n())},
              {"pi_mx", std::vector<double>(fit.fit_mx.in_sample_weights.data(),
                                            fit.fit_mx.in_sample_weights.data() + d.n())}};
  if (!fit.converged()) throw std::runtime_error("calibration did not converge");
  return out.dump(2) + "\n";
}

std::string run_simulate(const RunConfig& c) {
  McConfig mc;
  mc.scenarios.clear();
  for (const auto& s : c.scenarios) mc.scenarios.push_back(scenario_from_string(s));
  mc.sample_sizes = c.sizes;
  mc.trials = c.trials;
  mc.estimators.clear();
  for (const auto& e : c.estimators) mc.estimators.push_back(mc_estimator_from_string(e));
  if (!c.grid.empty()) mc.grid = parse_grid(c.grid);
  mc.t_prime = c.t_prime;
  mc.seed = c.seed;
  mc.threads = c.threads;
  mc.retune_each_trial = c.retune_each_trial;
  mc.kernel = kernel_family_from_string(c.kernel);
  mc.bandwidth_constant = c.bandwidth_constant;
  if (c.k1 > 0 && c.kx > 0 && c.kmx > 0 && c.k0 > 0) {
    mc.use_fixed_dims = true;
    mc.fixed_dims = SieveDims{c.k1, c.kx, c.kmx, c.k0};
  }
  const McReport report = run_mc(mc);
  if (report.failed) throw std::runtime_error("simulation failed: " + report.failure_message);
  if (wants_csv(c)) return csv_header(c) + to_csv(report);
  json out = to_json(report);
  out["config"] = to_json(c);
  return out.dump(2) + "\n";
}

}  // namespace

Dataset ingest_csv(const std::string& path, const ColumnMap& columns, TreatmentKind kind) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open input file '" + path + "'");
  std::string line;
  std::size_t row = 0;
  std::vector<std::string> header;
  while (std::getline(f, line)) {
    ++row;
    if (!trim(line).empty()) {
      header = split(line, ',');
      break;
    }
  }
  if (header.empty()) throw std::runtime_error(path + ": empty file (no header row)");
  auto find = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error(path + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t iy = find(columns.y), it = find(columns.t);
  std::vector<std::size_t> im, ix;
  for (const auto& n : columns.m) im.push_back(find(n));
  for (const auto& n : columns.x) ix.push_back(find(n));

  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw std::runtime_error(path + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                               " fields, expected " + std::to_string(header.size()));
    }
    std::vector<double> values(header.size(), 0.0);
    auto get = [&](std::size_t col) {
      double v = 0.0;
      if (!parse_double(cells[col], v)) {
        throw std::runtime_error(path + ": row " + std::to_string(row) + ", column '" + header[col] +
                                 "': non-numeric or missing value '" + cells[col] + "'");
      }
      values[col] = v;
    };
    get(iy);
    get(it);
    for (auto c : im) get(c);
    for (auto c : ix) get(c);
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw std::runtime_error(path + ": no data rows");
  const Index n = static_cast<Index>(rows.size());
  VectorXd y(n), t(n);
  MatrixXd m(n, static_cast<Index>(im.size())), x(n, static_cast<Index>(ix.size()));
  for (Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    y(i) = r[iy];
    t(i) = r[it];
    for (std::size_t k = 0; k < im.size(); ++k) m(i, static_cast<Index>(k)) = r[im[k]];
    for (std::size_t k = 0; k < ix.size(); ++k) x(i, static_cast<Index>(k)) = r[ix[k]];
  }
  return make_dataset(std::move(y), std::move(t), std::move(m), std::move(x), kind);
}

void write_csv(const Dataset& data, const std::string& path, const ColumnMap& columns) {
  if (static_cast<Index>(columns.m.size()) != data.m.cols() || static_cast<Index>(columns.x.size()) != data.x.cols()) {
    throw std::invalid_argument("write_csv: column names do not match the dataset");
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << columns.y << ',' << columns.t;
  for (const auto& n : columns.m) f << ',' << n;
  for (const auto& n : columns.x) f << ',' << n;
  f << '\n';
  for (Index i = 0; i < data.n(); ++i) {
    f << fmt(data.y(i)) << ',' << fmt(data.t(i));
    for (Index k = 0; k < data.m.cols(); ++k) f << ',' << fmt(data.m(i, k));
    for (Index k = 0; k < data.x.cols(); ++k) f << ',' << fmt(data.x(i, k));
    f << '\n';
  }
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> out;
  if (spec.find(':') != std::string::npos) {
    const auto parts = split(spec, ':');
    double a = 0, b = 0, step = 0;
    if (parts.size() != 3 || !parse_double(parts[0], a) || !parse_double(parts[1], b) || !parse_double(parts[2], step)) {
      throw std::invalid_argument("grid must look like a:b:step, got '" + spec + "'");
    }
    if (!(step > 0.0) || b < a) throw std::invalid_argument("grid needs step > 0 and b >= a");
    const long count = std::lround(std::floor((b - a) / step + 1e-9));
    for (long k = 0; k <= count; ++k) out.push_back(a + static_cast<double>(k) * step);
    return out;
  }
  for (const auto& p : split(spec, ',')) {
    double v = 0;
    if (!parse_double(p, v)) throw std::invalid_argument("bad grid value '" + p + "'");
    out.push_back(v);
  }
  return out;
}

json to_json(const RunConfig& c) {
  return {{"subcommand", c.subcommand},
          {"input", c.input},
          {"output", c.output},
          {"format", c.format},
          {"columns", {{"y", c.columns.y}, {"t", c.columns.t}, {"m", c.columns.m}, {"x", c.columns.x}}},
          {"treatment", c.treatment},
          {"methods", c.methods},
          {"grid", c.grid},
          {"t_prime", c.t_prime},
          {"k1", c.k1},
          {"kx", c.kx},
          {"kmx", c.kmx},
          {"k0", c.k0},
          {"bandwidth_constant", c.bandwidth_constant},
          {"kernel", c.kernel},
          {"bootstrap", c.bootstrap},
          {"seed", c.seed},
          {"threads", c.threads},
          {"density_constant", c.density_constant},
          {"scenarios", c.scenarios},
          {"sizes", c.sizes},
          {"trials", c.trials},
          {"estimators", c.estimators},
          {"retune_each_trial", c.retune_each_trial}};
}

RunConfig config_from_json(const json& j, RunConfig c) {
  if (!j.is_object()) throw std::invalid_argument("config file must hold a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "subcommand") c.subcommand = v.get<std::string>();
    else if (key == "input") c.input = v.get<std::string>();
    else if (key == "output") c.output = v.get<std::string>();
    else if (key == "format") c.format = v.get<std::string>();
    else if (key == "columns") {
      if (v.contains("y")) c.columns.y = v["y"].get<std::string>();
      if (v.contains("t")) c.columns.t = v["t"].get<std::string>();
      if (v.contains("m")) c.columns.m = v["m"].get<std::vector<std::string>>();
      if (v.contains("x")) c.columns.x = v["x"].get<std::vector<std::string>>();
    } else if (key == "treatment") c.treatment = v.get<std::string>();
    else if (key == "methods") c.methods = v.get<std::vector<std::string>>();
    else if (key == "grid") c.grid = v.get<std::string>();
    else if (key == "t_prime") c.t_prime = v.get<double>();
    else if (key == "k1") c.k1 = v.get<int>();
    else if (key == "kx") c.kx = v.get<int>();
    else if (key == "kmx") c.kmx = v.get<int>();
    else if (key == "k0") c.k0 = v.get<int>();
    else if (key == "bandwidth_constant") c.bandwidth_constant = v.get<double>();
    else if (key == "kernel") c.kernel = v.get<std::string>();
    else if (key == "bootstrap") c.bootstrap = v.get<int>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "threads") c.threads = v.get<int>();
    else if (key == "density_constant") c.density_constant = v.get<double>();
    else if (key == "scenarios") c.scenarios = v.get<std::vector<std::string>>();
    else if (key == "sizes") c.sizes = v.get<std::vector<Index>>();
    else if (key == "trials") c.trials = v.get<int>();
    else if (key == "estimators") c.estimators = v.get<std::vector<std::string>>();
    else if (key == "retune_each_trial") c.retune_each_trial = v.get<bool>();
    else throw std::invalid_argument("unknown config key '" + key + "'");
  }
  return c;
}

json to_json(const McReport& r) {
  json cells = json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"scenario", to_string(c.scenario)},
                     {"n", c.n},
                     {"estimator", to_string(c.estimator)},
                     {"panel", to_string(c.panel)},
                     {"armse", std::isfinite(c.armse) ? json(c.armse) : json(nullptr)},
                     {"armse_x1000", std::isfinite(c.armse) ? json(1000.0 * c.armse) : json(nullptr)},
                     {"successes", c.successes},
                     {"failures", c.failures}});
  }
  return {{"trials", r.config.trials},
          {"seed", r.config.seed},
          {"grid", r.config.grid},
          {"t_prime", r.config.t_prime},
          {"cells", cells},
          {"failed", r.failed}};
}

std::string to_csv(const McReport& r) {
  std::ostringstream os;
  os << "scenario,n,estimator,panel,armse_x1000,successes,failures\n";
  for (const auto& c : r.cells) {
    os << to_string(c.scenario) << ',' << c.n << ',' << to_string(c.estimator) << ',' << to_string(c.panel) << ','
       << (std::isfinite(c.armse) ? fmt(1000.0 * c.armse) : "") << ',' << c.successes << ',' << c.failures << '\n';
  }
  return os.str();
}

int run(const RunConfig& c, std::ostream& out, std::ostream& err) {
  try {
    std::string text;
    if (c.subcommand == "estimate") text = run_estimate(c);
    else if (c.subcommand == "tune") text = run_tune(c);
    else if (c.subcommand == "weights") text = run_weights(c);
    else if (c.subcommand == "simulate") text = run_simulate(c);
    else throw std::invalid_argument("unknown subcommand '" + c.subcommand + "'");
    emit(c, text, out);
    return 0;
  } catch (const std::exception& e) {
    err << json{{"error", e.what()}, {"subcommand", c.subcommand}}.dump() << '\n';
    return 1;
  }
}

}  // namespace medcal::cli
