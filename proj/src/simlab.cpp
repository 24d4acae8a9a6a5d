#include "medcal/simlab.hpp"

#include "medcal/parallel.hpp"
#include "medcal/rng.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>

namespace medcal {

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::I: return "I";
    case Scenario::II: return "II";
    case Scenario::III: return "III";
    case Scenario::binary: return "binary";
  }
  return "?";
}

Scenario scenario_from_string(const std::string& name) {
  if (name == "I" || name == "1") return Scenario::I;
  if (name == "II" || name == "2") return Scenario::II;
  if (name == "III" || name == "3") return Scenario::III;
  if (name == "binary") return Scenario::binary;
  throw std::invalid_argument("unknown scenario '" + name + "'");
}

Dataset generate(const DgpSpec& spec) {
  if (spec.n < 1) throw std::invalid_argument("generate: n must be >= 1");
  Rng rng(spec.seed);
  const Index n = spec.n;
  VectorXd y(n), t(n);
  MatrixXd m(n, 1), x(n, 1);
  const bool binary = spec.scenario == Scenario::binary;
  const bool interaction = spec.scenario != Scenario::II;
  const bool cubic = spec.scenario != Scenario::I;
  for (Index i = 0; i < n; ++i) {
    const double xi = rng.uniform(-1.5, 1.5);
    const double e = rng.uniform(-2.0, 2.0);
    const double v = rng.uniform(-2.0, 2.0);
    const double u = rng.uniform(-2.0, 2.0);
    const double ti = binary ? (rng.uniform() < truth::logistic(xi) ? 1.0 : 0.0) : 0.3 * xi + e;
    const double mi = 0.3 * ti + 0.3 * xi + v;
    double yi = 0.3 * ti + 0.3 * mi + 0.3 * xi + u;
    if (interaction) yi += 0.5 * ti * mi;
    if (cubic) yi += 0.25 * ti * ti * ti;
    x(i, 0) = xi;
    t(i) = ti;
    m(i, 0) = mi;
    y(i) = yi;
  }
  return make_dataset(std::move(y), std::move(t), std::move(m), std::move(x),
                      binary ? TreatmentKind::discrete : TreatmentKind::continuous);
}

double true_mu(Scenario scenario, double t, double tp) {
  switch (scenario) {
    case Scenario::I: return 0.3 * t + 0.09 * tp + 0.15 * t * tp;
    case Scenario::II: return 0.3 * t + 0.09 * tp + 0.25 * t * t * t;
    case Scenario::III:
    case Scenario::binary: return 0.3 * t + 0.09 * tp + 0.15 * t * tp + 0.25 * t * t * t;
  }
  return 0.0;
}

std::vector<double> default_grid() {
  std::vector<double> g;
  for (int k = -15; k <= 15; ++k) {
    if (k != 0) g.push_back(k / 10.0);
  }
  return g;
}

namespace truth {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double treatment_marginal(double t) {
  constexpr double a = 0.45, b = 2.0;
  const double s = std::abs(t);
  if (s <= b - a) return 1.0 / (2.0 * b);
  if (s <= a + b) return (a + b - s) / (4.0 * a * b);
  return 0.0;
}

double treatment_conditional(Scenario s, double t, double x) {
  if (s == Scenario::binary) {
    if (t == 1.0) return logistic(x);
    if (t == 0.0) return 1.0 - logistic(x);
    return 0.0;
  }
  return std::abs(t - 0.3 * x) <= 2.0 ? 0.25 : 0.0;
}

double mediator_conditional(double m, double t, double x) { return std::abs(m - 0.3 * t - 0.3 * x) <= 2.0 ? 0.25 : 0.0; }

VectorXd combined_weights(Scenario s, const Dataset& data, double delta) {
  const Index n = data.n();
  VectorXd w(n);
  for (Index i = 0; i < n; ++i) {
    const double t = data.t(i), x = data.x(i, 0), m = data.m(i, 0);
    const double ft = s == Scenario::binary ? 0.5 : treatment_marginal(t);
    const double den = treatment_conditional(s, t, x) * mediator_conditional(m, t, x);
    if (!(den > 0.0)) {
      throw std::domain_error("oracle weight undefined at observation " + std::to_string(i));
    }
    w(i) = ft * mediator_conditional(m, t + delta, x) / den;
  }
  return w;
}

}  // namespace truth

OracleEstimator::OracleEstimator(const Dataset& data, Scenario scenario, CbsOptions options)
    : data_(&data), scenario_(scenario), options_(std::move(options)) {}

double OracleEstimator::mu(double t, double tp) {
  const double delta = tp - t;
  auto it = fits_.find(delta);
  if (it == fits_.end()) {
    const VectorXd response = truth::combined_weights(scenario_, *data_, delta).cwiseProduct(data_->y);
    int k0 = options_.k0;
    if (k0 <= 0) k0 = loocv_series(*data_, response, options_.k0_candidates).selected;
    it = fits_.emplace(delta, fit_series(*data_, response, k0, delta)).first;
  }
  return it->second.predict(t);
}

double oracle_series_mu(const Dataset& data, Scenario scenario, double t, double tp, int k0) {
  OracleEstimator est(data, scenario, CbsOptions{k0, {}});
  return est.mu(t, tp);
}

namespace {

bool is_level(double t) { return t == 0.0 || t == 1.0; }

// P(T = s | M = m, X = x) for the binary design.
double binary_posterior(double s, double m, double x) {
  const double p1 = truth::logistic(x);
  const double a1 = truth::mediator_conditional(m, 1.0, x) * p1;
  const double a0 = truth::mediator_conditional(m, 0.0, x) * (1.0 - p1);
  return (s == 1.0 ? a1 : a0) / (a0 + a1);
}

}  // namespace

VectorXd TrueBinaryNuisances::log_pi(WeightTarget which, double delta) const {
  const Dataset& d = *data_;
  VectorXd out(d.n());
  for (Index i = 0; i < d.n(); ++i) {
    const double s = d.t(i) + delta;
    if (!is_level(s)) {
      out(i) = 0.0;
      continue;
    }
    const double p = which == WeightTarget::x ? truth::treatment_conditional(Scenario::binary, s, d.x(i, 0))
                                              : binary_posterior(s, d.m(i, 0), d.x(i, 0));
    out(i) = p > 0.0 ? std::log(0.5 / p) : std::numeric_limits<double>::infinity();
  }
  return out;
}

VectorXd TrueBinaryNuisances::density_ratio(WeightTarget which, double delta) const {
  const Dataset& d = *data_;
  VectorXd out(d.n());
  for (Index i = 0; i < d.n(); ++i) {
    const double s = d.t(i) - delta;
    if (!is_level(s)) {
      out(i) = 0.0;
      continue;
    }
    const double x = d.x(i, 0), m = d.m(i, 0);
    if (which == WeightTarget::x) {
      out(i) = truth::treatment_conditional(Scenario::binary, s, x) /
               truth::treatment_conditional(Scenario::binary, d.t(i), x);
    } else {
      out(i) = binary_posterior(s, m, x) / binary_posterior(d.t(i), m, x);
    }
  }
  return out;
}

double eif_binary(const Dataset& data, Index i, double t, double tp) {
  if (!is_level(t) || !is_level(tp)) throw std::invalid_argument("eif_binary: t and t' must be 0 or 1");
  const double ti = data.t(i), m = data.m(i, 0), x = data.x(i, 0), y = data.y(i);
  if (!is_level(ti)) throw std::domain_error("eif_binary: treatment outside {0, 1}");
  auto g = [&](double tt, double mm) { return 0.3 * tt + 0.3 * mm + 0.5 * tt * mm + 0.3 * x + 0.25 * tt * tt * tt; };
  const double eta = 0.3 * t + 0.3 * x + 0.25 * t * t * t + (0.3 + 0.5 * t) * (0.3 * tp + 0.3 * x);
  const double pt = truth::treatment_conditional(Scenario::binary, t, x);
  const double ptp = truth::treatment_conditional(Scenario::binary, tp, x);
  double s = eta - true_mu(Scenario::binary, t, tp);
  if (ti == t) {
    const double fm_t = truth::mediator_conditional(m, t, x);
    if (!(fm_t > 0.0)) throw std::domain_error("eif_binary: mediator outside its support");
    s += truth::mediator_conditional(m, tp, x) / (pt * fm_t) * (y - g(t, m));
  }
  if (ti == tp) s += (g(t, m) - eta) / ptp;
  return s;
}

std::string to_string(McEstimator e) {
  switch (e) {
    case McEstimator::cbs: return "cbs";
    case McEstimator::cbk: return "cbk";
    case McEstimator::ols: return "ols";
    case McEstimator::ipw: return "ipw";
    case McEstimator::oracle: return "oracle";
    case McEstimator::truth: return "truth";
  }
  return "?";
}

McEstimator mc_estimator_from_string(const std::string& name) {
  for (McEstimator e : {McEstimator::cbs, McEstimator::cbk, McEstimator::ols, McEstimator::ipw, McEstimator::oracle,
                        McEstimator::truth}) {
    if (to_string(e) == name) return e;
  }
  throw std::invalid_argument("unknown estimator '" + name + "'");
}

const McCell& McReport::cell(Scenario s, Index n, McEstimator e, Panel p) const {
  for (const auto& c : cells) {
    if (c.scenario == s && c.n == n && c.estimator == e && c.panel == p) return c;
  }
  throw std::out_of_range("McReport: no such cell");
}

double rmse(const std::vector<double>& errors) {
  if (errors.empty()) throw std::invalid_argument("rmse: no values");
  double s = 0.0;
  for (double e : errors) s += e * e;
  return std::sqrt(s / static_cast<double>(errors.size()));
}

double armse(const std::vector<std::vector<double>>& estimates, const std::vector<double>& truth,
             std::vector<double>* per_point) {
  if (estimates.empty()) throw std::invalid_argument("armse: no trials");
  std::vector<double> pts;
  for (std::size_t g = 0; g < truth.size(); ++g) {
    std::vector<double> err;
    for (const auto& trial : estimates) err.push_back(trial.at(g) - truth[g]);
    pts.push_back(rmse(err));
  }
  double avg = 0.0;
  for (double r : pts) avg += r;
  avg /= static_cast<double>(pts.size());
  if (per_point) *per_point = std::move(pts);
  return avg;
}

std::uint64_t trial_seed(std::uint64_t master, Scenario s, Index n, int trial) {
  const std::uint64_t stream = (static_cast<std::uint64_t>(s) << 32) ^ static_cast<std::uint64_t>(n);
  return derive_seed(master, stream, static_cast<std::uint64_t>(trial));
}

namespace {

using PanelEstimates = std::vector<std::vector<double>>;  // [panel][grid point]

struct TrialOutput {
  std::vector<std::optional<PanelEstimates>> by_estimator;
};

PanelEstimates curves_to_values(const std::vector<EffectCurve>& curves) {
  PanelEstimates out;
  for (const auto& c : curves) out.emplace_back(c.estimate.data(), c.estimate.data() + c.estimate.size());
  return out;
}

bool needs_weights(const std::vector<McEstimator>& es) {
  for (auto e : es) {
    if (e == McEstimator::cbs || e == McEstimator::cbk) return true;
  }
  return false;
}

TrialOutput run_trial(const McConfig& cfg, Scenario s, Index n, int trial, const std::vector<double>& grid,
                      const std::optional<SieveDims>& preset) {
  const Dataset data = generate({s, n, trial_seed(cfg.seed, s, n, trial)});
  const auto& panels = effect_panels();
  TrialOutput out;
  out.by_estimator.resize(cfg.estimators.size());

  std::optional<MediationFit> fit;
  bool fit_ok = false;
  CbsOptions cbs_options;
  if (needs_weights(cfg.estimators)) {
    try {
      SieveDims dims;
      if (preset) {
        dims = *preset;
      } else {
        const WeightDims w = select_weight_dims(data, cfg.tuning);
        dims = SieveDims{w.k1, w.kx, w.kmx, cfg.tuning.k0_candidates.front()};
      }
      fit = fit_mediation(data, dims);
      fit_ok = fit->converged();
      if (cfg.use_fixed_dims) cbs_options.k0 = cfg.fixed_dims.k0;
      cbs_options.k0_candidates = cfg.tuning.k0_candidates;
    } catch (const std::exception&) {
      fit_ok = false;
    }
  }

  for (std::size_t k = 0; k < cfg.estimators.size(); ++k) {
    const McEstimator e = cfg.estimators[k];
    try {
      MuFunction mu;
      std::optional<CbsEstimator> cbs;
      std::optional<CbkEstimator> cbk;
      std::optional<OlsFit> ols;
      std::optional<IpwFit> ipw;
      std::optional<OracleEstimator> oracle;
      switch (e) {
        case McEstimator::cbs:
          if (!fit_ok) continue;
          cbs.emplace(*fit, cbs_options);
          mu = [&](double a, double b) { return cbs->mu(a, b); };
          break;
        case McEstimator::cbk: {
          if (!fit_ok) continue;
          const double h = select_bandwidth(n, cfg.bandwidth_constant, cfg.kernel);
          cbk.emplace(*fit, KernelSpec{cfg.kernel, h});
          mu = [&](double a, double b) { return cbk->mu(a, b); };
          break;
        }
        case McEstimator::ols:
          ols = ols_baseline(data);
          mu = [&](double a, double b) { return ols->mu(a, b); };
          break;
        case McEstimator::ipw:
          ipw = ipw_binary_baseline(data);
          mu = [&](double a, double b) { return ipw->mu(a, b); };
          break;
        case McEstimator::oracle:
          oracle.emplace(data, s, CbsOptions{cfg.use_fixed_dims ? cfg.fixed_dims.k0 : 0, cfg.tuning.k0_candidates});
          mu = [&](double a, double b) { return oracle->mu(a, b); };
          break;
        case McEstimator::truth:
          mu = [s](double a, double b) { return true_mu(s, a, b); };
          break;
      }
      PanelEstimates v = curves_to_values(effect_curves(mu, grid, cfg.t_prime, to_string(e), panels));
      bool finite = true;
      for (const auto& row : v) {
        for (double x : row) finite = finite && std::isfinite(x);
      }
      if (finite) out.by_estimator[k] = std::move(v);
    } catch (const std::exception&) {
    }
  }
  return out;
}

}  // namespace

McReport run_mc(const McConfig& cfg) {
  if (cfg.trials < 1) throw std::invalid_argument("run_mc: trials must be >= 1");
  if (cfg.estimators.empty()) throw std::invalid_argument("run_mc: no estimators");
  cfg.tuning.validate();
  McReport report;
  report.config = cfg;
  const auto& panels = effect_panels();

  for (Scenario s : cfg.scenarios) {
    const std::vector<double> grid = s == Scenario::binary ? std::vector<double>{1.0} : cfg.grid;
    const double tp = s == Scenario::binary ? 0.0 : cfg.t_prime;
    McConfig local = cfg;
    local.t_prime = tp;
    for (Index n : cfg.sample_sizes) {
      std::optional<SieveDims> preset;
      if (cfg.use_fixed_dims) {
        preset = cfg.fixed_dims;
      } else if (!cfg.retune_each_trial && needs_weights(cfg.estimators)) {
        const Dataset first = generate({s, n, trial_seed(cfg.seed, s, n, 0)});
        const WeightDims w = select_weight_dims(first, cfg.tuning);
        preset = SieveDims{w.k1, w.kx, w.kmx, cfg.tuning.k0_candidates.front()};
      }
      std::vector<TrialOutput> outputs(static_cast<std::size_t>(cfg.trials));
      parallel_for(outputs.size(), cfg.threads, [&](std::size_t trial) {
        outputs[trial] = run_trial(local, s, n, static_cast<int>(trial), grid, preset);
      });

      for (std::size_t k = 0; k < cfg.estimators.size(); ++k) {
        for (std::size_t p = 0; p < panels.size(); ++p) {
          McCell cell{s, n, cfg.estimators[k], panels[p]};
          std::vector<std::vector<double>> est;
          for (const auto& o : outputs) {
            if (o.by_estimator[k]) {
              est.push_back((*o.by_estimator[k])[p]);
            } else {
              ++cell.failures;
            }
          }
          cell.successes = static_cast<int>(est.size());
          std::vector<double> truth;
          for (double t : grid) truth.push_back(panel_value(panels[p], [s](double a, double b) { return true_mu(s, a, b); }, t, tp));
          if (!est.empty()) {
            cell.armse = armse(est, truth, &cell.rmse);
          } else {
            cell.armse = std::numeric_limits<double>::quiet_NaN();
          }
          if (cfg.keep_trials) cell.trial_estimates = std::move(est);
          if (cell.failures * 20 > cfg.trials && !report.failed) {
            report.failed = true;
            report.failure_message = to_string(cfg.estimators[k]) + " failed in " + std::to_string(cell.failures) +
                                     " of " + std::to_string(cfg.trials) + " trials (scenario " + to_string(s) +
                                     ", N = " + std::to_string(n) + ")";
          }
          report.cells.push_back(std::move(cell));
        }
      }
    }
  }
  return report;
}

}  // namespace medcal
