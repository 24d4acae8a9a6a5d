#include "medcal/estimators.hpp"

#include "medcal/linops.hpp"
#include "medcal/tuning.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace medcal {

namespace {

constexpr double kRidge = 1e-10;

Interval treatment_domain(const Dataset& data) {
  return empirical_domain(std::span<const double>(data.t.data(), static_cast<std::size_t>(data.t.size())));
}

MatrixXd as_column(const VectorXd& v) { return v; }

}  // namespace

Basis treatment_basis(const Dataset& data, int dim) {
  BasisSpec spec;
  switch (data.kind) {
    case TreatmentKind::discrete:
      spec.family = Family::indicator;
      spec.levels = data.levels;
      spec.dimension = static_cast<int>(data.levels.size());
      break;
    case TreatmentKind::mixed:
      spec.family = Family::mixed;
      spec.dimension = std::max(dim, 2);
      spec.domain = treatment_domain(data);
      break;
    case TreatmentKind::continuous:
      spec.family = Family::power;
      spec.dimension = dim;
      spec.domain = treatment_domain(data);
      break;
  }
  return make_treatment_basis(spec, data.kind);
}

Basis outcome_basis(const Dataset& data, int k0) { return treatment_basis(data, k0); }

MediationFit fit_mediation(const Dataset& data, const SieveDims& dims, const SolverOptions& options) {
  if (dims.k1 < 1 || dims.kx < 1 || dims.kmx < 1 || dims.k0 < 1) {
    throw std::invalid_argument("sieve dimensions must be >= 1");
  }
  const Basis u = treatment_basis(data, dims.k1);
  const MatrixXd mx = data.mx();
  CalibrationProblem px = make_calibration_problem(u, covariate_basis(data.x, dims.kx), data.t, data.x);
  CalibrationProblem pmx = make_calibration_problem(u, covariate_basis(mx, dims.kmx), data.t, mx);
  CalibrationFit fx = solve_dual(px, options);
  CalibrationFit fmx = solve_dual(pmx, options);
  SieveDims resolved = dims;
  resolved.k1 = u.dimension();
  if (data.kind == TreatmentKind::discrete) resolved.k0 = u.dimension();
  return MediationFit{data, resolved, std::move(px), std::move(pmx), std::move(fx), std::move(fmx)};
}

ShiftedWeights combined_weights(const MediationFit& fit, double delta) {
  ShiftedWeights s;
  s.delta = delta;
  const Index n = fit.data.n();
  s.log_mx = fit.fit_mx.in_sample_weights.array().log();
  if (delta == 0.0) {
    s.log_x_shift = fit.fit_x.in_sample_weights.array().log();
    s.log_mx_shift = s.log_mx;
  } else {
    const VectorXd shifted = fit.data.t.array() + delta;
    s.log_x_shift = log_weights_at(fit.fit_x, fit.problem_x, shifted, &s.extrapolated);
    s.log_mx_shift = log_weights_at(fit.fit_mx, fit.problem_mx, shifted);
  }
  s.w.resize(n);
  for (Index i = 0; i < n; ++i) s.w(i) = std::exp(s.log_mx(i) - s.log_mx_shift(i) + s.log_x_shift(i));
  return s;
}

const ShiftedWeights& WeightCache::at(double delta) {
  auto it = cache_.find(delta);
  if (it == cache_.end()) it = cache_.emplace(delta, combined_weights(*fit_, delta)).first;
  return it->second;
}

double SeriesFit::predict(double t) const { return (*basis)(t).dot(gamma); }

SeriesFit fit_series(const Dataset& data, const VectorXd& response, int k0, double delta) {
  SeriesFit s;
  s.delta = delta;
  s.basis = std::make_shared<const Basis>(outcome_basis(data, k0));
  s.k0 = s.basis->dimension();
  s.design = design_matrix(*s.basis, data.t).matrix;
  s.phi = linops::gram(s.design);
  linops::SolveDiagnostics diag;
  s.gamma = linops::least_squares(s.design, as_column(response), kRidge, &diag).col(0);
  s.ridge_applied = diag.ridge_applied;
  return s;
}

CbsEstimator::CbsEstimator(const MediationFit& fit, CbsOptions options)
    : weights_(fit), options_(std::move(options)) {}

const SeriesFit& CbsEstimator::series(double delta) {
  auto it = fits_.find(delta);
  if (it != fits_.end()) return it->second;
  const MediationFit& f = weights_.fit();
  const VectorXd response = weights_.at(delta).w.cwiseProduct(f.data.y);
  SeriesFit s;
  if (options_.k0 > 0 || f.data.kind == TreatmentKind::discrete) {
    s = fit_series(f.data, response, options_.k0 > 0 ? options_.k0 : f.dims.k0, delta);
  } else {
    const LooResult loo = loocv_series(f.data, response, options_.k0_candidates);
    s = fit_series(f.data, response, loo.selected, delta);
    s.loo_scores = loo.scores;
    s.loo_candidates = loo.candidates;
  }
  return fits_.emplace(delta, std::move(s)).first->second;
}

double CbsEstimator::mu(double t, double t_prime) { return series(t_prime - t).predict(t); }

double cbs_mu(const MediationFit& fit, double t, double t_prime, const CbsOptions& options) {
  CbsEstimator est(fit, options);
  return est.mu(t, t_prime);
}

double weighted_nw(const VectorXd& t_data, const VectorXd& y, const VectorXd& w, double t, const KernelSpec& kernel) {
  double num = 0.0, den = 0.0;
  for (Index i = 0; i < t_data.size(); ++i) {
    const double k = kernel_eval(kernel, t_data(i) - t);
    if (k == 0.0) continue;
    num += w(i) * k * y(i);
    den += w(i) * k;
  }
  if (den == 0.0 || !std::isfinite(den)) {
    throw std::runtime_error("kernel estimator: empty neighbourhood at t = " + std::to_string(t));
  }
  return num / den;
}

CbkEstimator::CbkEstimator(const MediationFit& fit, KernelSpec kernel) : weights_(fit), kernel_(kernel) {
  if (fit.data.kind == TreatmentKind::discrete) {
    throw std::invalid_argument("the kernel estimator is not applicable to a discrete treatment");
  }
  if (!(kernel_.bandwidth > 0.0)) throw std::invalid_argument("kernel bandwidth must be positive");
}

double CbkEstimator::mu(double t, double t_prime) {
  const MediationFit& f = weights_.fit();
  return weighted_nw(f.data.t, f.data.y, weights_.at(t_prime - t).w, t, kernel_);
}

double cbk_mu(const MediationFit& fit, double t, double t_prime, const KernelSpec& kernel) {
  CbkEstimator est(fit, kernel);
  return est.mu(t, t_prime);
}

EffectDecomposition effect_decomposition(const MuFunction& mu, double t, double t_prime) {
  const double tt = mu(t, t);
  const double pt = mu(t_prime, t);
  const double pp = mu(t_prime, t_prime);
  EffectDecomposition e;
  e.direct = tt - pt;
  e.indirect = pt - pp;
  e.total = e.direct + e.indirect;
  return e;
}

std::string to_string(Panel panel) {
  switch (panel) {
    case Panel::dose: return "dose";
    case Panel::cross: return "cross";
    case Panel::direct1: return "direct1";
    case Panel::direct2: return "direct2";
    case Panel::indirect1: return "indirect1";
    case Panel::indirect2: return "indirect2";
  }
  return "?";
}

Panel panel_from_string(const std::string& name) {
  for (Panel p : all_panels()) {
    if (to_string(p) == name) return p;
  }
  throw std::invalid_argument("unknown panel '" + name + "'");
}

const std::vector<Panel>& effect_panels() {
  static const std::vector<Panel> panels{Panel::direct1, Panel::direct2, Panel::indirect1, Panel::indirect2};
  return panels;
}

const std::vector<Panel>& all_panels() {
  static const std::vector<Panel> panels{Panel::dose,     Panel::cross,     Panel::direct1,
                                         Panel::direct2,  Panel::indirect1, Panel::indirect2};
  return panels;
}

std::vector<PanelTerm> panel_terms(Panel panel, double t, double tp) {
  switch (panel) {
    case Panel::dose: return {{1.0, t, t}};
    case Panel::cross: return {{1.0, t, tp}};
    case Panel::direct1: return {{1.0, t, t}, {-1.0, tp, t}};
    case Panel::direct2: return {{1.0, t, tp}, {-1.0, tp, tp}};
    case Panel::indirect1: return {{1.0, t, t}, {-1.0, t, tp}};
    case Panel::indirect2: return {{1.0, tp, t}, {-1.0, tp, tp}};
  }
  return {};
}

double panel_value(Panel panel, const MuFunction& mu, double t, double t_prime) {
  double v = 0.0;
  for (const auto& term : panel_terms(panel, t, t_prime)) v += term.sign * mu(term.t, term.t_prime);
  return v;
}

std::vector<EffectCurve> effect_curves(const MuFunction& mu, const std::vector<double>& grid, double t_prime,
                                       const std::string& method, const std::vector<Panel>& panels) {
  if (grid.empty()) throw std::invalid_argument("effect curve: empty grid");
  std::map<std::pair<double, double>, double> memo;
  auto cached = [&](double a, double b) {
    auto it = memo.find({a, b});
    if (it == memo.end()) it = memo.emplace(std::make_pair(a, b), mu(a, b)).first;
    return it->second;
  };
  std::vector<EffectCurve> out;
  for (Panel p : panels) {
    EffectCurve c;
    c.method = method;
    c.panel = p;
    c.t_prime = t_prime;
    c.grid = grid;
    c.estimate.resize(static_cast<Index>(grid.size()));
    for (std::size_t g = 0; g < grid.size(); ++g) c.estimate(static_cast<Index>(g)) = panel_value(p, cached, grid[g], t_prime);
    out.push_back(std::move(c));
  }
  return out;
}

OlsFit ols_baseline(const Dataset& data) {
  const Index n = data.n();
  const Index s = data.m.cols(), r = data.x.cols();
  MatrixXd dm(n, 2 + r);
  dm << VectorXd::Ones(n), data.t, data.x;
  MatrixXd dy(n, 2 + s + r);
  dy << VectorXd::Ones(n), data.t, data.m, data.x;
  for (const MatrixXd* d : {&dm, &dy}) {
    Eigen::FullPivLU<MatrixXd> lu(*d);
    if (lu.rank() < d->cols()) throw std::invalid_argument("OLS baseline: design is rank deficient");
  }
  OlsFit f;
  f.mediator_coef = linops::least_squares(dm, data.m, 0.0);
  f.outcome_coef = linops::least_squares(dy, as_column(data.y), 0.0).col(0);
  f.x_mean = data.x.colwise().mean().transpose();
  return f;
}

double OlsFit::mu(double t, double t_prime) const {
  const Index s = mediator_coef.cols(), r = x_mean.size();
  double v = outcome_coef(0) + outcome_coef(1) * t + outcome_coef.tail(r).dot(x_mean);
  for (Index k = 0; k < s; ++k) {
    const double m_hat = mediator_coef(0, k) + mediator_coef(1, k) * t_prime + mediator_coef.col(k).tail(r).dot(x_mean);
    v += outcome_coef(2 + k) * m_hat;
  }
  return v;
}

VectorXd logistic_fit(const MatrixXd& design, const VectorXd& response, int max_iterations, double tolerance) {
  const Index n = design.rows(), k = design.cols();
  VectorXd beta = VectorXd::Zero(k);
  for (int it = 0; it < max_iterations; ++it) {
    const VectorXd eta = design * beta;
    VectorXd p(n), w(n);
    for (Index i = 0; i < n; ++i) {
      p(i) = 1.0 / (1.0 + std::exp(-eta(i)));
      w(i) = std::max(p(i) * (1.0 - p(i)), 1e-12);
    }
    const VectorXd score = design.transpose() * (response - p);
    const MatrixXd wx = design.array().colwise() * w.array().sqrt();
    MatrixXd info = MatrixXd::Zero(k, k);
    info.selfadjointView<Eigen::Lower>().rankUpdate(wx.transpose());
    info.triangularView<Eigen::Upper>() = info.transpose();
    const VectorXd step = linops::solve_spd(info, score, 1e-8).x.col(0);
    beta += step;
    if (!beta.allFinite()) throw std::runtime_error("logistic regression diverged");
    if (step.cwiseAbs().maxCoeff() < tolerance) break;
  }
  return beta;
}

namespace {

VectorXd fitted_probabilities(const MatrixXd& z, const VectorXd& response, int per_coordinate) {
  const Basis b = covariate_basis(z, per_coordinate);
  const MatrixXd d = design_matrix(b, z).matrix;
  const VectorXd beta = logistic_fit(d, response);
  const VectorXd eta = d * beta;
  return eta.unaryExpr([](double e) { return 1.0 / (1.0 + std::exp(-e)); });
}

Index clip_probabilities(VectorXd& p, double eps) {
  Index clipped = 0;
  for (Index i = 0; i < p.size(); ++i) {
    if (p(i) < eps || p(i) > 1.0 - eps) {
      p(i) = std::clamp(p(i), eps, 1.0 - eps);
      ++clipped;
    }
  }
  return clipped;
}

void require_binary(const Dataset& data) {
  for (Index i = 0; i < data.n(); ++i) {
    if (data.t(i) != 0.0 && data.t(i) != 1.0) throw std::invalid_argument("IPW baseline requires a 0/1 treatment");
  }
}

}  // namespace

IpwFit ipw_binary_baseline(const Dataset& data, const IpwOptions& options) {
  require_binary(data);
  IpwFit f;
  f.data = data;
  f.options = options;
  f.p1_mx = fitted_probabilities(data.mx(), data.t, options.per_coordinate);
  f.p1_x = fitted_probabilities(data.x, data.t, options.per_coordinate);
  f.clipped = clip_probabilities(f.p1_mx, options.clip) + clip_probabilities(f.p1_x, options.clip);
  return f;
}

double IpwFit::mu(double t, double t_prime) const { return ipw_mu(data, p1_mx, p1_x, t, t_prime, options.self_normalized); }

double ipw_mu(const Dataset& data, const VectorXd& p1_mx, const VectorXd& p1_x, double t, double t_prime,
              bool self_normalized) {
  if ((t != 0.0 && t != 1.0) || (t_prime != 0.0 && t_prime != 1.0)) {
    throw std::invalid_argument("IPW baseline: t and t' must be 0 or 1");
  }
  auto prob = [](double p1, double level) { return level == 1.0 ? p1 : 1.0 - p1; };
  double num = 0.0, den = 0.0;
  for (Index i = 0; i < data.n(); ++i) {
    if (data.t(i) != t) continue;
    const double w = prob(p1_mx(i), t_prime) / (prob(p1_mx(i), t) * prob(p1_x(i), t_prime));
    num += w * data.y(i);
    den += w;
  }
  if (self_normalized) {
    if (!(den > 0.0)) throw std::runtime_error("IPW baseline: no observations at the requested treatment level");
    return num / den;
  }
  return num / static_cast<double>(data.n());
}

}  // namespace medcal
