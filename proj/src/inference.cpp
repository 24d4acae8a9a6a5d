#include "medcal/inference.hpp"

#include "medcal/linops.hpp"
#include "medcal/parallel.hpp"
#include "medcal/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

namespace medcal {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kRidge = 1e-10;

MatrixXd fitted(const MatrixXd& design, const MatrixXd& response) {
  return design * linops::least_squares(design, response, kRidge);
}

double exp_or_zero(double log_value) {
  if (log_value == kNegInf) return 0.0;
  if (!std::isfinite(log_value)) throw std::domain_error("influence: infinite or undefined nuisance factor");
  return std::exp(log_value);
}

}  // namespace

double product_exp(double log_a, double log_b) {
  if (log_a == kNegInf || log_b == kNegInf) return 0.0;
  const double s = log_a + log_b;
  if (!std::isfinite(s)) throw std::domain_error("influence: infinite or undefined nuisance product");
  return std::exp(s);
}

PluginNuisances::PluginNuisances(const MediationFit& fit, double bandwidth_constant)
    : fit_(&fit), constant_(bandwidth_constant) {
  if (!(bandwidth_constant > 0.0)) throw std::invalid_argument("density bandwidth constant must be positive");
}

VectorXd PluginNuisances::log_pi(WeightTarget which, double delta) const {
  const CalibrationFit& f = which == WeightTarget::x ? fit_->fit_x : fit_->fit_mx;
  const CalibrationProblem& p = which == WeightTarget::x ? fit_->problem_x : fit_->problem_mx;
  if (delta == 0.0) return f.in_sample_weights.array().log();
  return log_weights_at(f, p, (fit_->data.t.array() + delta).matrix());
}

VectorXd PluginNuisances::density_ratio(WeightTarget which, double delta) const {
  const Dataset& d = fit_->data;
  const Index n = d.n();
  if (delta == 0.0) return VectorXd::Ones(n);
  const MatrixXd z = which == WeightTarget::x ? d.x : d.mx();
  const bool discrete = d.kind == TreatmentKind::discrete;
  const Index dz = z.cols();

  // Bandwidths on the joint (T, Z) for a continuous treatment, on Z alone otherwise.
  double ht = 1.0;
  std::vector<KernelSpec> zs;
  if (discrete) {
    zs = silverman_specs(z, constant_, 0);
  } else {
    MatrixXd tz(n, dz + 1);
    tz << d.t, z;
    const auto all = silverman_specs(tz, constant_, 0);
    ht = all[0].bandwidth;
    zs.assign(all.begin() + 1, all.end());
  }
  MatrixXd zscaled(n, dz);
  for (Index j = 0; j < dz; ++j) zscaled.col(j) = z.col(j) / zs[static_cast<std::size_t>(j)].bandwidth;
  const VectorXd ts = d.t / ht;
  const double ds = delta / ht;

  VectorXd out(n);
  for (Index i = 0; i < n; ++i) {
    double num = 0.0, den = 0.0;
    const double target = d.t(i) - delta;
    for (Index k = 0; k < n; ++k) {
      const double q = (zscaled.row(k) - zscaled.row(i)).squaredNorm();
      if (q > 80.0) continue;
      const double w = std::exp(-0.5 * q);
      if (discrete) {
        if (d.t(k) == target) num += w;
        if (d.t(k) == d.t(i)) den += w;
      } else {
        const double a = ts(k) - ts(i) + ds;
        const double b = ts(k) - ts(i);
        num += w * std::exp(-0.5 * a * a);
        den += w * std::exp(-0.5 * b * b);
      }
    }
    if (!(den > kDensityFloor)) {
      den = kDensityFloor;
      ++floored_;
    }
    out(i) = num / den;
  }
  return out;
}

MatrixXd influence_term(const InfluenceBases& bases, const VectorXd& log_pi_shift, const VectorXd& log_pi,
                        const VectorXd& density_ratio, double delta, const VectorXd& log_factor,
                        const MatrixXd& base) {
  const CalibrationProblem& p = *bases.problem;
  const Index n = base.rows(), k = base.cols();
  if (log_pi_shift.size() != n || log_pi.size() != n || density_ratio.size() != n || log_factor.size() != n ||
      p.n() != n || bases.outcome_design->rows() != n || bases.t->size() != n) {
    throw std::invalid_argument("influence_term: length mismatch");
  }
  MatrixXd term1(n, k), phi(n, k);
  for (Index i = 0; i < n; ++i) {
    term1.row(i) = product_exp(log_pi_shift(i), log_factor(i)) * base.row(i);
    phi.row(i) = exp_or_zero(log_factor(i)) * base.row(i);
  }
  if (phi.isZero(0.0)) return term1;

  const MatrixXd w = linops::row_kron(p.design_v, p.design_u);
  const MatrixXd coef = linops::least_squares(w, phi, kRidge);
  MatrixXd h_shift;
  if (delta == 0.0) {
    h_shift = w * coef;
  } else {
    const VectorXd shifted = bases.t->array() - delta;
    h_shift = linops::row_kron(p.design_v, design_matrix(p.treatment_basis, shifted).matrix) * coef;
  }
  MatrixXd psi(n, k);
  for (Index i = 0; i < n; ++i) psi.row(i) = exp_or_zero(log_pi(i)) * density_ratio(i) * h_shift.row(i);

  const Eigen::RowVectorXd mean = psi.colwise().mean();
  MatrixXd out = term1 - psi + fitted(p.design_v, psi) + fitted(*bases.outcome_design, psi);
  out.rowwise() -= 2.0 * mean;
  return out;
}

MatrixXd InfluenceParts::d() const {
  MatrixXd out = if_x + if_mx0 - if_mxd - cond_mean;
  out.rowwise() += centering.transpose();
  return out;
}

InfluenceParts assemble_parts(const MediationFit& fit, const Nuisances& nuisances, const SeriesFit& series) {
  const Dataset& data = fit.data;
  const Index n = data.n();
  const double delta = series.delta;
  const MatrixXd base = series.design.array().colwise() * data.y.array();

  const VectorXd lx_s = nuisances.log_pi(WeightTarget::x, delta);
  const VectorXd lx_0 = delta == 0.0 ? lx_s : nuisances.log_pi(WeightTarget::x, 0.0);
  const VectorXd lmx_0 = nuisances.log_pi(WeightTarget::mx, 0.0);
  const VectorXd lmx_s = delta == 0.0 ? lmx_0 : nuisances.log_pi(WeightTarget::mx, delta);
  const VectorXd rx = nuisances.density_ratio(WeightTarget::x, delta);
  const VectorXd rmx = nuisances.density_ratio(WeightTarget::mx, delta);
  const VectorXd ones = VectorXd::Ones(n);

  VectorXd f1(n), f2(n), f3(n), lw(n);
  for (Index i = 0; i < n; ++i) {
    f1(i) = lmx_0(i) - lmx_s(i);
    f2(i) = lx_s(i) - lmx_s(i);
    f3(i) = lmx_0(i) + lx_s(i) - 2.0 * lmx_s(i);
    lw(i) = f1(i) + lx_s(i);
    if (std::isnan(f1(i)) || std::isnan(f2(i)) || std::isnan(f3(i)) || std::isnan(lw(i))) {
      throw std::domain_error("influence: undefined weight ratio at observation " + std::to_string(i));
    }
  }

  const InfluenceBases bx{&fit.problem_x, &series.design, &data.t};
  const InfluenceBases bmx{&fit.problem_mx, &series.design, &data.t};
  InfluenceParts parts;
  parts.if_x = influence_term(bx, lx_s, lx_0, rx, delta, f1, base);
  parts.if_mx0 = influence_term(bmx, lmx_0, lmx_0, ones, 0.0, f2, base);
  parts.if_mxd = influence_term(bmx, lmx_s, lmx_0, rmx, delta, f3, base);

  MatrixXd wb(n, base.cols());
  for (Index i = 0; i < n; ++i) wb.row(i) = exp_or_zero(lw(i)) * base.row(i);
  parts.cond_mean = fitted(series.design, wb);
  parts.centering = wb.colwise().mean().transpose();
  return parts;
}

MatrixXd assemble_d(const MediationFit& fit, const Nuisances& nuisances, const SeriesFit& series) {
  return assemble_parts(fit, nuisances, series).d();
}

CbsInference::CbsInference(CbsEstimator& estimator, const Nuisances& nuisances)
    : estimator_(&estimator), nuisances_(&nuisances) {}

const MatrixXd& CbsInference::scaled_d(double delta) {
  auto it = cache_.find(delta);
  if (it != cache_.end()) return it->second;
  const SeriesFit& s = estimator_->series(delta);
  const MatrixXd d = assemble_d(estimator_->fit(), *nuisances_, s);
  const MatrixXd solved = linops::solve_spd(s.phi, d.transpose(), kRidge).x;  // K0 x N
  return cache_.emplace(delta, solved.transpose()).first->second;
}

VectorXd CbsInference::influence(double t, double t_prime) {
  const double delta = t_prime - t;
  const MatrixXd& sd = scaled_d(delta);
  return sd * (*estimator_->series(delta).basis)(t);
}

VarianceReport CbsInference::variance(double t, double t_prime) {
  const VectorXd phi = influence(t, t_prime);
  VarianceReport r;
  r.v_hat = phi.squaredNorm() / static_cast<double>(phi.size());
  r.se = std::sqrt(r.v_hat / static_cast<double>(phi.size()));
  r.floored = nuisances_->floored();
  r.ridge_applied = estimator_->series(t_prime - t).ridge_applied;
  return r;
}

double CbsInference::panel_se(Panel panel, double t, double t_prime) {
  VectorXd total;
  for (const auto& term : panel_terms(panel, t, t_prime)) {
    const VectorXd phi = term.sign * influence(term.t, term.t_prime);
    if (total.size() == 0) total = phi; else total += phi;
  }
  const double n = static_cast<double>(total.size());
  return std::sqrt(total.squaredNorm() / n / n);
}

VarianceReport variance_cbs(CbsEstimator& estimator, const Nuisances& nuisances, double t, double t_prime) {
  CbsInference inf(estimator, nuisances);
  return inf.variance(t, t_prime);
}

void attach_plugin_se(std::vector<EffectCurve>& curves, CbsInference& inference) {
  for (auto& c : curves) {
    const Index g = static_cast<Index>(c.grid.size());
    c.se.resize(g);
    c.ci_low.resize(g);
    c.ci_high.resize(g);
    for (Index k = 0; k < g; ++k) {
      c.se(k) = inference.panel_se(c.panel, c.grid[static_cast<std::size_t>(k)], c.t_prime);
      c.ci_low(k) = c.estimate(k) - 1.959963984540054 * c.se(k);
      c.ci_high(k) = c.estimate(k) + 1.959963984540054 * c.se(k);
    }
  }
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile: no values");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BootstrapResult bootstrap_ci(const CurveFunction& estimator, const Dataset& data, int replicates, std::uint64_t seed,
                             int threads) {
  if (replicates < 50) throw std::invalid_argument("bootstrap: at least 50 replicates are required");
  BootstrapResult out;
  out.curves = estimator(data);
  out.replicates = replicates;
  const Index n = data.n();

  std::vector<std::optional<std::vector<EffectCurve>>> draws(static_cast<std::size_t>(replicates));
  parallel_for(draws.size(), threads, [&](std::size_t b) {
    Rng rng(derive_seed(seed, 0xb007, b));
    std::vector<Index> rows(static_cast<std::size_t>(n));
    for (auto& r : rows) r = static_cast<Index>(rng.index(static_cast<std::uint64_t>(n)));
    try {
      auto curves = estimator(data.subset(rows));
      bool finite = curves.size() == out.curves.size();
      for (const auto& c : curves) finite = finite && c.estimate.allFinite();
      if (finite) draws[b] = std::move(curves);
    } catch (const std::exception&) {
    }
  });

  for (const auto& d : draws) out.dropped += d ? 0 : 1;
  if (out.dropped * 10 > replicates) {
    throw std::runtime_error("bootstrap: " + std::to_string(out.dropped) + " of " + std::to_string(replicates) +
                             " replicates failed");
  }
  for (std::size_t c = 0; c < out.curves.size(); ++c) {
    EffectCurve& curve = out.curves[c];
    const Index g = curve.estimate.size();
    curve.ci_low.resize(g);
    curve.ci_high.resize(g);
    for (Index k = 0; k < g; ++k) {
      std::vector<double> values;
      for (const auto& d : draws) {
        if (d) values.push_back((*d)[c].estimate(k));
      }
      curve.ci_low(k) = std::min(quantile(values, 0.025), curve.estimate(k));
      curve.ci_high(k) = std::max(quantile(values, 0.975), curve.estimate(k));
    }
  }
  return out;
}

}  // namespace medcal
