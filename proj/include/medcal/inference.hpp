#pragma once

// Plug-in influence-function variance for the sieve estimator and pairs
// bootstrap intervals for any curve estimator.
//
// For a weight pi_Z estimated by calibration and a response phi,
//   IF_Z{d, phi}_i = pi_Z(T_i + d, Z_i) phi_i - psi_i
//                    + E[psi | Z_i] - E[psi] + E[psi | T_i] - E[psi],
//   psi_i = pi_Z(T_i, Z_i) r_i h(T_i - d, Z_i),
//   r_i   = f_{T|Z}(T_i - d | Z_i) / f_{T|Z}(T_i | Z_i),
// where h(s, z) = E[phi | T = s, Z = z] is a series regression on u_k1 (x) v_kZ
// evaluated at the shifted treatment. Conditional means given Z use v_kZ, given
// T use u_K0, and E[.] is a sample mean.

#include "medcal/estimators.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

namespace medcal {

/// Nuisance values in log space. log_pi returns log pi_Z(T_i + d, Z_i) for every
/// observation; -inf means a zero weight and +inf an infinite one (products with
/// a -inf factor are taken to be zero). density_ratio returns r_i above.
class Nuisances {
 public:
  virtual ~Nuisances() = default;
  virtual VectorXd log_pi(WeightTarget which, double delta) const = 0;
  virtual VectorXd density_ratio(WeightTarget which, double delta) const = 0;
  virtual Index floored() const { return 0; }
};

/// Calibration weights plus Gaussian-kernel conditional densities with
/// rule-of-thumb bandwidths C sd N^{-1/(4 + dim)}. Discrete treatments use the
/// kernel-weighted conditional mass of the matching level instead of a kernel in t.
class PluginNuisances : public Nuisances {
 public:
  explicit PluginNuisances(const MediationFit& fit, double bandwidth_constant = 1.06);
  VectorXd log_pi(WeightTarget which, double delta) const override;
  VectorXd density_ratio(WeightTarget which, double delta) const override;
  Index floored() const override { return floored_; }

 private:
  const MediationFit* fit_;
  double constant_;
  mutable Index floored_ = 0;
};

/// exp(a + b) with the convention that a -inf factor gives 0.
double product_exp(double log_a, double log_b);

/// Bases used by the nuisance regressions for one weight function.
struct InfluenceBases {
  const CalibrationProblem* problem;  // u_k1 and v_kZ designs
  const MatrixXd* outcome_design;     // u_K0(T_i), for E[. | T]
  const VectorXd* t;
};

/// One IF_Z{d, phi} term with phi_i = exp(log_factor_i) * base.row(i).
MatrixXd influence_term(const InfluenceBases& bases, const VectorXd& log_pi_shift, const VectorXd& log_pi,
                        const VectorXd& density_ratio, double delta, const VectorXd& log_factor,
                        const MatrixXd& base);

struct InfluenceParts {
  MatrixXd if_x;        // IF_X{d, pi_MX(T)/pi_MX(T+d) u Y}
  MatrixXd if_mx0;      // IF_MX{0, pi_X(T+d)/pi_MX(T+d) u Y}
  MatrixXd if_mxd;      // IF_MX{d, pi_MX(T) pi_X(T+d)/pi_MX(T+d)^2 u Y}
  MatrixXd cond_mean;   // E[w u Y | T]
  VectorXd centering;   // N^{-1} sum_i w_i u_i Y_i

  /// if_x + if_mx0 - if_mxd - cond_mean + centering.
  MatrixXd d() const;
};

InfluenceParts assemble_parts(const MediationFit& fit, const Nuisances& nuisances, const SeriesFit& series);
MatrixXd assemble_d(const MediationFit& fit, const Nuisances& nuisances, const SeriesFit& series);

struct VarianceReport {
  double v_hat = 0.0;
  double se = 0.0;
  Index floored = 0;
  bool ridge_applied = false;
};

/// Per-observation influence values u_K0(t)^T Phi^{-1} d_i for mu(t, t') and
/// their quadratic-form summaries. Wraps a CbsEstimator so that the same K0
/// and outcome regression are used for the point estimate and its variance.
class CbsInference {
 public:
  CbsInference(CbsEstimator& estimator, const Nuisances& nuisances);
  VectorXd influence(double t, double t_prime);
  VarianceReport variance(double t, double t_prime);
  /// Standard error of a panel, from the summed influence values of its terms.
  double panel_se(Panel panel, double t, double t_prime);

 private:
  const MatrixXd& scaled_d(double delta);  // d_i^T Phi^{-1}, N x K0
  CbsEstimator* estimator_;
  const Nuisances* nuisances_;
  std::map<double, MatrixXd> cache_;
};

VarianceReport variance_cbs(CbsEstimator& estimator, const Nuisances& nuisances, double t, double t_prime);

/// Fills se and the normal 95% interval of every curve.
void attach_plugin_se(std::vector<EffectCurve>& curves, CbsInference& inference);

using CurveFunction = std::function<std::vector<EffectCurve>(const Dataset&)>;

struct BootstrapResult {
  std::vector<EffectCurve> curves;  // point estimates on the full sample, with ci_low/ci_high
  int replicates = 0;
  int dropped = 0;
};

/// Pairs bootstrap with percentile 95% bounds (widened to contain the point
/// estimate). Replicate b resamples with the stream derive_seed(seed, 0xb007, b),
/// so results do not depend on `threads`. Failed replicates are dropped; more than
/// 10% dropped throws std::runtime_error. Requires B >= 50.
BootstrapResult bootstrap_ci(const CurveFunction& estimator, const Dataset& data, int replicates,
                             std::uint64_t seed, int threads = 1);

/// Type-7 sample quantile of unsorted values.
double quantile(std::vector<double> values, double p);

}  // namespace medcal
