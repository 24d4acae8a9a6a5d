#pragma once

// Effect-curve estimators of mu(t, t') = E[Y{t, M(t')}]:
//   CBS  series regression of w_i Y_i on u_K0(T_i), evaluated at t,
//   CBK  weighted Nadaraya-Watson ratio,
// with w_i = pi_MX(T_i, M_i, X_i) / pi_MX(T_i + d, M_i, X_i) * pi_X(T_i + d, X_i),
// d = t' - t. OLS (product of coefficients) and binary IPW serve as baselines.

#include "medcal/basis.hpp"
#include "medcal/calibration.hpp"
#include "medcal/dataset.hpp"
#include "medcal/kernels.hpp"

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace medcal {

struct SieveDims {
  int k1 = 3;   // treatment sieve of both weight functions
  int kx = 3;   // per-coordinate confounder sieve
  int kmx = 3;  // per-coordinate (mediator, confounder) sieve
  int k0 = 3;   // outcome regression sieve
};

/// u_k(t) for the dataset's treatment kind. Discrete treatments always use the
/// saturated indicator basis (dimension = number of levels) whatever `dim` says.
Basis treatment_basis(const Dataset& data, int dim);

struct MediationFit {
  Dataset data;
  SieveDims dims;
  CalibrationProblem problem_x;
  CalibrationProblem problem_mx;
  CalibrationFit fit_x;
  CalibrationFit fit_mx;

  bool converged() const { return fit_x.converged && fit_mx.converged; }
};

/// Fits both calibration problems. Non-convergence is reported through
/// converged(), not thrown.
MediationFit fit_mediation(const Dataset& data, const SieveDims& dims, const SolverOptions& options = {});

/// Combined weights at shift d, in logs and levels.
struct ShiftedWeights {
  double delta = 0.0;
  VectorXd log_x_shift;    // log pi_X(T_i + d, X_i)
  VectorXd log_mx;         // log pi_MX(T_i, M_i, X_i)
  VectorXd log_mx_shift;   // log pi_MX(T_i + d, M_i, X_i)
  VectorXd w;              // combined weight
  Index extrapolated = 0;  // shifted treatment values outside the sieve domain
};

ShiftedWeights combined_weights(const MediationFit& fit, double delta);

/// Per-shift weight cache. Not thread-safe; one instance per worker.
class WeightCache {
 public:
  explicit WeightCache(const MediationFit& fit) : fit_(&fit) {}
  const ShiftedWeights& at(double delta);
  const MediationFit& fit() const { return *fit_; }

 private:
  const MediationFit* fit_;
  std::map<double, ShiftedWeights> cache_;
};

/// Outcome regression of w Y on u_K0(T) for one shift.
struct SeriesFit {
  double delta = 0.0;
  int k0 = 0;
  std::shared_ptr<const Basis> basis;  // u_K0
  MatrixXd design;                     // N x K0
  MatrixXd phi;                        // N^{-1} design^T design
  VectorXd gamma;
  bool ridge_applied = false;
  std::vector<double> loo_scores;  // per candidate when K0 was selected by LOO
  std::vector<int> loo_candidates;

  double predict(double t) const;
};

struct CbsOptions {
  int k0 = 0;                                      // 0: select per shift by leave-one-out
  std::vector<int> k0_candidates{2, 3, 4, 5, 6, 7, 8};
};

/// Sieve estimator of mu(t, t') with per-shift caching.
class CbsEstimator {
 public:
  CbsEstimator(const MediationFit& fit, CbsOptions options = {});
  double mu(double t, double t_prime);
  const SeriesFit& series(double delta);
  WeightCache& weights() { return weights_; }
  const MediationFit& fit() const { return weights_.fit(); }

 private:
  WeightCache weights_;
  CbsOptions options_;
  std::map<double, SeriesFit> fits_;
};

/// Outcome basis of dimension k0 (saturated indicators for discrete treatments).
Basis outcome_basis(const Dataset& data, int k0);

/// Series fit of `response` on u_K0(T) at fixed k0.
SeriesFit fit_series(const Dataset& data, const VectorXd& response, int k0, double delta = 0.0);

double cbs_mu(const MediationFit& fit, double t, double t_prime, const CbsOptions& options = {});

/// Kernel estimator of mu(t, t'). Throws std::invalid_argument for discrete treatments and
/// std::runtime_error naming t when the kernel neighbourhood is empty.
class CbkEstimator {
 public:
  CbkEstimator(const MediationFit& fit, KernelSpec kernel);
  double mu(double t, double t_prime);
  const KernelSpec& kernel() const { return kernel_; }

 private:
  WeightCache weights_;
  KernelSpec kernel_;
};

double cbk_mu(const MediationFit& fit, double t, double t_prime, const KernelSpec& kernel);

/// Weighted Nadaraya-Watson ratio sum_i w_i K_h(T_i - t) Y_i / sum_i w_i K_h(T_i - t).
double weighted_nw(const VectorXd& t_data, const VectorXd& y, const VectorXd& w, double t, const KernelSpec& kernel);

using MuFunction = std::function<double(double, double)>;

struct EffectDecomposition {
  double total = 0.0;
  double direct = 0.0;
  double indirect = 0.0;
};

/// total = mu(t,t) - mu(t',t'), direct = mu(t,t) - mu(t',t), indirect = mu(t',t) - mu(t',t').
EffectDecomposition effect_decomposition(const MuFunction& mu, double t, double t_prime);

/// Curves reported against t for a fixed benchmark t':
///   dose      mu(t, t)
///   cross     mu(t, t')
///   direct1   mu(t, t)  - mu(t', t)
///   direct2   mu(t, t') - mu(t', t')
///   indirect1 mu(t, t)  - mu(t, t')
///   indirect2 mu(t', t) - mu(t', t')
enum class Panel { dose, cross, direct1, direct2, indirect1, indirect2 };

std::string to_string(Panel panel);
Panel panel_from_string(const std::string& name);
const std::vector<Panel>& effect_panels();  // the four difference panels
const std::vector<Panel>& all_panels();

/// A panel value is sum_k sign_k mu(a_k, b_k).
struct PanelTerm {
  double sign;
  double t;
  double t_prime;
};
std::vector<PanelTerm> panel_terms(Panel panel, double t, double t_prime);

double panel_value(Panel panel, const MuFunction& mu, double t, double t_prime);

struct EffectCurve {
  std::string method;
  Panel panel = Panel::dose;
  double t_prime = 0.0;
  std::vector<double> grid;
  VectorXd estimate;
  VectorXd se;       // empty when unavailable
  VectorXd ci_low;   // empty when unavailable
  VectorXd ci_high;
};

std::vector<EffectCurve> effect_curves(const MuFunction& mu, const std::vector<double>& grid, double t_prime,
                                       const std::string& method, const std::vector<Panel>& panels);

/// Product-of-coefficients linear mediation: M ~ (1, T, X), Y ~ (1, T, M, X).
struct OlsFit {
  MatrixXd mediator_coef;  // (2 + r) x s
  VectorXd outcome_coef;   // 2 + s + r
  VectorXd x_mean;
  double mu(double t, double t_prime) const;
};

OlsFit ols_baseline(const Dataset& data);

/// Logistic regression by Newton-Raphson (IRLS) with a ridge guard.
VectorXd logistic_fit(const MatrixXd& design, const VectorXd& response, int max_iterations = 50,
                      double tolerance = 1e-10);

struct IpwOptions {
  int per_coordinate = 3;  // quadratic polynomial in each coordinate, full tensor product
  double clip = 1e-6;
  bool self_normalized = true;
};

struct IpwFit {
  VectorXd p1_mx;  // P(T = 1 | M_i, X_i)
  VectorXd p1_x;   // P(T = 1 | X_i)
  Index clipped = 0;
  Dataset data;
  IpwOptions options;
  /// t, t' in {0, 1}.
  double mu(double t, double t_prime) const;
};

/// Series-logit inverse probability weighting for a binary {0, 1} treatment.
IpwFit ipw_binary_baseline(const Dataset& data, const IpwOptions& options = {});

/// IPW estimate from given propensities (no fitting).
double ipw_mu(const Dataset& data, const VectorXd& p1_mx, const VectorXd& p1_x, double t, double t_prime,
              bool self_normalized);

}  // namespace medcal
