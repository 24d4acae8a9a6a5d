#pragma once

// Simulation designs, true effect curves, true-weight comparators and the
// Monte Carlo ARMSE harness.
//
// X ~ U[-1.5, 1.5]; e, U, V ~ U[-2, 2] independent.
// Continuous: T = 0.3 X + e.  Binary: T ~ Bernoulli(exp(X) / (1 + exp(X))).
// M = 0.3 T + 0.3 X + V.
//   I    Y = 0.3 T + 0.3 M + 0.5 T M + 0.3 X + U
//   II   Y = 0.3 T + 0.3 M + 0.3 X + 0.25 T^3 + U
//   III  Y = 0.3 T + 0.3 M + 0.5 T M + 0.3 X + 0.25 T^3 + U   (also the binary outcome)

#include "medcal/dataset.hpp"
#include "medcal/estimators.hpp"
#include "medcal/inference.hpp"
#include "medcal/tuning.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace medcal {

enum class Scenario { I, II, III, binary };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& name);

struct DgpSpec {
  Scenario scenario = Scenario::I;
  Index n = 500;
  std::uint64_t seed = 1;
};

Dataset generate(const DgpSpec& spec);

double true_mu(Scenario scenario, double t, double t_prime);

/// Default evaluation grid {-1.5, ..., -0.1, 0.1, ..., 1.5}.
std::vector<double> default_grid();

/// Analytic design densities.
namespace truth {
double logistic(double x);
/// Density of 0.3 X + e (a trapezoid).
double treatment_marginal(double t);
/// f_{T|X}(t | x); for the binary design the mass P(T = t | x).
double treatment_conditional(Scenario s, double t, double x);
/// f_{M|T,X}(m | t, x) = 1/4 on |m - 0.3 t - 0.3 x| <= 2.
double mediator_conditional(double m, double t, double x);
/// f_T(t) f_{M|T,X}(M | t + delta, X) / {f_{T|X}(t | X) f_{M|T,X}(M | t, X)} at t = T_i,
/// the weight pi_MX(T)/pi_MX(T + delta) pi_X(T + delta) written without the
/// cancelling factors, which keeps it finite on the boundaries of the box supports.
VectorXd combined_weights(Scenario s, const Dataset& data, double delta);
}  // namespace truth

/// Series regression of true-weight responses (the oracle comparator), K0 by
/// leave-one-out per shift unless options.k0 > 0.
class OracleEstimator {
 public:
  OracleEstimator(const Dataset& data, Scenario scenario, CbsOptions options = {});
  double mu(double t, double t_prime);

 private:
  const Dataset* data_;
  Scenario scenario_;
  CbsOptions options_;
  std::map<double, SeriesFit> fits_;
};

double oracle_series_mu(const Dataset& data, Scenario scenario, double t, double t_prime, int k0);

/// Exact nuisances of the binary design, for the influence-function cross-check.
/// Treatment values outside {0, 1} get log pi = 0: they only ever multiply zero
/// entries of the saturated outcome basis.
class TrueBinaryNuisances : public Nuisances {
 public:
  explicit TrueBinaryNuisances(const Dataset& data) : data_(&data) {}
  VectorXd log_pi(WeightTarget which, double delta) const override;
  VectorXd density_ratio(WeightTarget which, double delta) const override;

 private:
  const Dataset* data_;
};

/// Efficient influence function of mu(t, t') for the binary design at row i.
double eif_binary(const Dataset& data, Index i, double t, double t_prime);

enum class McEstimator { cbs, cbk, ols, ipw, oracle, truth };

std::string to_string(McEstimator e);
McEstimator mc_estimator_from_string(const std::string& name);

struct McConfig {
  std::vector<Scenario> scenarios{Scenario::I, Scenario::II, Scenario::III};
  std::vector<Index> sample_sizes{500, 1000};
  int trials = 200;
  std::vector<McEstimator> estimators{McEstimator::cbs, McEstimator::cbk};
  std::vector<double> grid = default_grid();  // binary runs always use t = 1
  double t_prime = 0.0;
  std::uint64_t seed = 20240601;
  int threads = 0;
  bool retune_each_trial = true;  // false: tune once on the first trial of each cell
  SieveDims fixed_dims{};          // used when use_fixed_dims
  bool use_fixed_dims = false;
  TuningGrid tuning{};
  KernelFamily kernel = KernelFamily::epanechnikov2;
  double bandwidth_constant = 0.0;  // 0: kernel default
  bool keep_trials = false;
};

struct McCell {
  Scenario scenario;
  Index n;
  McEstimator estimator;
  Panel panel;
  double armse = 0.0;        // grid average of per-point RMSE (not scaled)
  int successes = 0;
  int failures = 0;
  std::vector<double> rmse;  // per grid point
  std::vector<std::vector<double>> trial_estimates;  // [trial][grid point], when keep_trials
};

struct McReport {
  McConfig config;
  std::vector<McCell> cells;
  bool failed = false;  // some estimator failed in more than 5% of its trials
  std::string failure_message;

  const McCell& cell(Scenario s, Index n, McEstimator e, Panel p) const;
};

/// Root mean square of errors.
double rmse(const std::vector<double>& errors);

/// Grid average of per-point RMSE; estimates[trial][g] against truth[g].
double armse(const std::vector<std::vector<double>>& estimates, const std::vector<double>& truth,
             std::vector<double>* per_point = nullptr);

/// Seed of trial `trial` in the (scenario, n) cell.
std::uint64_t trial_seed(std::uint64_t master, Scenario s, Index n, int trial);

McReport run_mc(const McConfig& config);

}  // namespace medcal
