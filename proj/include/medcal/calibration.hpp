#pragma once

// Entropy-calibrated estimation of the stabilised weight
//   pi_Z(t, z) = f_T(t) / f_{T|Z}(t | z),   Z in {X, (M, X)}.
// Weights have the exponential-tilting form pi(t, z) = exp(-u(t)^T L v(z) - 1),
// where L maximises the strictly concave dual
//   G(L) = N^{-1} sum_i rho(u_i^T L v_i) - ubar^T L vbar,   rho(s) = -exp(-s - 1).
// At the optimum N^{-1} sum_i pi_i u_i v_i^T = ubar vbar^T (sample balancing).

#include "medcal/basis.hpp"

#include <Eigen/Dense>

#include <span>

namespace medcal {

/// Which stabilised weight: pi_X or pi_{M,X}.
enum class WeightTarget { x, mx };

struct CalibrationProblem {
  Basis treatment_basis;  // u, dimension k1
  Basis z_basis;          // v, dimension kZ
  MatrixXd design_u;      // N x k1
  MatrixXd design_v;      // N x kZ
  VectorXd mean_u;
  VectorXd mean_v;
  MatrixXd scores_design;  // N x (k1 kZ), row i = vec(u_i v_i^T) in column-major order

  Index n() const { return design_u.rows(); }
  int k1() const { return treatment_basis.dimension(); }
  int kz() const { return z_basis.dimension(); }
};

/// Builds the sample moments for treatment values t (length N) and Z rows z (N x arity).
CalibrationProblem make_calibration_problem(Basis treatment_basis, Basis z_basis, const VectorXd& t,
                                            const MatrixXd& z);

struct SolverOptions {
  double tolerance = 1e-8;      // sup-norm of the dual gradient
  int max_iterations = 100;
  double ridge = 1e-10;         // Hessian ridge, relative to trace / dim
  double armijo_slope = 1e-4;
  double backtrack = 0.5;
  double score_floor = -40.0;   // scores below this are floored inside exp when evaluating weights
};

struct DualValue {
  double value = 0.0;  // -infinity when exp(-s - 1) overflows for some observation
  MatrixXd gradient;   // k1 x kZ
};

DualValue dual_objective(const CalibrationProblem& problem, const MatrixXd& lambda);

struct CalibrationFit {
  MatrixXd lambda;             // k1 x kZ
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  VectorXd in_sample_weights;  // pi_hat_i, strictly positive
  Index clipped_scores = 0;    // evaluations with a floored score
  int ridge_events = 0;        // Newton steps that needed a Hessian ridge
  double score_floor = -40.0;
};

/// Damped Newton ascent on G started from weights identically one. Never throws
/// for non-convergence; the returned fit carries converged = false instead.
CalibrationFit solve_dual(const CalibrationProblem& problem, const SolverOptions& options = {});

/// Max-abs entry of N^{-1} sum_i pi_i u_i v_i^T - ubar vbar^T.
double balancing_residual(const CalibrationProblem& problem, const VectorXd& weights);

/// log pi_hat(t, z) = -u(t)^T L v(z) - 1, with the score floored at fit.score_floor.
double log_weight(const CalibrationFit& fit, const CalibrationProblem& problem, double t, std::span<const double> z,
                  bool* extrapolated = nullptr);

/// pi_hat(t, z) = exp(log_weight).
double evaluate_weight(const CalibrationFit& fit, const CalibrationProblem& problem, double t,
                       std::span<const double> z, bool* extrapolated = nullptr);

/// pi_hat(t, z) / pi_hat(t_shift, z) = exp(-{u(t) - u(t_shift)}^T L v(z)).
double weight_ratio(const CalibrationFit& fit, const CalibrationProblem& problem, double t, double t_shift,
                    std::span<const double> z);

/// log pi_hat(t_i, Z_i) for the sample rows Z_i and arbitrary treatment values t_i
/// (typically T_i + delta). Counts extrapolated treatment evaluations.
VectorXd log_weights_at(const CalibrationFit& fit, const CalibrationProblem& problem, const VectorXd& t,
                        Index* extrapolated = nullptr);

}  // namespace medcal
