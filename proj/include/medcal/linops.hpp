#pragma once

// Small dense linear-algebra kernel shared by every estimator: SPD solves
// with a ridge fallback, least squares through the normal equations, and
// Kronecker helpers for tensor-product sieves.

#include <Eigen/Dense>

namespace medcal::linops {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct SolveDiagnostics {
  bool ridge_applied = false;
  double ridge = 0.0;               // lambda actually added to the diagonal
  double condition_estimate = 0.0;  // reciprocal condition number from the Cholesky factor
  double residual_norm = 0.0;       // ||(A + lambda I) x - b||_F
};

struct SpdSolution {
  MatrixXd x;
  SolveDiagnostics diagnostics;
};

/// Solves (A + lambda I) x = b. lambda is zero when the Cholesky factorisation
/// succeeds with a reasonable reciprocal condition number; otherwise it is
/// ridge_floor * trace(A) / dim, escalated by powers of ten until the factor exists.
/// Throws std::invalid_argument if A is not symmetric to 1e-10 (relative).
SpdSolution solve_spd(const MatrixXd& a, const MatrixXd& b, double ridge_floor = 1e-10);

/// Normal-equation least squares, coefficients are K x p.
MatrixXd least_squares(const MatrixXd& design, const MatrixXd& response, double ridge_floor = 1e-10,
                       SolveDiagnostics* diagnostics = nullptr);

/// Weighted variant: minimises sum_i w_i ||response_i - design_i^T beta||^2 with w_i >= 0.
MatrixXd weighted_least_squares(const MatrixXd& design, const MatrixXd& response, const VectorXd& weights,
                                double ridge_floor = 1e-10, SolveDiagnostics* diagnostics = nullptr);

/// N^{-1} X^T X.
MatrixXd gram(const MatrixXd& design);

/// kron(a, b) = (a_0 b, a_1 b, ...).
VectorXd kron(const VectorXd& a, const VectorXd& b);

/// Row-wise Kronecker product of two designs with the same number of rows.
MatrixXd row_kron(const MatrixXd& a, const MatrixXd& b);

}  // namespace medcal::linops
