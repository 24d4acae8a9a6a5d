#include "medcal/calibration.hpp"

#include "medcal/linops.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace medcal {

namespace {

constexpr double kExpOverflow = 700.0;

VectorXd vec(const MatrixXd& m) { return Eigen::Map<const VectorXd>(m.data(), m.size()); }

MatrixXd unvec(const VectorXd& v, Index rows, Index cols) { return Eigen::Map<const MatrixXd>(v.data(), rows, cols); }

// Sample moment target vec(ubar vbar^T).
VectorXd target(const CalibrationProblem& p) { return linops::kron(p.mean_v, p.mean_u); }

struct Evaluation {
  double value = 0.0;
  VectorXd gradient;
  VectorXd tilt;  // exp(-s_i - 1)
  bool finite = true;
};

Evaluation evaluate(const CalibrationProblem& p, const VectorXd& lambda) {
  Evaluation e;
  const VectorXd scores = p.scores_design * lambda;
  const double n = static_cast<double>(p.n());
  e.tilt.resize(scores.size());
  for (Index i = 0; i < scores.size(); ++i) {
    const double arg = -scores(i) - 1.0;
    if (!(arg < kExpOverflow)) {
      e.finite = false;
      e.value = -std::numeric_limits<double>::infinity();
      return e;
    }
    e.tilt(i) = std::exp(arg);
  }
  const VectorXd c = target(p);
  e.value = -e.tilt.sum() / n - c.dot(lambda);
  e.gradient = p.scores_design.transpose() * e.tilt / n - c;
  return e;
}

double floored_log_weight(double score, double floor, Index* clipped) {
  if (score < floor) {
    if (clipped) ++*clipped;
    score = floor;
  }
  return -score - 1.0;
}

}  // namespace

CalibrationProblem make_calibration_problem(Basis treatment_basis, Basis z_basis, const VectorXd& t,
                                            const MatrixXd& z) {
  if (t.size() != z.rows()) throw std::invalid_argument("calibration problem: T and Z lengths differ");
  if (t.size() < 1) throw std::invalid_argument("calibration problem: empty sample");
  if (treatment_basis.arity() != 1) throw std::invalid_argument("calibration problem: treatment basis must be univariate");
  CalibrationProblem p{std::move(treatment_basis), std::move(z_basis), {}, {}, {}, {}, {}};
  p.design_u = design_matrix(p.treatment_basis, t).matrix;
  p.design_v = design_matrix(p.z_basis, z).matrix;
  p.mean_u = p.design_u.colwise().mean().transpose();
  p.mean_v = p.design_v.colwise().mean().transpose();
  p.scores_design = linops::row_kron(p.design_v, p.design_u);
  return p;
}

DualValue dual_objective(const CalibrationProblem& problem, const MatrixXd& lambda) {
  if (lambda.rows() != problem.k1() || lambda.cols() != problem.kz()) {
    throw std::invalid_argument("dual_objective: lambda has the wrong shape");
  }
  if (!lambda.allFinite()) throw std::invalid_argument("dual_objective: lambda is not finite");
  const Evaluation e = evaluate(problem, vec(lambda));
  DualValue out;
  out.value = e.value;
  out.gradient = e.finite ? unvec(e.gradient, problem.k1(), problem.kz())
                          : MatrixXd::Constant(problem.k1(), problem.kz(), std::numeric_limits<double>::quiet_NaN());
  return out;
}

CalibrationFit solve_dual(const CalibrationProblem& problem, const SolverOptions& options) {
  const Index dim = static_cast<Index>(problem.k1()) * problem.kz();
  const double n = static_cast<double>(problem.n());

  // Start at weights identically one: L = -c_u c_v^T gives u^T L v = -1.
  const VectorXd cu = problem.treatment_basis.constant_coefficients();
  const VectorXd cv = problem.z_basis.constant_coefficients();
  VectorXd lambda = vec(-cu * cv.transpose());

  CalibrationFit fit;
  fit.score_floor = options.score_floor;
  Evaluation cur = evaluate(problem, lambda);
  if (!cur.finite) throw std::runtime_error("solve_dual: non-finite objective at the starting point");

  for (fit.iterations = 0; fit.iterations < options.max_iterations; ++fit.iterations) {
    fit.grad_norm = cur.gradient.cwiseAbs().maxCoeff();
    if (fit.grad_norm <= options.tolerance) {
      fit.converged = true;
      break;
    }
    // Negative Hessian: N^{-1} sum_i exp(-s_i - 1) g_i g_i^T.
    const MatrixXd weighted = problem.scores_design.array().colwise() * cur.tilt.array().sqrt();
    MatrixXd neg_hessian = MatrixXd::Zero(dim, dim);
    neg_hessian.selfadjointView<Eigen::Lower>().rankUpdate(weighted.transpose(), 1.0 / n);
    neg_hessian.triangularView<Eigen::Upper>() = neg_hessian.transpose();

    const auto step = linops::solve_spd(neg_hessian, cur.gradient, options.ridge);
    if (step.diagnostics.ridge_applied) ++fit.ridge_events;
    const VectorXd direction = step.x.col(0);
    const double slope = cur.gradient.dot(direction);

    double alpha = 1.0;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      const VectorXd trial = lambda + alpha * direction;
      Evaluation next = evaluate(problem, trial);
      if (next.finite && next.value >= cur.value + options.armijo_slope * alpha * slope) {
        lambda = trial;
        cur = std::move(next);
        accepted = true;
        break;
      }
      alpha *= options.backtrack;
    }
    if (!accepted) break;
  }
  fit.grad_norm = cur.gradient.cwiseAbs().maxCoeff();
  fit.converged = fit.grad_norm <= options.tolerance;

  fit.lambda = unvec(lambda, problem.k1(), problem.kz());
  const MatrixXd lv = problem.design_v * fit.lambda.transpose();
  const VectorXd scores = (problem.design_u.array() * lv.array()).rowwise().sum();
  fit.in_sample_weights.resize(scores.size());
  for (Index i = 0; i < scores.size(); ++i) {
    fit.in_sample_weights(i) = std::exp(floored_log_weight(scores(i), fit.score_floor, &fit.clipped_scores));
  }
  return fit;
}

double balancing_residual(const CalibrationProblem& problem, const VectorXd& weights) {
  const VectorXd moments = problem.scores_design.transpose() * weights / static_cast<double>(problem.n());
  return (moments - target(problem)).cwiseAbs().maxCoeff();
}

double log_weight(const CalibrationFit& fit, const CalibrationProblem& problem, double t, std::span<const double> z,
                  bool* extrapolated) {
  VectorXd u(problem.k1()), v(problem.kz());
  const bool in_t = problem.treatment_basis.evaluate(std::span<const double>(&t, 1), u);
  const bool in_z = problem.z_basis.evaluate(z, v);
  if (extrapolated) *extrapolated = !(in_t && in_z);
  return floored_log_weight(u.dot(fit.lambda * v), fit.score_floor, nullptr);
}

double evaluate_weight(const CalibrationFit& fit, const CalibrationProblem& problem, double t,
                       std::span<const double> z, bool* extrapolated) {
  return std::exp(log_weight(fit, problem, t, z, extrapolated));
}

double weight_ratio(const CalibrationFit& fit, const CalibrationProblem& problem, double t, double t_shift,
                    std::span<const double> z) {
  if (t == t_shift) return 1.0;
  return std::exp(log_weight(fit, problem, t, z) - log_weight(fit, problem, t_shift, z));
}

VectorXd log_weights_at(const CalibrationFit& fit, const CalibrationProblem& problem, const VectorXd& t,
                        Index* extrapolated) {
  if (t.size() != problem.n()) throw std::invalid_argument("log_weights_at: length mismatch");
  const Design du = design_matrix(problem.treatment_basis, t);
  if (extrapolated) *extrapolated += du.extrapolated;
  // s_i = u_i^T L v_i
  const MatrixXd lv = problem.design_v * fit.lambda.transpose();  // N x k1
  const VectorXd scores = (du.matrix.array() * lv.array()).rowwise().sum();
  VectorXd out(scores.size());
  for (Index i = 0; i < scores.size(); ++i) out(i) = floored_log_weight(scores(i), fit.score_floor, nullptr);
  return out;
}

}  // namespace medcal
