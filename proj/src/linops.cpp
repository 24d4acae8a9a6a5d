#include "medcal/linops.hpp"

#include <cmath>
#include <stdexcept>

namespace medcal::linops {

namespace {

constexpr double kSymmetryTolerance = 1e-10;
constexpr double kMinReciprocalCondition = 1e-13;

void check_symmetric(const MatrixXd& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("solve_spd: matrix is not square");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= kSymmetryTolerance * scale)) {
    throw std::invalid_argument("solve_spd: matrix is not symmetric (max asymmetry " + std::to_string(asym) + ")");
  }
}

}  // namespace

SpdSolution solve_spd(const MatrixXd& a, const MatrixXd& b, double ridge_floor) {
  check_symmetric(a);
  if (b.rows() != a.rows()) throw std::invalid_argument("solve_spd: right-hand side has wrong row count");

  const Index dim = a.rows();
  SpdSolution out;
  if (dim == 0) {
    out.x = MatrixXd::Zero(0, b.cols());
    return out;
  }

  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() == Eigen::Success && llt.rcond() > kMinReciprocalCondition) {
    out.x = llt.solve(b);
    out.diagnostics.condition_estimate = llt.rcond();
  } else {
    double trace = a.trace();
    if (!(trace > 0.0)) trace = static_cast<double>(dim);
    double lambda = std::max(ridge_floor, 1e-300) * trace / static_cast<double>(dim);
    MatrixXd shifted = a;
    for (int attempt = 0; attempt < 40; ++attempt) {
      shifted.diagonal() = a.diagonal().array() + lambda;
      llt.compute(shifted);
      if (llt.info() == Eigen::Success && llt.rcond() > kMinReciprocalCondition) break;
      lambda *= 10.0;
    }
    if (llt.info() != Eigen::Success) throw std::runtime_error("solve_spd: ridge escalation failed");
    out.x = llt.solve(b);
    out.diagnostics.ridge_applied = true;
    out.diagnostics.ridge = lambda;
    out.diagnostics.condition_estimate = llt.rcond();
  }

  MatrixXd lhs = a;
  lhs.diagonal().array() += out.diagnostics.ridge;
  out.diagnostics.residual_norm = (lhs * out.x - b).norm();
  return out;
}

MatrixXd least_squares(const MatrixXd& design, const MatrixXd& response, double ridge_floor,
                       SolveDiagnostics* diagnostics) {
  if (design.rows() != response.rows()) throw std::invalid_argument("least_squares: row mismatch");
  if (design.rows() < 1) throw std::invalid_argument("least_squares: empty design");
  MatrixXd xtx = MatrixXd::Zero(design.cols(), design.cols());
  xtx.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose());
  xtx.triangularView<Eigen::Upper>() = xtx.transpose();
  const MatrixXd xty = design.transpose() * response;
  auto sol = solve_spd(xtx, xty, ridge_floor);
  if (diagnostics) *diagnostics = sol.diagnostics;
  return sol.x;
}

MatrixXd weighted_least_squares(const MatrixXd& design, const MatrixXd& response, const VectorXd& weights,
                                double ridge_floor, SolveDiagnostics* diagnostics) {
  if (weights.size() != design.rows()) throw std::invalid_argument("weighted_least_squares: weight length");
  const VectorXd root = weights.cwiseMax(0.0).cwiseSqrt();
  const MatrixXd wx = design.array().colwise() * root.array();
  const MatrixXd wy = response.array().colwise() * root.array();
  return least_squares(wx, wy, ridge_floor, diagnostics);
}

MatrixXd gram(const MatrixXd& design) {
  if (design.rows() < 1) throw std::invalid_argument("gram: empty design");
  MatrixXd g = MatrixXd::Zero(design.cols(), design.cols());
  g.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose(), 1.0 / static_cast<double>(design.rows()));
  g.triangularView<Eigen::Upper>() = g.transpose();
  return g;
}

VectorXd kron(const VectorXd& a, const VectorXd& b) {
  VectorXd out(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

MatrixXd row_kron(const MatrixXd& a, const MatrixXd& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("row_kron: row mismatch");
  MatrixXd out(a.rows(), a.cols() * b.cols());
  for (Index j = 0; j < a.cols(); ++j) {
    out.middleCols(j * b.cols(), b.cols()) = b.array().colwise() * a.col(j).array();
  }
  return out;
}

}  // namespace medcal::linops
