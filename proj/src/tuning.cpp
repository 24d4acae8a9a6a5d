#include "medcal/tuning.hpp"

#include "medcal/linops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace medcal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_candidates(const std::vector<int>& c, const char* name) {
  if (c.empty()) throw std::invalid_argument(std::string("tuning grid: empty ") + name + " list");
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] < 1) throw std::invalid_argument(std::string("tuning grid: ") + name + " entries must be >= 1");
    if (i > 0 && c[i] <= c[i - 1]) throw std::invalid_argument(std::string("tuning grid: ") + name + " must be ascending");
  }
}

int total_dim(int per_coordinate, Index coords) {
  int k = 1;
  for (Index j = 0; j < coords; ++j) k *= per_coordinate;
  return k;
}

}  // namespace

void TuningGrid::validate() const {
  check_candidates(k1_candidates, "k1");
  check_candidates(kx_candidates, "kx");
  check_candidates(kmx_candidates, "kmx");
  check_candidates(k0_candidates, "k0");
}

double gcv_criterion(const VectorXd& weights, int k1, int kz) {
  const double n = static_cast<double>(weights.size());
  const double k = static_cast<double>(k1) * kz;
  if (!(k < n)) return kInf;
  const double penalty = 1.0 - k / n;
  return (weights.array() - 1.0).square().mean() / (penalty * penalty);
}

double gcv_weights(const Dataset& data, int k1, int kz_per_coordinate, WeightTarget which, const SolverOptions& options) {
  const MatrixXd z = which == WeightTarget::x ? data.x : data.mx();
  const Basis u = treatment_basis(data, k1);
  const Basis v = covariate_basis(z, kz_per_coordinate);
  if (static_cast<Index>(u.dimension()) * v.dimension() >= data.n()) return kInf;
  const CalibrationProblem p = make_calibration_problem(u, v, data.t, z);
  CalibrationFit fit;
  try {
    fit = solve_dual(p, options);
  } catch (const std::exception&) {
    return kInf;
  }
  if (!fit.converged) return kInf;
  return gcv_criterion(fit.in_sample_weights, u.dimension(), v.dimension());
}

WeightDims select_weight_dims(const Dataset& data, const TuningGrid& grid, const SolverOptions& options) {
  grid.validate();
  WeightDims out;
  std::vector<int> k1s = grid.k1_candidates;
  if (data.kind == TreatmentKind::discrete) k1s = {static_cast<int>(data.levels.size())};

  // Candidates are visited in ascending total size so a strict '<' keeps the smaller one on ties.
  struct Cand {
    int k1, kz, total;
  };
  auto ordered = [](std::vector<Cand> c) {
    std::stable_sort(c.begin(), c.end(), [](const Cand& a, const Cand& b) { return a.total < b.total; });
    return c;
  };

  std::vector<Cand> stage1;
  for (int k1 : k1s) {
    for (int kx : grid.kx_candidates) stage1.push_back({k1, kx, k1 * total_dim(kx, data.x.cols())});
  }
  double best = kInf;
  for (const Cand& c : ordered(stage1)) {
    const double v = gcv_weights(data, c.k1, c.kz, WeightTarget::x, options);
    out.audit.push_back({WeightTarget::x, c.k1, c.kz, v});
    if (v < best) {
      best = v;
      out.k1 = c.k1;
      out.kx = c.kz;
    }
  }
  if (!std::isfinite(best)) throw std::runtime_error("weight tuning: every (k1, kx) candidate failed");

  std::vector<Cand> stage2;
  const Index mx_cols = data.m.cols() + data.x.cols();
  for (int kmx : grid.kmx_candidates) stage2.push_back({out.k1, kmx, total_dim(kmx, mx_cols)});
  best = kInf;
  for (const Cand& c : ordered(stage2)) {
    const double v = gcv_weights(data, c.k1, c.kz, WeightTarget::mx, options);
    out.audit.push_back({WeightTarget::mx, c.k1, c.kz, v});
    if (v < best) {
      best = v;
      out.kmx = c.kz;
    }
  }
  if (!std::isfinite(best)) throw std::runtime_error("weight tuning: every kmx candidate failed");
  return out;
}

LooResult loocv_series(const Dataset& data, const VectorXd& response, const std::vector<int>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("loocv: no candidates");
  LooResult out;
  if (data.kind == TreatmentKind::discrete) {
    out.selected = static_cast<int>(data.levels.size());
    return out;
  }
  const Index n = data.n();
  double best = kInf;
  for (int k0 : candidates) {
    if (k0 >= n - 1) continue;
    const Basis b = outcome_basis(data, k0);
    const MatrixXd d = design_matrix(b, data.t).matrix;
    MatrixXd xtx = MatrixXd::Zero(d.cols(), d.cols());
    xtx.selfadjointView<Eigen::Lower>().rankUpdate(d.transpose());
    xtx.triangularView<Eigen::Upper>() = xtx.transpose();
    const Eigen::LDLT<MatrixXd> ldlt(xtx);
    const VectorXd gamma = ldlt.solve(d.transpose() * response);
    const MatrixXd solved = ldlt.solve(d.transpose());  // K x N
    double score = 0.0;
    bool ok = ldlt.info() == Eigen::Success;
    for (Index i = 0; i < n && ok; ++i) {
      const double h = d.row(i).dot(solved.col(i));
      if (!(1.0 - h > 1e-12)) {
        ok = false;
        break;
      }
      const double e = (response(i) - d.row(i).dot(gamma)) / (1.0 - h);
      score += e * e;
    }
    const double value = ok ? score / static_cast<double>(n) : kInf;
    out.candidates.push_back(k0);
    out.scores.push_back(value);
    if (value < best) {
      best = value;
      out.selected = k0;
    }
  }
  if (out.selected == 0) throw std::runtime_error("loocv: no admissible K0 candidate");
  return out;
}

std::vector<double> loocv_series_bruteforce(const Dataset& data, const VectorXd& response,
                                            const std::vector<int>& candidates) {
  const Index n = data.n();
  std::vector<double> out;
  for (int k0 : candidates) {
    if (k0 >= n - 1) continue;
    const Basis b = outcome_basis(data, k0);
    const MatrixXd d = design_matrix(b, data.t).matrix;
    double score = 0.0;
    for (Index i = 0; i < n; ++i) {
      MatrixXd di(n - 1, d.cols());
      VectorXd ri(n - 1);
      for (Index j = 0, r = 0; j < n; ++j) {
        if (j == i) continue;
        di.row(r) = d.row(j);
        ri(r++) = response(j);
      }
      const VectorXd g = linops::least_squares(di, ri, 0.0).col(0);
      const double e = response(i) - d.row(i).dot(g);
      score += e * e;
    }
    out.push_back(score / static_cast<double>(n));
  }
  return out;
}

LooResult loocv_k0(const MediationFit& fit, const std::vector<int>& candidates, double delta) {
  const ShiftedWeights w = combined_weights(fit, delta);
  return loocv_series(fit.data, w.w.cwiseProduct(fit.data.y), candidates);
}

double select_bandwidth(Index n, double constant, KernelFamily family) {
  if (n < 2) throw std::invalid_argument("bandwidth: need at least two observations");
  const double c = constant > 0.0 ? constant : default_constant(family);
  return c * std::pow(static_cast<double>(n), -0.25);
}

TuningResult tune(const Dataset& data, const TuningGrid& grid, const SolverOptions& options) {
  const WeightDims dims = select_weight_dims(data, grid, options);
  TuningResult r;
  r.k1 = dims.k1;
  r.kx = dims.kx;
  r.kmx = dims.kmx;
  r.gcv_audit = dims.audit;
  const MediationFit fit = fit_mediation(data, SieveDims{dims.k1, dims.kx, dims.kmx, grid.k0_candidates.front()}, options);
  r.k0_audit = loocv_k0(fit, grid.k0_candidates, 0.0);
  r.k0 = r.k0_audit.selected;
  if (data.kind != TreatmentKind::discrete) r.h = select_bandwidth(data.n(), grid.bandwidth_constant, grid.kernel);
  return r;
}

}  // namespace medcal
