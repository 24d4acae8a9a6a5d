#pragma once

// Smoothing-parameter selection: generalised CV for the weight sieves,
// leave-one-out CV for the outcome sieve and the undersmoothed bandwidth rule.

#include "medcal/calibration.hpp"
#include "medcal/dataset.hpp"
#include "medcal/estimators.hpp"
#include "medcal/kernels.hpp"

#include <limits>
#include <vector>

namespace medcal {

struct TuningGrid {
  std::vector<int> k1_candidates{2, 3, 4, 5, 6};
  std::vector<int> kx_candidates{2, 3, 4, 5};   // per coordinate
  std::vector<int> kmx_candidates{2, 3, 4, 5};  // per coordinate
  std::vector<int> k0_candidates{2, 3, 4, 5, 6, 7, 8};
  KernelFamily kernel = KernelFamily::epanechnikov2;
  double bandwidth_constant = 0.0;  // 0: family default

  void validate() const;
};

/// (1 - k/N)^{-2} N^{-1} sum_i (w_i - 1)^2 with k = k1 * kz (total sizes).
/// +infinity when k >= N.
double gcv_criterion(const VectorXd& weights, int k1, int kz);

/// Fits the calibration problem for Z = X or (M, X) and returns the GCV value;
/// +infinity when the solver does not converge or k1 * kz >= N.
double gcv_weights(const Dataset& data, int k1, int kz_per_coordinate, WeightTarget which,
                   const SolverOptions& options = {});

struct GcvRecord {
  WeightTarget which;
  int k1;
  int kz;  // per coordinate
  double value;
};

struct WeightDims {
  int k1 = 0;
  int kx = 0;
  int kmx = 0;
  std::vector<GcvRecord> audit;
};

/// Two-stage argmin: (k1, kx) jointly for pi_X, then kmx with k1 fixed.
/// Ties go to the smaller total dimension. Discrete treatments fix k1 = J + 1.
/// Throws std::runtime_error when every candidate failed.
WeightDims select_weight_dims(const Dataset& data, const TuningGrid& grid, const SolverOptions& options = {});

struct LooResult {
  int selected = 0;
  std::vector<int> candidates;  // candidates actually evaluated
  std::vector<double> scores;   // N^{-1} sum_i (r_i - fit^{(-i)}_i)^2
};

/// Leave-one-out CV of the series regression of `response` on u_K0(T) via the
/// hat-matrix identity e_i / (1 - h_ii). Candidates with K0 >= N - 1 are skipped.
LooResult loocv_series(const Dataset& data, const VectorXd& response, const std::vector<int>& candidates);

/// Same criterion by explicit refits without observation i (reference implementation).
std::vector<double> loocv_series_bruteforce(const Dataset& data, const VectorXd& response,
                                            const std::vector<int>& candidates);

/// K0 for shift delta = t' - t with the weights of `fit` held fixed.
LooResult loocv_k0(const MediationFit& fit, const std::vector<int>& candidates, double delta);

/// C N^{-1/4}; constant <= 0 selects the family default.
double select_bandwidth(Index n, double constant, KernelFamily family);

struct TuningResult {
  int k1 = 0;
  int kx = 0;
  int kmx = 0;
  int k0 = 0;  // LOO choice at delta = 0
  double h = 0.0;
  std::vector<GcvRecord> gcv_audit;
  LooResult k0_audit;
};

TuningResult tune(const Dataset& data, const TuningGrid& grid, const SolverOptions& options = {});

}  // namespace medcal
