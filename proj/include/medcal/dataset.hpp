#pragma once

// The observed sample {Y_i, T_i, M_i, X_i}: outcome, treatment, mediators
// (N x s) and confounders (N x r), plus the treatment kind.

#include "medcal/basis.hpp"

#include <Eigen/Dense>

#include <vector>

namespace medcal {

struct Dataset {
  VectorXd y;
  VectorXd t;
  MatrixXd m;  // N x s
  MatrixXd x;  // N x r
  TreatmentKind kind = TreatmentKind::continuous;
  std::vector<double> levels;  // sorted treatment levels when kind == discrete

  Index n() const { return y.size(); }
  /// [M X], N x (s + r).
  MatrixXd mx() const;
  /// Rows selected by index (used for bootstrap resamples).
  Dataset subset(const std::vector<Index>& rows) const;
};

/// Checks shapes and finiteness, fills `levels` for discrete treatments.
/// Throws std::invalid_argument.
Dataset make_dataset(VectorXd y, VectorXd t, MatrixXd m, MatrixXd x, TreatmentKind kind);

/// Sorted distinct values.
std::vector<double> distinct_values(const VectorXd& v);

}  // namespace medcal
