#pragma once

// Sieve bases for the treatment, the confounders and the (mediator, confounder)
// pair. A Basis is a Kronecker product of univariate factors, one factor per
// input coordinate; a univariate basis is simply a product with one factor.

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace medcal {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Family { power, bspline, indicator, mixed };

enum class TreatmentKind { continuous, discrete, mixed };

std::string to_string(Family family);
Family family_from_string(const std::string& name);
std::string to_string(TreatmentKind kind);
TreatmentKind treatment_kind_from_string(const std::string& name);

struct Interval {
  double lo = -1.0;
  double hi = 1.0;
};

/// Smallest interval containing the data; degenerate data get a unit-width interval.
Interval empirical_domain(std::span<const double> values);

struct BasisSpec {
  Family family = Family::power;
  int dimension = 1;
  std::optional<Interval> domain;  // continuous inputs are mapped affinely onto [-1, 1]
  std::vector<double> levels;      // indicator family (and the mass point of mixed, fixed at 0)
  int spline_degree = 3;
};

class Basis {
 public:
  /// Univariate basis on one coordinate. Throws std::invalid_argument on an
  /// inconsistent spec (missing domain, empty levels, bad dimension).
  static Basis univariate(BasisSpec spec);

  /// Basis returning the single constant 1 for inputs of the given arity.
  static Basis constant(int arity = 1);

  int dimension() const { return dimension_; }
  int arity() const { return static_cast<int>(factors_.size()); }
  const std::vector<BasisSpec>& factors() const { return factors_; }

  /// Writes the basis vector at `point` into `out` (length dimension()).
  /// Returns false when some coordinate lies outside its declared domain
  /// (power/mixed extrapolate, indicator returns zeros for unknown levels);
  /// B-spline factors throw std::domain_error instead.
  bool evaluate(std::span<const double> point, Eigen::Ref<VectorXd> out) const;
  VectorXd operator()(std::span<const double> point) const;
  VectorXd operator()(double x) const;

  /// Coefficients c with c^T basis(x) == 1 for every x in the domain.
  VectorXd constant_coefficients() const;

  friend Basis make_tensor_basis(std::span<const Basis> parts);

 private:
  Basis() = default;
  std::vector<BasisSpec> factors_;
  int dimension_ = 1;
};

/// Treatment sieve u(t). Continuous: power or B-spline with constant first.
/// Discrete: indicators (1(T=l_0), ..., 1(T=l_J)). Mixed: mass point at 0 plus a
/// continuous power sub-basis switched off at 0, i.e.
/// (1(T=0), p_0(T){1-1(T=0)}, ..., p_{K-2}(T){1-1(T=0)}) with p_0 == 1.
Basis make_treatment_basis(BasisSpec spec, TreatmentKind kind);

/// Kronecker product of the parts, coordinates concatenated in order.
Basis make_tensor_basis(std::span<const Basis> parts);

struct Design {
  MatrixXd matrix;
  Index extrapolated = 0;  // rows with at least one coordinate outside the domain
};

/// Row i is the basis evaluated at data.row(i); data is N x arity.
Design design_matrix(const Basis& basis, const MatrixXd& data);

/// N^{-1} design^T design.
MatrixXd gram_matrix(const MatrixXd& design);

/// Per-column power bases of (at most) `per_coordinate` functions combined by a
/// full tensor product. Each column gets its empirical domain and its dimension
/// is capped at the number of distinct values in that column.
Basis covariate_basis(const MatrixXd& z, int per_coordinate, Family family = Family::power);

}  // namespace medcal
