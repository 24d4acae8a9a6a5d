#include "medcal/basis.hpp"

#include "medcal/linops.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace medcal {

namespace {

constexpr double kDomainSlack = 1e-12;
constexpr double kLevelTolerance = 1e-9;

double scale_to_unit(const Interval& d, double x) { return 2.0 * (x - d.lo) / (d.hi - d.lo) - 1.0; }

bool inside_unit(double s) { return s >= -1.0 - kDomainSlack && s <= 1.0 + kDomainSlack; }

void power_values(double s, Eigen::Ref<VectorXd> out) {
  double p = 1.0;
  for (Index j = 0; j < out.size(); ++j) {
    out(j) = p;
    p *= s;
  }
}

// Clamped B-spline basis on [-1, 1] with uniform interior knots.
void bspline_values(double s, int degree, Eigen::Ref<VectorXd> out) {
  const int n = static_cast<int>(out.size());
  const int p = std::min(degree, n - 1);
  std::vector<double> knots;
  knots.reserve(n + p + 1);
  for (int i = 0; i <= p; ++i) knots.push_back(-1.0);
  const int interior = n - p - 1;
  for (int i = 1; i <= interior; ++i) knots.push_back(-1.0 + 2.0 * i / (interior + 1));
  for (int i = 0; i <= p; ++i) knots.push_back(1.0);

  s = std::clamp(s, -1.0, 1.0);
  // Degree-0 functions; the closed right end belongs to the last non-empty span.
  const int spans = n + p;
  std::vector<double> b(spans, 0.0);
  int span = -1;
  for (int i = 0; i < spans; ++i) {
    if (knots[i] < knots[i + 1] && s >= knots[i] && s < knots[i + 1]) span = i;
  }
  if (span < 0) {
    for (int i = spans - 1; i >= 0; --i) {
      if (knots[i] < knots[i + 1]) {
        span = i;
        break;
      }
    }
  }
  b[span] = 1.0;
  for (int d = 1; d <= p; ++d) {
    for (int i = 0; i + d < spans; ++i) {
      double v = 0.0;
      const double left = knots[i + d] - knots[i];
      const double right = knots[i + d + 1] - knots[i + 1];
      if (left > 0.0) v += (s - knots[i]) / left * b[i];
      if (right > 0.0) v += (knots[i + d + 1] - s) / right * b[i + 1];
      b[i] = v;
    }
  }
  for (int i = 0; i < n; ++i) out(i) = b[i];
}

bool is_level(double x, double level) { return std::abs(x - level) <= kLevelTolerance * std::max(1.0, std::abs(level)); }

// Evaluates one univariate factor; returns false when x is outside the domain.
bool evaluate_factor(const BasisSpec& spec, double x, Eigen::Ref<VectorXd> out) {
  switch (spec.family) {
    case Family::power: {
      const double s = scale_to_unit(*spec.domain, x);
      power_values(s, out);
      return inside_unit(s);
    }
    case Family::bspline: {
      const double s = scale_to_unit(*spec.domain, x);
      if (!inside_unit(s)) {
        throw std::domain_error("bspline basis: point " + std::to_string(x) + " outside [" +
                                std::to_string(spec.domain->lo) + ", " + std::to_string(spec.domain->hi) + "]");
      }
      bspline_values(s, spec.spline_degree, out);
      return true;
    }
    case Family::indicator: {
      out.setZero();
      bool hit = false;
      for (std::size_t j = 0; j < spec.levels.size(); ++j) {
        if (is_level(x, spec.levels[j])) {
          out(static_cast<Index>(j)) = 1.0;
          hit = true;
          break;
        }
      }
      return hit;
    }
    case Family::mixed: {
      out.setZero();
      const double s = scale_to_unit(*spec.domain, x);
      if (is_level(x, 0.0)) {
        out(0) = 1.0;
      } else {
        power_values(s, out.tail(out.size() - 1));
      }
      return inside_unit(s);
    }
  }
  return false;
}

VectorXd factor_constant(const BasisSpec& spec) {
  VectorXd c = VectorXd::Zero(spec.dimension);
  switch (spec.family) {
    case Family::power:
      c(0) = 1.0;
      break;
    case Family::bspline:
    case Family::indicator:
      c.setOnes();
      break;
    case Family::mixed:
      c(0) = 1.0;
      c(1) = 1.0;
      break;
  }
  return c;
}

}  // namespace

std::string to_string(Family family) {
  switch (family) {
    case Family::power: return "power";
    case Family::bspline: return "bspline";
    case Family::indicator: return "indicator";
    case Family::mixed: return "mixed";
  }
  return "?";
}

Family family_from_string(const std::string& name) {
  if (name == "power") return Family::power;
  if (name == "bspline") return Family::bspline;
  if (name == "indicator") return Family::indicator;
  if (name == "mixed") return Family::mixed;
  throw std::invalid_argument("unknown basis family '" + name + "'");
}

std::string to_string(TreatmentKind kind) {
  switch (kind) {
    case TreatmentKind::continuous: return "continuous";
    case TreatmentKind::discrete: return "discrete";
    case TreatmentKind::mixed: return "mixed";
  }
  return "?";
}

TreatmentKind treatment_kind_from_string(const std::string& name) {
  if (name == "continuous") return TreatmentKind::continuous;
  if (name == "discrete" || name == "binary") return TreatmentKind::discrete;
  if (name == "mixed") return TreatmentKind::mixed;
  throw std::invalid_argument("unknown treatment kind '" + name + "'");
}

Interval empirical_domain(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("empirical_domain: no data");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  Interval d{*lo, *hi};
  if (!(d.hi > d.lo)) {
    d.lo -= 0.5;
    d.hi += 0.5;
  }
  return d;
}

Basis Basis::univariate(BasisSpec spec) {
  if (spec.dimension < 1) throw std::invalid_argument("basis dimension must be >= 1");
  switch (spec.family) {
    case Family::indicator:
      if (spec.levels.empty()) throw std::invalid_argument("indicator basis requires discrete levels");
      if (spec.dimension != static_cast<int>(spec.levels.size())) {
        throw std::invalid_argument("indicator basis dimension must equal the number of levels (" +
                                    std::to_string(spec.levels.size()) + ")");
      }
      break;
    case Family::mixed:
      if (spec.dimension < 2) throw std::invalid_argument("mixed basis needs dimension >= 2");
      [[fallthrough]];
    case Family::power:
    case Family::bspline:
      if (!spec.domain) throw std::invalid_argument("continuous basis requires a domain");
      if (!(spec.domain->hi > spec.domain->lo)) throw std::invalid_argument("basis domain must have hi > lo");
      if (spec.spline_degree < 0) throw std::invalid_argument("spline degree must be >= 0");
      break;
  }
  Basis b;
  b.dimension_ = spec.dimension;
  b.factors_.push_back(std::move(spec));
  return b;
}

Basis Basis::constant(int arity) {
  if (arity < 1) throw std::invalid_argument("arity must be >= 1");
  Basis b;
  for (int i = 0; i < arity; ++i) {
    BasisSpec s;
    s.family = Family::power;
    s.dimension = 1;
    s.domain = Interval{-1.0, 1.0};
    b.factors_.push_back(s);
  }
  b.dimension_ = 1;
  return b;
}

bool Basis::evaluate(std::span<const double> point, Eigen::Ref<VectorXd> out) const {
  if (static_cast<int>(point.size()) != arity()) {
    throw std::invalid_argument("basis arity " + std::to_string(arity()) + " does not match point of size " +
                                std::to_string(point.size()));
  }
  if (out.size() != dimension_) throw std::invalid_argument("basis output has wrong length");
  if (factors_.size() == 1) return evaluate_factor(factors_[0], point[0], out);

  bool inside = true;
  VectorXd acc(1);
  acc(0) = 1.0;
  for (std::size_t f = 0; f < factors_.size(); ++f) {
    VectorXd part(factors_[f].dimension);
    inside = evaluate_factor(factors_[f], point[f], part) && inside;
    acc = linops::kron(acc, part);
  }
  out = acc;
  return inside;
}

VectorXd Basis::operator()(std::span<const double> point) const {
  VectorXd out(dimension_);
  evaluate(point, out);
  return out;
}

VectorXd Basis::operator()(double x) const { return (*this)(std::span<const double>(&x, 1)); }

VectorXd Basis::constant_coefficients() const {
  VectorXd acc(1);
  acc(0) = 1.0;
  for (const auto& f : factors_) acc = linops::kron(acc, factor_constant(f));
  return acc;
}

Basis make_treatment_basis(BasisSpec spec, TreatmentKind kind) {
  switch (kind) {
    case TreatmentKind::discrete:
      if (spec.family != Family::indicator) {
        throw std::invalid_argument("discrete treatment requires the indicator family, got " + to_string(spec.family));
      }
      if (spec.dimension < static_cast<int>(spec.levels.size())) {
        throw std::invalid_argument("indicator dimension is smaller than the number of levels");
      }
      break;
    case TreatmentKind::mixed:
      spec.family = Family::mixed;
      break;
    case TreatmentKind::continuous:
      if (spec.family != Family::power && spec.family != Family::bspline) {
        throw std::invalid_argument("continuous treatment requires the power or bspline family, got " +
                                    to_string(spec.family));
      }
      break;
  }
  return Basis::univariate(std::move(spec));
}

Basis make_tensor_basis(std::span<const Basis> parts) {
  if (parts.empty()) throw std::invalid_argument("make_tensor_basis: no parts");
  Basis b;
  b.dimension_ = 1;
  for (const auto& p : parts) {
    b.factors_.insert(b.factors_.end(), p.factors_.begin(), p.factors_.end());
    b.dimension_ *= p.dimension_;
  }
  return b;
}

Design design_matrix(const Basis& basis, const MatrixXd& data) {
  if (data.cols() != basis.arity()) {
    throw std::invalid_argument("design_matrix: data has " + std::to_string(data.cols()) +
                                " columns but the basis has arity " + std::to_string(basis.arity()));
  }
  Design d;
  d.matrix.resize(data.rows(), basis.dimension());
  std::vector<double> point(static_cast<std::size_t>(basis.arity()));
  VectorXd row(basis.dimension());
  for (Index i = 0; i < data.rows(); ++i) {
    for (Index j = 0; j < data.cols(); ++j) point[static_cast<std::size_t>(j)] = data(i, j);
    if (!basis.evaluate(point, row)) ++d.extrapolated;
    d.matrix.row(i) = row.transpose();
  }
  return d;
}

MatrixXd gram_matrix(const MatrixXd& design) { return linops::gram(design); }

Basis covariate_basis(const MatrixXd& z, int per_coordinate, Family family) {
  if (z.cols() < 1) throw std::invalid_argument("covariate_basis: no columns");
  if (per_coordinate < 1) throw std::invalid_argument("covariate_basis: dimension must be >= 1");
  std::vector<Basis> parts;
  for (Index j = 0; j < z.cols(); ++j) {
    const VectorXd col = z.col(j);
    std::set<double> distinct(col.data(), col.data() + col.size());
    BasisSpec spec;
    spec.family = family;
    spec.dimension = std::min<int>(per_coordinate, static_cast<int>(distinct.size()));
    spec.domain = empirical_domain(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
    parts.push_back(Basis::univariate(spec));
  }
  return make_tensor_basis(parts);
}

}  // namespace medcal
