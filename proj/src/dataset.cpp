#include "medcal/dataset.hpp"

#include <algorithm>
#include <stdexcept>

namespace medcal {

MatrixXd Dataset::mx() const {
  MatrixXd out(n(), m.cols() + x.cols());
  out << m, x;
  return out;
}

Dataset Dataset::subset(const std::vector<Index>& rows) const {
  Dataset d;
  d.kind = kind;
  d.levels = levels;
  const Index k = static_cast<Index>(rows.size());
  d.y.resize(k);
  d.t.resize(k);
  d.m.resize(k, m.cols());
  d.x.resize(k, x.cols());
  for (Index i = 0; i < k; ++i) {
    const Index r = rows[static_cast<std::size_t>(i)];
    d.y(i) = y(r);
    d.t(i) = t(r);
    d.m.row(i) = m.row(r);
    d.x.row(i) = x.row(r);
  }
  return d;
}

std::vector<double> distinct_values(const VectorXd& v) {
  std::vector<double> out(v.data(), v.data() + v.size());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Dataset make_dataset(VectorXd y, VectorXd t, MatrixXd m, MatrixXd x, TreatmentKind kind) {
  const Index n = y.size();
  if (n < 1) throw std::invalid_argument("dataset: no observations");
  if (t.size() != n || m.rows() != n || x.rows() != n) {
    throw std::invalid_argument("dataset: Y, T, M and X must have the same number of rows");
  }
  if (m.cols() < 1) throw std::invalid_argument("dataset: at least one mediator column is required");
  if (x.cols() < 1) throw std::invalid_argument("dataset: at least one confounder column is required");
  if (!y.allFinite() || !t.allFinite() || !m.allFinite() || !x.allFinite()) {
    throw std::invalid_argument("dataset: non-finite value");
  }
  Dataset d{std::move(y), std::move(t), std::move(m), std::move(x), kind, {}};
  if (kind == TreatmentKind::discrete) {
    d.levels = distinct_values(d.t);
    if (d.levels.size() < 2) throw std::invalid_argument("dataset: discrete treatment needs at least two levels");
  }
  return d;
}

}  // namespace medcal
