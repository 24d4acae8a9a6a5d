#include "medcal/basis.hpp"
#include "medcal/linops.hpp"
#include "medcal/rng.hpp"

#include <doctest.h>

#include <array>

using namespace medcal;

namespace {

Basis power(int dim, double lo, double hi) {
  return Basis::univariate(BasisSpec{Family::power, dim, Interval{lo, hi}, {}, 3});
}

}  // namespace

TEST_CASE("power basis at the domain centre") {
  const VectorXd v = power(3, -2.0, 2.0)(0.0);
  REQUIRE(v.size() == 3);
  CHECK(v(0) == 1.0);
  CHECK(v(1) == 0.0);
  CHECK(v(2) == 0.0);
}

TEST_CASE("power basis rows after affine scaling") {
  MatrixXd t(3, 1);
  t << -1.5, 0.0, 1.5;
  const Design d = design_matrix(power(2, -1.5, 1.5), t);
  CHECK(d.matrix(0, 0) == 1.0);
  CHECK(d.matrix(0, 1) == -1.0);
  CHECK(d.matrix(1, 1) == 0.0);
  CHECK(d.matrix(2, 1) == 1.0);
  CHECK(d.extrapolated == 0);
}

TEST_CASE("power basis extrapolates with a flag") {
  const Basis b = power(3, -1.0, 1.0);
  VectorXd out(3);
  const std::array<double, 1> p{2.0};
  CHECK_FALSE(b.evaluate(p, out));
  CHECK(out.allFinite());
  CHECK(out(1) == doctest::Approx(2.0));
}

TEST_CASE("indicator basis") {
  const Basis b = make_treatment_basis(BasisSpec{Family::indicator, 2, std::nullopt, {0.0, 1.0}, 3},
                                       TreatmentKind::discrete);
  const VectorXd v = b(1.0);
  CHECK(v(0) == 0.0);
  CHECK(v(1) == 1.0);
  VectorXd out(2);
  const std::array<double, 1> p{0.5};
  CHECK_FALSE(b.evaluate(p, out));
  CHECK(out.isZero());
}

TEST_CASE("B-spline basis refuses points outside its domain") {
  const Basis b = Basis::univariate(BasisSpec{Family::bspline, 5, Interval{0.0, 1.0}, {}, 3});
  VectorXd out(5);
  const std::array<double, 1> p{1.5};
  CHECK_THROWS_AS(b.evaluate(p, out), std::domain_error);
}

TEST_CASE("B-splines form a partition of unity") {
  const Basis b = Basis::univariate(BasisSpec{Family::bspline, 6, Interval{0.0, 1.0}, {}, 3});
  for (double x = 0.0; x <= 1.0; x += 0.05) CHECK(b(x).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("every family reproduces the constant") {
  Rng rng(11);
  std::vector<Basis> bases{
      power(4, -2.0, 3.0), Basis::univariate(BasisSpec{Family::bspline, 7, Interval{-2.0, 3.0}, {}, 3}),
      make_treatment_basis(BasisSpec{Family::indicator, 3, std::nullopt, {0.0, 1.0, 2.0}, 3}, TreatmentKind::discrete),
      make_treatment_basis(BasisSpec{Family::mixed, 4, Interval{0.0, 3.0}, {}, 3}, TreatmentKind::mixed)};
  for (const auto& b : bases) {
    const VectorXd c = b.constant_coefficients();
    for (int k = 0; k < 20; ++k) {
      double x = rng.uniform(-2.0, 3.0);
      if (b.factors()[0].family == Family::indicator) x = static_cast<double>(rng.index(3));
      if (b.factors()[0].family == Family::mixed) x = k % 4 == 0 ? 0.0 : rng.uniform(0.0, 3.0);
      CHECK(c.dot(b(x)) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("mixed basis switches the continuous part off at zero") {
  const Basis b = make_treatment_basis(BasisSpec{Family::mixed, 3, Interval{0.0, 2.0}, {}, 3}, TreatmentKind::mixed);
  const VectorXd at0 = b(0.0);
  CHECK(at0(0) == 1.0);
  CHECK(at0(1) == 0.0);
  CHECK(at0(2) == 0.0);
  const VectorXd at1 = b(1.5);
  CHECK(at1(0) == 0.0);
  CHECK(at1(1) == 1.0);
}

TEST_CASE("tensor basis equals the Kronecker product of its factors") {
  const Basis a = power(3, -1.0, 1.0);
  const Basis c = Basis::univariate(BasisSpec{Family::bspline, 5, Interval{0.0, 2.0}, {}, 3});
  const std::array<Basis, 2> parts{a, c};
  const Basis t = make_tensor_basis(parts);
  CHECK(t.dimension() == 15);
  CHECK(t.arity() == 2);
  Rng rng(3);
  for (int k = 0; k < 10; ++k) {
    const std::array<double, 2> p{rng.uniform(-1.0, 1.0), rng.uniform(0.0, 2.0)};
    const VectorXd expect = linops::kron(a(p[0]), c(p[1]));
    CHECK((t(std::span<const double>(p)) - expect).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("fitted values do not depend on the scaling domain") {
  Rng rng(5);
  MatrixXd t(40, 1);
  VectorXd y(40);
  for (Index i = 0; i < 40; ++i) {
    t(i, 0) = rng.uniform(-1.0, 2.0);
    y(i) = std::sin(t(i, 0)) + rng.uniform(-0.1, 0.1);
  }
  const MatrixXd d1 = design_matrix(power(5, -1.0, 2.0), t).matrix;
  const MatrixXd d2 = design_matrix(power(5, -3.0, 5.0), t).matrix;
  const VectorXd f1 = d1 * linops::least_squares(d1, y);
  const VectorXd f2 = d2 * linops::least_squares(d2, y);
  CHECK((f1 - f2).cwiseAbs().maxCoeff() <= 1e-8 * f1.cwiseAbs().maxCoeff());
}

TEST_CASE("covariate basis caps dimensions at the number of distinct values") {
  MatrixXd z(6, 2);
  z << 0, 0.1, 1, 0.5, 0, 0.9, 1, 1.3, 0, 2.0, 1, 2.2;
  const Basis b = covariate_basis(z, 4);
  CHECK(b.dimension() == 2 * 4);
}

TEST_CASE("gram_matrix of an orthonormal-ish design") {
  MatrixXd d(2, 2);
  d << 1, 1, 1, -1;
  const MatrixXd g = gram_matrix(d);
  CHECK(g.isApprox(MatrixXd::Identity(2, 2)));
}

TEST_CASE("string conversions round trip") {
  for (Family f : {Family::power, Family::bspline, Family::indicator, Family::mixed}) {
    CHECK(family_from_string(to_string(f)) == f);
  }
  CHECK_THROWS(family_from_string("fourier"));
}
