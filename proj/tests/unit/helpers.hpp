#pragma once

#include "medcal/calibration.hpp"
#include "medcal/dataset.hpp"
#include "medcal/rng.hpp"

#include <doctest.h>

namespace testing {

using namespace medcal;

inline VectorXd uniform_vector(Rng& rng, Index n, double lo, double hi) {
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.uniform(lo, hi);
  return v;
}

// Confounded toy design: X ~ U[-1, 1], T = X/2 + U[-1, 1], M = T/2 + X/2 + noise.
inline Dataset toy_dataset(Index n, std::uint64_t seed, double y_constant = std::nan("")) {
  Rng rng(seed);
  VectorXd x = uniform_vector(rng, n, -1.0, 1.0);
  VectorXd t(n), m(n), y(n);
  for (Index i = 0; i < n; ++i) {
    t(i) = 0.5 * x(i) + rng.uniform(-1.0, 1.0);
    m(i) = 0.5 * t(i) + 0.5 * x(i) + rng.uniform(-1.0, 1.0);
    y(i) = std::isnan(y_constant) ? t(i) + m(i) + t(i) * m(i) + x(i) + rng.uniform(-1.0, 1.0) : y_constant;
  }
  return make_dataset(y, t, m, x, TreatmentKind::continuous);
}

// Every converged calibration fit in the suite goes through this check.
inline void check_balance(const CalibrationFit& fit, const CalibrationProblem& problem) {
  REQUIRE(fit.converged);
  CHECK(balancing_residual(problem, fit.in_sample_weights) <= 1e-6);
  CHECK(std::abs(fit.in_sample_weights.mean() - 1.0) <= 1e-6);
}

}  // namespace testing
