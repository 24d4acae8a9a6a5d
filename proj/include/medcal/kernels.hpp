#pragma once

// Univariate smoothing kernels K_h(x) = K(x / h) / h, bandwidth rules and the
// Nadaraya-Watson density estimators used by the kernel effect estimator and
// by the variance plug-ins.

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace medcal {

enum class KernelFamily { epanechnikov2, epanechnikov4, gaussian };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

struct KernelSpec {
  KernelFamily family = KernelFamily::epanechnikov2;
  double bandwidth = 1.0;
};

/// K(x / h) / h. The fourth-order Epanechnikov kernel takes negative values.
double kernel_eval(const KernelSpec& spec, double x);

/// Unscaled K(u).
double kernel_profile(KernelFamily family, double u);

/// Rule-of-thumb constant: 2.34 (epanechnikov2), 3.03 (epanechnikov4), 1.06 (gaussian).
double default_constant(KernelFamily family);

/// undersmooth = false: C sd(t) N^{-1/5}. undersmooth = true: C N^{-1/4}.
/// Throws std::invalid_argument for N < 2 or zero variance.
double rule_of_thumb_bandwidth(std::span<const double> t, double constant, bool undersmooth);

/// Sample standard deviation (N - 1 denominator).
double sample_sd(std::span<const double> values);

/// Thrown when the kernel weights around a conditioning point sum to (almost) zero.
struct SparseRegionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr double kDensityFloor = 1e-12;

/// sum_i K_{h_t}(t_i - t0) prod_j K_{h_j}(z_ij - z0j) / sum_i prod_j K_{h_j}(z_ij - z0j).
/// z_specs holds one kernel per column of z. Throws SparseRegionError when the
/// denominator is <= kDensityFloor.
double conditional_density(const Eigen::VectorXd& t_data, const Eigen::MatrixXd& z, double t0,
                           std::span<const double> z0, const KernelSpec& t_spec,
                           std::span<const KernelSpec> z_specs);

/// N^{-1} sum_i K_h(t_i - t0).
double marginal_density(std::span<const double> t_data, double t0, const KernelSpec& spec);

/// Rule-of-thumb specs for the columns of `data`: h_j = C sd_j N^{-1/(4 + dim)},
/// with dim the number of columns plus `extra_dims`. Zero-variance columns use sd = 1.
std::vector<KernelSpec> silverman_specs(const Eigen::MatrixXd& data, double constant = 1.06, int extra_dims = 0,
                                        KernelFamily family = KernelFamily::gaussian);

}  // namespace medcal
