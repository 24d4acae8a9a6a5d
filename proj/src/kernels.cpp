#include "medcal/kernels.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace medcal {

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::epanechnikov2: return "epanechnikov2";
    case KernelFamily::epanechnikov4: return "epanechnikov4";
    case KernelFamily::gaussian: return "gaussian";
  }
  return "?";
}

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "epanechnikov2" || name == "epanechnikov" || name == "epan2") return KernelFamily::epanechnikov2;
  if (name == "epanechnikov4" || name == "epan4") return KernelFamily::epanechnikov4;
  if (name == "gaussian" || name == "normal") return KernelFamily::gaussian;
  throw std::invalid_argument("unknown kernel '" + name + "'");
}

double kernel_profile(KernelFamily family, double u) {
  switch (family) {
    case KernelFamily::epanechnikov2:
      return std::abs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
    case KernelFamily::epanechnikov4: {
      if (std::abs(u) > 1.0) return 0.0;
      const double u2 = u * u;
      return (15.0 / 32.0) * (3.0 - 10.0 * u2 + 7.0 * u2 * u2);
    }
    case KernelFamily::gaussian:
      return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
  }
  return 0.0;
}

double kernel_eval(const KernelSpec& spec, double x) {
  if (!(spec.bandwidth > 0.0)) throw std::invalid_argument("kernel bandwidth must be positive");
  return kernel_profile(spec.family, x / spec.bandwidth) / spec.bandwidth;
}

double default_constant(KernelFamily family) {
  switch (family) {
    case KernelFamily::epanechnikov2: return 2.34;
    case KernelFamily::epanechnikov4: return 3.03;
    case KernelFamily::gaussian: return 1.06;
  }
  return 1.0;
}

double sample_sd(std::span<const double> values) {
  const double n = static_cast<double>(values.size());
  if (values.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (n - 1.0));
}

double rule_of_thumb_bandwidth(std::span<const double> t, double constant, bool undersmooth) {
  if (t.size() < 2) throw std::invalid_argument("bandwidth rule needs at least two observations");
  if (!(constant > 0.0)) throw std::invalid_argument("bandwidth constant must be positive");
  const double sd = sample_sd(t);
  if (!(sd > 0.0)) throw std::invalid_argument("bandwidth rule: treatment has zero variance");
  const double n = static_cast<double>(t.size());
  return undersmooth ? constant * std::pow(n, -0.25) : constant * sd * std::pow(n, -0.2);
}

double conditional_density(const Eigen::VectorXd& t_data, const Eigen::MatrixXd& z, double t0,
                           std::span<const double> z0, const KernelSpec& t_spec,
                           std::span<const KernelSpec> z_specs) {
  if (z.rows() != t_data.size()) throw std::invalid_argument("conditional_density: length mismatch");
  if (static_cast<Eigen::Index>(z0.size()) != z.cols() || static_cast<Eigen::Index>(z_specs.size()) != z.cols()) {
    throw std::invalid_argument("conditional_density: conditioning dimension mismatch");
  }
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    double w = 1.0;
    for (Eigen::Index j = 0; j < z.cols() && w != 0.0; ++j) {
      w *= kernel_eval(z_specs[static_cast<std::size_t>(j)], z(i, j) - z0[static_cast<std::size_t>(j)]);
    }
    if (w == 0.0) continue;
    den += w;
    num += w * kernel_eval(t_spec, t_data(i) - t0);
  }
  if (!(den > kDensityFloor)) throw SparseRegionError("conditional density: empty kernel neighbourhood");
  return num / den;
}

double marginal_density(std::span<const double> t_data, double t0, const KernelSpec& spec) {
  if (t_data.empty()) throw std::invalid_argument("marginal_density: no data");
  double s = 0.0;
  for (double t : t_data) s += kernel_eval(spec, t - t0);
  return s / static_cast<double>(t_data.size());
}

std::vector<KernelSpec> silverman_specs(const Eigen::MatrixXd& data, double constant, int extra_dims,
                                        KernelFamily family) {
  const double n = static_cast<double>(data.rows());
  const int dim = static_cast<int>(data.cols()) + extra_dims;
  const double scale = constant * std::pow(n, -1.0 / (4.0 + dim));
  std::vector<KernelSpec> out;
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    const Eigen::VectorXd col = data.col(j);
    double sd = sample_sd(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
    if (!(sd > 0.0)) sd = 1.0;
    out.push_back({family, scale * sd});
  }
  return out;
}

}  // namespace medcal
