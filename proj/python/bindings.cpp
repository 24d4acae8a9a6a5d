// Python bindings: data generation, tuning, calibration weights, point
// estimates with plug-in standard errors, and the CLI runner.

#include "medcal/cli.hpp"
#include "medcal/inference.hpp"
#include "medcal/simlab.hpp"
#include "medcal/tuning.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace medcal;

namespace {

TreatmentKind kind_from(const std::string& name) {
  if (name == "continuous") return TreatmentKind::continuous;
  if (name == "discrete") return TreatmentKind::discrete;
  throw std::invalid_argument("treatment must be 'continuous' or 'discrete', got '" + name + "'");
}

MatrixXd as_columns(const MatrixXd& a, Index n) {
  if (a.rows() == n) return a;
  if (a.cols() == n && a.rows() == 1) return a.transpose();
  throw std::invalid_argument("mediator and confounder arrays need one row per observation");
}

Dataset to_dataset(const VectorXd& y, const VectorXd& t, const MatrixXd& m, const MatrixXd& x,
                   const std::string& treatment) {
  return make_dataset(y, t, as_columns(m, y.size()), as_columns(x, y.size()), kind_from(treatment));
}

py::dict as_dict(const Dataset& d) {
  py::dict out;
  out["y"] = d.y;
  out["t"] = d.t;
  out["m"] = d.m;
  out["x"] = d.x;
  return out;
}

SieveDims resolve_dims(const Dataset& d, int k1, int kx, int kmx, int k0, TuningResult* tuned) {
  // k0 <= 0 leaves K0 to leave-one-out; the stored value is only a placeholder
  SieveDims dims{k1, kx, kmx, k0 > 0 ? k0 : TuningGrid{}.k0_candidates.front()};
  if (k1 <= 0 || kx <= 0 || kmx <= 0) {
    *tuned = tune(d, TuningGrid{});
    if (k1 <= 0) dims.k1 = tuned->k1;
    if (kx <= 0) dims.kx = tuned->kx;
    if (kmx <= 0) dims.kmx = tuned->kmx;
  }
  return dims;
}

py::dict tune_py(const VectorXd& y, const VectorXd& t, const MatrixXd& m, const MatrixXd& x,
                 const std::string& treatment) {
  const TuningResult r = tune(to_dataset(y, t, m, x, treatment), TuningGrid{});
  py::dict out;
  out["k1"] = r.k1;
  out["kx"] = r.kx;
  out["kmx"] = r.kmx;
  out["k0"] = r.k0;
  out["h"] = r.h;
  py::list audit;
  for (const auto& g : r.gcv_audit) {
    py::dict row;
    row["k1"] = g.k1;
    row["kz"] = g.kz;
    row["value"] = g.value;
    audit.append(row);
  }
  out["gcv"] = audit;
  return out;
}

py::dict weights_py(const VectorXd& y, const VectorXd& t, const MatrixXd& m, const MatrixXd& x,
                    const std::string& treatment, int k1, int kx, int kmx) {
  const Dataset d = to_dataset(y, t, m, x, treatment);
  TuningResult tuned;
  const SieveDims dims = resolve_dims(d, k1, kx, kmx, 0, &tuned);
  const MediationFit fit = fit_mediation(d, dims);
  py::dict out;
  out["k1"] = dims.k1;
  out["kx"] = dims.kx;
  out["kmx"] = dims.kmx;
  out["converged"] = fit.converged();
  out["pi_x"] = fit.fit_x.in_sample_weights;
  out["pi_mx"] = fit.fit_mx.in_sample_weights;
  return out;
}

py::dict estimate_py(const VectorXd& y, const VectorXd& t, const MatrixXd& m, const MatrixXd& x,
                     const std::string& treatment, const std::vector<double>& ts, const std::vector<double>& tps,
                     const std::string& method, int k1, int kx, int kmx, int k0, double bandwidth_constant) {
  if (ts.size() != tps.size()) throw std::invalid_argument("t and t_prime must have the same length");
  const Dataset d = to_dataset(y, t, m, x, treatment);
  std::vector<double> est(ts.size()), se;
  if (method == "ols") {
    const OlsFit f = ols_baseline(d);
    for (std::size_t i = 0; i < ts.size(); ++i) est[i] = f.mu(ts[i], tps[i]);
  } else if (method == "ipw") {
    const IpwFit f = ipw_binary_baseline(d);
    for (std::size_t i = 0; i < ts.size(); ++i) est[i] = f.mu(ts[i], tps[i]);
  } else if (method == "cbs" || method == "cbk") {
    TuningResult tuned;
    const SieveDims dims = resolve_dims(d, k1, kx, kmx, k0, &tuned);
    const MediationFit fit = fit_mediation(d, dims);
    if (!fit.converged()) throw std::runtime_error("calibration did not converge");
    if (method == "cbs") {
      CbsEstimator e(fit, CbsOptions{k0});
      PluginNuisances nuis(fit);
      CbsInference inf(e, nuis);
      se.resize(ts.size());
      for (std::size_t i = 0; i < ts.size(); ++i) {
        est[i] = e.mu(ts[i], tps[i]);
        se[i] = inf.variance(ts[i], tps[i]).se;
      }
    } else {
      const KernelSpec kernel{KernelFamily::epanechnikov2,
                              select_bandwidth(d.n(), bandwidth_constant, KernelFamily::epanechnikov2)};
      CbkEstimator e(fit, kernel);
      for (std::size_t i = 0; i < ts.size(); ++i) est[i] = e.mu(ts[i], tps[i]);
    }
  } else {
    throw std::invalid_argument("unknown method '" + method + "' (expected cbs, cbk, ols or ipw)");
  }
  py::dict out;
  out["estimate"] = est;
  if (!se.empty()) out["se"] = se;
  return out;
}

py::tuple run_py(const std::string& config_json) {
  const cli::RunConfig cfg = cli::config_from_json(cli::json::parse(config_json));
  std::ostringstream out, err;
  const int status = cli::run(cfg, out, err);
  return py::make_tuple(status, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "Calibration-weighted estimation of causal mediation effect curves";
  mod.def(
      "generate",
      [](const std::string& scenario, Index n, std::uint64_t seed) {
        return as_dict(generate(DgpSpec{scenario_from_string(scenario), n, seed}));
      },
      py::arg("scenario"), py::arg("n"), py::arg("seed") = 1);
  mod.def(
      "true_mu", [](const std::string& s, double t, double tp) { return true_mu(scenario_from_string(s), t, tp); },
      py::arg("scenario"), py::arg("t"), py::arg("t_prime"));
  mod.def("tune", &tune_py, py::arg("y"), py::arg("t"), py::arg("m"), py::arg("x"),
          py::arg("treatment") = "continuous");
  mod.def("weights", &weights_py, py::arg("y"), py::arg("t"), py::arg("m"), py::arg("x"),
          py::arg("treatment") = "continuous", py::arg("k1") = 0, py::arg("kx") = 0, py::arg("kmx") = 0);
  mod.def("estimate", &estimate_py, py::arg("y"), py::arg("t"), py::arg("m"), py::arg("x"),
          py::arg("treatment") = "continuous", py::arg("t_values"), py::arg("t_prime_values"),
          py::arg("method") = "cbs", py::arg("k1") = 0, py::arg("kx") = 0, py::arg("kmx") = 0, py::arg("k0") = 0,
          py::arg("bandwidth_constant") = 0.0);
  mod.def("run", &run_py, py::arg("config_json"));
}
