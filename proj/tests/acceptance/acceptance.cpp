// Acceptance run: one PASS/FAIL line per criterion, details indented below it.
// Exit status is 0 when every criterion was evaluated; --strict also requires
// every criterion to pass.

#include "medcal/inference.hpp"
#include "medcal/linops.hpp"
#include "medcal/parallel.hpp"
#include "medcal/rng.hpp"
#include "medcal/simlab.hpp"
#include "medcal/tuning.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

using namespace medcal;

namespace {

std::ostringstream report;
std::mutex fits_mutex;

struct FitAudit {
  Index fits = 0;
  double worst_residual = 0.0;
  double worst_mean = 0.0;
} audit;

void record(const CalibrationFit& f, const CalibrationProblem& p) {
  if (!f.converged) return;
  const double r = balancing_residual(p, f.in_sample_weights);
  const double m = std::abs(f.in_sample_weights.mean() - 1.0);
  std::lock_guard<std::mutex> lock(fits_mutex);
  ++audit.fits;
  audit.worst_residual = std::max(audit.worst_residual, r);
  audit.worst_mean = std::max(audit.worst_mean, m);
}

void record(const MediationFit& f) {
  record(f.fit_x, f.problem_x);
  record(f.fit_mx, f.problem_mx);
}

void detail(const std::string& line) {
  std::cout << "    " << line << '\n';
  report << "    " << line << '\n';
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

MediationFit tuned_fit(const Dataset& d) {
  const TuningResult r = tune(d, TuningGrid{});
  MediationFit fit = fit_mediation(d, SieveDims{r.k1, r.kx, r.kmx, r.k0});
  record(fit);
  return fit;
}

// 1 ------------------------------------------------------------------------
bool discrete_cells() {
  Rng rng(101);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const Index n = 20 + static_cast<Index>(rng.index(181));
    VectorXd t(n);
    MatrixXd z(n, 1);
    for (Index i = 0; i < n; ++i) {
      z(i, 0) = rng.uniform() < 0.5 ? 1.0 : 0.0;
      t(i) = rng.uniform() < 0.25 + 0.5 * z(i, 0) ? 1.0 : 0.0;
    }
    for (Index c = 0; c < 4; ++c) {
      t(c) = static_cast<double>(c / 2);
      z(c, 0) = static_cast<double>(c % 2);
    }
    Basis u = make_treatment_basis(BasisSpec{Family::indicator, 2, std::nullopt, {0.0, 1.0}, 3},
                                   TreatmentKind::discrete);
    const CalibrationProblem p = make_calibration_problem(std::move(u), covariate_basis(z, 2), t, z);
    const CalibrationFit f = solve_dual(p);
    record(f, p);
    if (!f.converged) return false;
    for (Index i = 0; i < n; ++i) {
      double nt = 0, nz = 0, ntz = 0;
      for (Index j = 0; j < n; ++j) {
        nt += t(j) == t(i);
        nz += z(j, 0) == z(i, 0);
        ntz += t(j) == t(i) && z(j, 0) == z(i, 0);
      }
      worst = std::max(worst, std::abs(f.in_sample_weights(i) - nt * nz / (static_cast<double>(n) * ntz)));
    }
  }
  detail("50 datasets, N in [20, 200]; max |pi_hat - N_t N_z / (N N_tz)| = " + fmt(worst, 3));
  return worst <= 1e-6;
}

// 2 ------------------------------------------------------------------------
VectorXd primal_entropy(const MatrixXd& a, const VectorXd& b) {
  const Index n = a.cols(), k = a.rows();
  VectorXd p = VectorXd::Ones(n);
  VectorXd nu = VectorXd::Zero(k);
  auto residual = [&](const VectorXd& pp, const VectorXd& vv) {
    VectorXd r(n + k);
    r.head(n) = (pp.array().log() + 1.0).matrix() + a.transpose() * vv;
    r.tail(k) = a * pp - b;
    return r;
  };
  for (int it = 0; it < 300; ++it) {
    const VectorXd r = residual(p, nu);
    if (r.lpNorm<Eigen::Infinity>() < 1e-13) break;
    MatrixXd kkt = MatrixXd::Zero(n + k, n + k);
    kkt.topLeftCorner(n, n) = p.cwiseInverse().asDiagonal();
    kkt.topRightCorner(n, k) = a.transpose();
    kkt.bottomLeftCorner(k, n) = a;
    const VectorXd step = kkt.fullPivLu().solve(-r);
    double s = 1.0;
    while ((p + s * step.head(n)).minCoeff() <= 0.0) s *= 0.5;
    while (residual(p + s * step.head(n), nu + s * step.tail(k)).norm() > (1.0 - 0.01 * s) * r.norm() && s > 1e-12) {
      s *= 0.5;
    }
    p += s * step.head(n);
    nu += s * step.tail(k);
  }
  return p;
}

bool dual_primal() {
  Rng rng(202);
  double worst = 0.0;
  int instances = 0;
  for (int rep = 0; rep < 30; ++rep) {
    const Index n = 10 + static_cast<Index>(rng.index(21));
    VectorXd t(n);
    MatrixXd z(n, 1);
    for (Index i = 0; i < n; ++i) {
      z(i, 0) = rng.uniform(-1.5, 1.5);
      t(i) = 0.3 * z(i, 0) + rng.uniform(-2.0, 2.0);
    }
    Basis u = Basis::univariate(BasisSpec{Family::power, 2, Interval{t.minCoeff(), t.maxCoeff()}, {}, 3});
    const CalibrationProblem p = make_calibration_problem(std::move(u), covariate_basis(z, 2), t, z);
    const CalibrationFit f = solve_dual(p);
    record(f, p);
    if (!f.converged) return false;
    const VectorXd primal =
        primal_entropy(p.scores_design.transpose() / static_cast<double>(n), linops::kron(p.mean_v, p.mean_u));
    worst = std::max(worst, (f.in_sample_weights - primal).cwiseAbs().maxCoeff());
    ++instances;
  }
  detail(std::to_string(instances) + " instances, N in [10, 30], k1 = kZ = 2; max weight gap = " + fmt(worst, 3));
  return instances >= 20 && worst <= 1e-4;
}

// 3 (evaluated last, over every fit recorded by the run) ----------------------
void balance_sweep() {
  for (Scenario s : {Scenario::I, Scenario::II, Scenario::III, Scenario::binary}) {
    for (Index n : {500, 1000}) {
      const Dataset d = generate(DgpSpec{s, n, 303});
      const TuningGrid g;
      for (int k1 : d.kind == TreatmentKind::discrete ? std::vector<int>{3} : g.k1_candidates) {
        for (int kz : g.kx_candidates) {
          record(fit_mediation(d, SieveDims{k1, kz, kz, 3}));
        }
      }
    }
  }
}

bool balancing() {
  detail(std::to_string(audit.fits) + " converged fits; max balancing residual = " + fmt(audit.worst_residual, 3) +
         ", max |mean(pi_hat) - 1| = " + fmt(audit.worst_mean, 3));
  return audit.fits > 0 && audit.worst_residual <= 1e-6 && audit.worst_mean <= 1e-6;
}

// 4 ------------------------------------------------------------------------
bool constant_outcome() {
  // exactness holds at the optimum, so solve the duals well past the default tolerance
  SolverOptions tight;
  tight.tolerance = 1e-12;
  double worst_cbs = 0.0, worst_cbk = 0.0;
  for (Scenario s : {Scenario::I, Scenario::II, Scenario::III}) {
    Dataset d = generate(DgpSpec{s, 500, 404});
    d.y.setConstant(1.7);
    for (int k1 : {2, 3, 4}) {
      const MediationFit fit = fit_mediation(d, SieveDims{k1, 2, 2, k1}, tight);
      record(fit);
      if (!fit.converged()) continue;
      CbsEstimator cbs(fit, CbsOptions{k1});
      CbkEstimator cbk(fit, KernelSpec{KernelFamily::epanechnikov2, select_bandwidth(d.n(), 0.0, KernelFamily::epanechnikov2)});
      for (double t : default_grid()) {
        worst_cbs = std::max(worst_cbs, std::abs(cbs.mu(t, t) - 1.7));
        worst_cbk = std::max(worst_cbk, std::abs(cbk.mu(t, t) - 1.7));
        worst_cbk = std::max(worst_cbk, std::abs(cbk.mu(t, 0.0) - 1.7));
      }
    }
  }
  detail("Y = 1.7: max |CBS(t, t) - c| = " + fmt(worst_cbs, 3) + ", max |CBK - c| = " + fmt(worst_cbk, 3));
  return worst_cbs <= 1e-10 && worst_cbk <= 1e-10;
}

// 5 ------------------------------------------------------------------------
struct Target {
  Scenario s;
  Index n;
  McEstimator e;
  Panel p;
  double value;
};

bool within(double got, double target) { return std::abs(got - target) <= 0.35 * target; }

bool continuous_armse() {
  const std::vector<Panel> cols{Panel::direct1, Panel::direct2, Panel::indirect1, Panel::indirect2};
  // reference 10^3 ARMSE, [panel][scenario I, II, III]
  const double cbs500[4][3] = {{71.89, 93.08, 100.59}, {65.69, 104.05, 113.00}, {31.37, 44.47, 50.33}, {27.52, 26.40, 27.80}};
  const double cbk500[4][3] = {{99.32, 122.37, 129.99}, {95.10, 123.70, 127.95}, {32.50, 29.95, 38.18}, {23.02, 23.73, 24.76}};
  const double cbs1000[4][3] = {{56.35, 81.89, 88.79}, {51.27, 91.69, 98.58}, {24.87, 39.39, 43.76}, {21.52, 19.22, 20.43}};
  const double cbk1000[4][3] = {{81.58, 90.83, 98.23}, {78.41, 92.07, 96.20}, {24.22, 22.92, 28.67}, {17.17, 17.40, 17.88}};
  const Scenario sc[3] = {Scenario::I, Scenario::II, Scenario::III};
  std::vector<Target> targets;
  for (int c = 0; c < 4; ++c) {
    for (int k = 0; k < 3; ++k) {
      targets.push_back({sc[k], 500, McEstimator::cbs, cols[c], cbs500[c][k]});
      targets.push_back({sc[k], 500, McEstimator::cbk, cols[c], cbk500[c][k]});
      targets.push_back({sc[k], 1000, McEstimator::cbs, cols[c], cbs1000[c][k]});
      targets.push_back({sc[k], 1000, McEstimator::cbk, cols[c], cbk1000[c][k]});
    }
  }
  McConfig cfg;
  cfg.scenarios = {Scenario::I, Scenario::II, Scenario::III};
  cfg.sample_sizes = {500, 1000};
  cfg.trials = 200;
  cfg.estimators = {McEstimator::cbs, McEstimator::cbk, McEstimator::ols};
  cfg.seed = 5005;
  const McReport rep = run_mc(cfg);
  if (rep.failed) {
    detail("harness failure: " + rep.failure_message);
    return false;
  }
  int inside = 0;
  for (const auto& t : targets) {
    const double got = 1000.0 * rep.cell(t.s, t.n, t.e, t.p).armse;
    const bool ok = within(got, t.value);
    inside += ok;
    detail(to_string(t.s) + " N=" + std::to_string(t.n) + " " + to_string(t.e) + " " + to_string(t.p) +
           ": 10^3 ARMSE " + fmt(got, 5) + " vs " + fmt(t.value, 5) + " [" + fmt(0.65 * t.value, 4) + ", " +
           fmt(1.35 * t.value, 4) + "] " + (ok ? "in" : "OUT"));
  }
  bool monotone = true;
  for (Scenario s : cfg.scenarios) {
    for (Panel p : cols) {
      const double a = rep.cell(s, 500, McEstimator::cbs, p).armse, b = rep.cell(s, 1000, McEstimator::cbs, p).armse;
      if (!(b < a)) {
        monotone = false;
        detail("CBS not decreasing in N: " + to_string(s) + " " + to_string(p));
      }
    }
  }
  for (Scenario s : cfg.scenarios) {
    detail("OLS " + to_string(s) + " direct1 (reference): N=500 " +
           fmt(1000.0 * rep.cell(s, 500, McEstimator::ols, Panel::direct1).armse, 5) + ", N=1000 " +
           fmt(1000.0 * rep.cell(s, 1000, McEstimator::ols, Panel::direct1).armse, 5));
  }
  detail(std::to_string(inside) + " of " + std::to_string(targets.size()) + " cells inside +-35%; CBS N-monotone: " +
         (monotone ? "yes" : "no"));
  return inside == static_cast<int>(targets.size()) && monotone;
}

// 6 ------------------------------------------------------------------------
bool binary_armse() {
  // columns: mu(1,0)-mu(0,0), mu(1,1)-mu(0,1), mu(1,1)-mu(1,0), mu(0,1)-mu(0,0) at t = 1, t' = 0
  const std::vector<Panel> cols{Panel::direct2, Panel::direct1, Panel::indirect1, Panel::indirect2};
  const double ipw[2][4] = {{123.59, 125.53, 94.83, 43.72}, {85.95, 85.16, 66.80, 30.22}};
  const double cbs[2][4] = {{122.47, 124.44, 95.33, 43.33}, {84.43, 83.28, 66.47, 29.90}};
  McConfig cfg;
  cfg.scenarios = {Scenario::binary};
  cfg.sample_sizes = {500, 1000};
  cfg.trials = 200;
  cfg.estimators = {McEstimator::cbs, McEstimator::ipw};
  cfg.seed = 6006;
  const McReport rep = run_mc(cfg);
  if (rep.failed) {
    detail("harness failure: " + rep.failure_message);
    return false;
  }
  int inside = 0, total = 0;
  const Index sizes[2] = {500, 1000};
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 4; ++c) {
      for (auto [e, target] : {std::pair{McEstimator::cbs, cbs[r][c]}, std::pair{McEstimator::ipw, ipw[r][c]}}) {
        const double got = 1000.0 * rep.cell(Scenario::binary, sizes[r], e, cols[c]).armse;
        const bool ok = within(got, target);
        inside += ok;
        ++total;
        detail("N=" + std::to_string(sizes[r]) + " " + to_string(e) + " " + to_string(cols[c]) + ": " + fmt(got, 5) +
               " vs " + fmt(target, 5) + (ok ? " in" : " OUT"));
      }
    }
  }
  detail(std::to_string(inside) + " of " + std::to_string(total) + " cells inside +-35%");
  return inside == total;
}

// 7 ------------------------------------------------------------------------
bool convergence() {
  const int trials = 200;
  std::vector<std::array<double, 4>> est(trials);
  parallel_for(trials, 0, [&](std::size_t r) {
    const Dataset d = generate(DgpSpec{Scenario::binary, 4000, derive_seed(7007, 1, r)});
    const MediationFit fit = tuned_fit(d);
    CbsEstimator e(fit);
    est[r] = {e.mu(0, 0), e.mu(0, 1), e.mu(1, 0), e.mu(1, 1)};
  });
  const double pts[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  bool ok = true;
  for (int k = 0; k < 4; ++k) {
    double mean = 0.0;
    for (const auto& e : est) mean += e[k] / trials;
    const double truth = true_mu(Scenario::binary, pts[k][0], pts[k][1]);
    ok = ok && std::abs(mean - truth) < 0.02;
    detail("mu(" + fmt(pts[k][0]) + "," + fmt(pts[k][1]) + "): mean " + fmt(mean, 5) + " vs " + fmt(truth) +
           ", |bias| " + fmt(std::abs(mean - truth), 3));
  }
  return ok;
}

// 8 ------------------------------------------------------------------------
bool coverage() {
  const int trials = 300;
  std::vector<int> hit(trials, 0);
  std::vector<double> se(trials, 0.0), est(trials, 0.0);
  parallel_for(trials, 0, [&](std::size_t r) {
    const Dataset d = generate(DgpSpec{Scenario::binary, 1000, derive_seed(8008, 1, r)});
    const MediationFit fit = tuned_fit(d);
    CbsEstimator e(fit);
    PluginNuisances nuis(fit);
    CbsInference inf(e, nuis);
    est[r] = e.mu(1, 0);
    se[r] = inf.variance(1, 0).se;
    hit[r] = std::abs(est[r] - 0.55) <= 1.959963984540054 * se[r];
  });
  double cov = 0, mse = 0, mean = 0, var = 0;
  for (int r = 0; r < trials; ++r) {
    cov += hit[r];
    mse += se[r] / trials;
    mean += est[r] / trials;
  }
  for (double v : est) var += (v - mean) * (v - mean) / (trials - 1);
  cov /= trials;
  detail("coverage of mu(1,0) = " + fmt(cov) + " over " + std::to_string(trials) + " trials; mean se " + fmt(mse) +
         ", Monte Carlo sd " + fmt(std::sqrt(var)));
  return cov >= 0.90 && cov <= 0.98;
}

// 9 ------------------------------------------------------------------------
bool eif_check() {
  const Dataset big = generate(DgpSpec{Scenario::binary, 1000000, 9009});
  const Dataset d = generate(DgpSpec{Scenario::binary, 4000, 9010});
  const MediationFit fit = tuned_fit(d);
  CbsEstimator e(fit);
  TrueBinaryNuisances nuis(d);
  CbsInference inf(e, nuis);
  bool ok = true;
  for (double t : {0.0, 1.0}) {
    for (double tp : {0.0, 1.0}) {
      std::vector<double> s(static_cast<std::size_t>(big.n()));
      parallel_for(s.size(), 0, [&](std::size_t i) { s[i] = eif_binary(big, static_cast<Index>(i), t, tp); });
      double s2 = 0.0;
      for (double v : s) s2 += v * v / static_cast<double>(big.n());
      const double v = inf.variance(t, tp).v_hat;
      const bool in = std::abs(v - s2) <= 0.25 * s2;
      ok = ok && in;
      detail("(" + fmt(t) + "," + fmt(tp) + "): V_hat " + fmt(v) + " vs E[S^2] " + fmt(s2) + ", ratio " +
             fmt(v / s2) + (in ? "" : " OUT"));
    }
  }
  return ok;
}

// 10 -----------------------------------------------------------------------
bool efficiency() {
  const int trials = 300;
  std::vector<double> cbs(trials), oracle(trials);
  parallel_for(trials, 0, [&](std::size_t r) {
    const Dataset d = generate(DgpSpec{Scenario::II, 1000, derive_seed(1010, 1, r)});
    const MediationFit fit = tuned_fit(d);
    CbsEstimator e(fit);
    cbs[r] = e.mu(1, 0);
    // the oracle uses the same outcome sieve, only the weights differ
    OracleEstimator o(d, Scenario::II, CbsOptions{e.series(-1.0).k0});
    oracle[r] = o.mu(1, 0);
  });
  auto variance = [](const std::vector<double>& v) {
    double m = 0, s = 0;
    for (double x : v) m += x / v.size();
    for (double x : v) s += (x - m) * (x - m) / (v.size() - 1);
    return s;
  };
  const double vc = variance(cbs), vo = variance(oracle);
  detail("Var CBS " + fmt(vc) + ", Var oracle " + fmt(vo) + ", ratio " + fmt(vc / vo));
  return vc <= 1.1 * vo;
}

// 11 -----------------------------------------------------------------------
bool property_suites() {
  const std::string cmd = std::string(MEDCAL_UNIT_TESTS_PATH) + " --minimal > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  detail(std::string("unit and property suites: ") + (rc == 0 ? "all passed" : "failures"));
  return rc == 0;
}

}  // namespace

int main(int argc, char** argv) {
  bool strict = false;
  std::string report_path;
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--strict") strict = true;
    else if (a == "--report" && i + 1 < argc) report_path = argv[++i];
    else if (a == "--only" && i + 1 < argc) only.push_back(std::stoi(argv[++i]));
  }
  struct Criterion {
    int id;
    const char* name;
    std::function<bool()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "discrete-cell oracle", discrete_cells},
      {2, "dual-primal equivalence", dual_primal},
      {4, "constant-outcome exactness", constant_outcome},
      {5, "Monte Carlo ARMSE, continuous scenarios", continuous_armse},
      {6, "Monte Carlo ARMSE, binary treatment", binary_armse},
      {7, "point-estimate convergence at N=4000", convergence},
      {8, "plug-in interval coverage", coverage},
      {9, "influence-function variance vs efficient bound", eif_check},
      {10, "efficiency against the true-weight oracle", efficiency},
      {3, "balancing and normalization of every fit", [] {
         balance_sweep();
         return balancing();
       }},
      {11, "property suites", property_suites},
  };
  std::vector<std::pair<int, std::string>> lines;
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    bool ok = false;
    std::cout << "criterion " << c.id << " (" << c.name << ")\n" << std::flush;
    try {
      ok = c.run();
    } catch (const std::exception& e) {
      detail(std::string("error: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream line;
    line << (ok ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.name << " (" << std::fixed
         << std::setprecision(1) << secs << " s)";
    std::cout << line.str() << "\n" << std::flush;
    report << line.str() << '\n';
    lines.emplace_back(c.id, line.str());
    failed += !ok;
  }
  std::sort(lines.begin(), lines.end());
  std::cout << "\nsummary\n";
  for (const auto& l : lines) std::cout << l.second << '\n';
  if (!report_path.empty()) {
    std::ofstream f(report_path);
    f << report.str() << "\nsummary\n";
    for (const auto& l : lines) f << l.second << '\n';
  }
  return strict && failed > 0 ? 1 : 0;
}
