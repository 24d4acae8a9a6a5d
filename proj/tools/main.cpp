#include "medcal/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

struct Flags {
  std::string input, output, format, grid, kernel, treatment, config, y, t;
  std::vector<std::string> methods, m, x, scenarios, estimators;
  std::vector<medcal::Index> sizes;
  double t_prime = 0, bandwidth_constant = 0, density_constant = 0;
  int k1 = 0, kx = 0, kmx = 0, k0 = 0, bootstrap = 0, threads = 0, trials = 0;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON config file; command-line flags take precedence");
  app->add_option("--input", f.input, "input CSV with a header row");
  app->add_option("--output", f.output, "output path (.json or .csv); standard output when omitted");
  app->add_option("--format", f.format, "json, csv or auto")->check(CLI::IsMember({"json", "csv", "auto"}));
  app->add_option("--treatment", f.treatment, "continuous, discrete or mixed")
      ->check(CLI::IsMember({"continuous", "discrete", "mixed"}));
  app->add_option("--y", f.y, "outcome column");
  app->add_option("--t", f.t, "treatment column");
  app->add_option("--m", f.m, "mediator columns")->delimiter(',');
  app->add_option("--x", f.x, "covariate columns")->delimiter(',');
  app->add_option("--method", f.methods, "cbs, cbk, ols, ipw")
      ->delimiter(',')
      ->check(CLI::IsMember({"cbs", "cbk", "ols", "ipw"}));
  app->add_option("--grid", f.grid, "evaluation grid a:b:step or a comma list");
  app->add_option("--tprime", f.t_prime, "reference treatment t'");
  app->add_option("--k1", f.k1, "treatment sieve dimension (0: GCV)");
  app->add_option("--kx", f.kx, "covariate sieve dimension per coordinate (0: GCV)");
  app->add_option("--kmx", f.kmx, "mediator-covariate sieve dimension per coordinate (0: GCV)");
  app->add_option("--k0", f.k0, "outcome sieve dimension (0: leave-one-out)");
  app->add_option("--bandwidth-constant", f.bandwidth_constant, "C in h = C N^-1/4 (0: kernel default)");
  app->add_option("--density-constant", f.density_constant, "rule-of-thumb constant for plug-in densities");
  app->add_option("--kernel", f.kernel, "epanechnikov2, epanechnikov4 or gaussian");
  app->add_option("--bootstrap", f.bootstrap, "bootstrap replicates (0: none, otherwise >= 50)");
  app->add_option("--seed", f.seed, "master seed");
  app->add_option("--threads", f.threads, "worker threads (0: hardware concurrency)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calibrated nonparametric mediation effects"};
  app.require_subcommand(1);
  Flags f;
  std::vector<CLI::App*> subs;
  const std::pair<const char*, const char*> commands[] = {
      {"estimate", "effect curves mu(t, t') and the four effect panels"},
      {"tune", "data-driven sieve dimensions and bandwidth with the selection audit"},
      {"simulate", "Monte Carlo ARMSE over the simulation designs"},
      {"weights", "calibration weights pi_X and pi_MX at each observation"},
  };
  for (const auto& [name, help] : commands) {
    auto* s = app.add_subcommand(name, help);
    add_common(s, f);
    subs.push_back(s);
  }
  auto* sim = app.get_subcommand("simulate");
  sim->add_option("--scenario", f.scenarios, "I, II, III, binary")->delimiter(',');
  sim->add_option("--sizes", f.sizes, "sample sizes")->delimiter(',');
  sim->add_option("--trials", f.trials, "Monte Carlo trials per cell");
  sim->add_option("--estimators", f.estimators, "cbs, cbk, ols, ipw, oracle")->delimiter(',');
  sim->add_flag("--tune-once", "tune on the first trial only");

  CLI11_PARSE(app, argc, argv);

  CLI::App* sub = app.get_subcommands().front();
  medcal::cli::RunConfig c;
  try {
    if (!f.config.empty()) {
      std::ifstream in(f.config);
      if (!in) throw std::runtime_error("cannot open config file '" + f.config + "'");
      c = medcal::cli::config_from_json(medcal::cli::json::parse(in), c);
    }
  } catch (const std::exception& e) {
    std::cerr << medcal::cli::json{{"error", e.what()}}.dump() << '\n';
    return 1;
  }
  c.subcommand = sub->get_name();
  auto given = [&](const char* flag) { return sub->count(flag) > 0; };
  if (given("--input")) c.input = f.input;
  if (given("--output")) c.output = f.output;
  if (given("--format")) c.format = f.format;
  if (given("--treatment")) c.treatment = f.treatment;
  if (given("--y")) c.columns.y = f.y;
  if (given("--t")) c.columns.t = f.t;
  if (given("--m")) c.columns.m = f.m;
  if (given("--x")) c.columns.x = f.x;
  if (given("--method")) c.methods = f.methods;
  if (given("--grid")) c.grid = f.grid;
  if (given("--tprime")) c.t_prime = f.t_prime;
  if (given("--k1")) c.k1 = f.k1;
  if (given("--kx")) c.kx = f.kx;
  if (given("--kmx")) c.kmx = f.kmx;
  if (given("--k0")) c.k0 = f.k0;
  if (given("--bandwidth-constant")) c.bandwidth_constant = f.bandwidth_constant;
  if (given("--density-constant")) c.density_constant = f.density_constant;
  if (given("--kernel")) c.kernel = f.kernel;
  if (given("--bootstrap")) c.bootstrap = f.bootstrap;
  if (given("--seed")) c.seed = f.seed;
  if (given("--threads")) c.threads = f.threads;
  if (sub == sim) {
    if (given("--scenario")) c.scenarios = f.scenarios;
    if (given("--sizes")) c.sizes = f.sizes;
    if (given("--trials")) c.trials = f.trials;
    if (given("--estimators")) c.estimators = f.estimators;
    if (given("--tune-once")) c.retune_each_trial = false;
  } else if (c.input.empty()) {
    std::cerr << medcal::cli::json{{"error", "--input is required"}}.dump() << '\n';
    return 1;
  }
  return medcal::cli::run(c, std::cout, std::cerr);
}
