#pragma once

// Command-line front end: CSV ingestion, run configuration and the
// estimate / tune / simulate / weights subcommands.

#include "medcal/dataset.hpp"
#include "medcal/estimators.hpp"
#include "medcal/simlab.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace medcal::cli {

using json = nlohmann::json;

struct ColumnMap {
  std::string y = "y";
  std::string t = "t";
  std::vector<std::string> m{"m"};
  std::vector<std::string> x{"x"};
};

/// Reads a CSV file with a header row. Throws std::runtime_error naming the
/// file, row (1-based, header is row 1) and column for missing columns,
/// empty or non-numeric cells and empty files.
Dataset ingest_csv(const std::string& path, const ColumnMap& columns, TreatmentKind kind);

/// Writes y, t, m..., x... with the mapped column names (17 significant digits).
void write_csv(const Dataset& data, const std::string& path, const ColumnMap& columns);

/// "a:b:step" -> {a, a + step, ..., b}; also accepts a comma-separated list.
std::vector<double> parse_grid(const std::string& spec);

struct RunConfig {
  std::string subcommand = "estimate";
  std::string input;
  std::string output;              // empty: standard output
  std::string format = "auto";     // json | csv | auto (by output extension)
  ColumnMap columns;
  std::string treatment = "continuous";
  std::vector<std::string> methods{"cbs"};
  std::string grid;                // empty: default grid
  double t_prime = 0.0;
  int k1 = 0, kx = 0, kmx = 0, k0 = 0;  // 0: data-driven
  double bandwidth_constant = 0.0;      // 0: kernel default
  std::string kernel = "epanechnikov2";
  int bootstrap = 0;
  std::uint64_t seed = 1;
  int threads = 1;
  double density_constant = 1.06;
  // simulate
  std::vector<std::string> scenarios{"I", "II", "III"};
  std::vector<Index> sizes{500, 1000};
  int trials = 200;
  std::vector<std::string> estimators{"cbs", "cbk"};
  bool retune_each_trial = true;
};

json to_json(const RunConfig& config);
/// Overlays the keys present in `j` onto `base`; unknown keys are rejected.
RunConfig config_from_json(const json& j, RunConfig base = {});

json to_json(const McReport& report);
std::string to_csv(const McReport& report);

/// Executes the configured subcommand and writes its artifact. Returns the
/// process exit status: 0 iff the artifact was produced. Errors are reported
/// on `err` as a JSON object {"error": ...}.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace medcal::cli
