#include "medcal/cli.hpp"

#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace medcal;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "medcal_unit";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string error_of(const fs::path& p) {
  try {
    cli::ingest_csv(p.string(), cli::ColumnMap{}, TreatmentKind::continuous);
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("grid parsing") {
  const auto g = cli::parse_grid("0:1:0.25");
  REQUIRE(g.size() == 5);
  CHECK(g[4] == doctest::Approx(1.0));
  CHECK(cli::parse_grid("-1:1:0.1").size() == 21);
  CHECK(cli::parse_grid("0.5, 1.5,2").size() == 3);
  CHECK_THROWS(cli::parse_grid("1:0:0.1"));
  CHECK_THROWS(cli::parse_grid("0:1:0"));
  CHECK_THROWS(cli::parse_grid("a,b"));
}

TEST_CASE("CSV ingestion errors name the row and column") {
  const fs::path p = scratch("bad.csv");
  write_text(p, "y,t,m,x\n1,2,3,4\n1,NA,3,4\n");
  std::string e = error_of(p);
  CHECK(e.find("row 3") != std::string::npos);
  CHECK(e.find("'t'") != std::string::npos);

  write_text(p, "y,t,m,x\n1,2,,4\n");
  e = error_of(p);
  CHECK(e.find("row 2") != std::string::npos);
  CHECK(e.find("'m'") != std::string::npos);

  write_text(p, "y,t,m,x\n1,2,abc,4\n");
  CHECK(error_of(p).find("'m'") != std::string::npos);

  write_text(p, "y,t,x\n1,2,4\n");
  CHECK(error_of(p).find("missing column 'm'") != std::string::npos);

  write_text(p, "");
  CHECK(error_of(p).find("empty") != std::string::npos);

  write_text(p, "y,t,m,x\n");
  CHECK(error_of(p).find("no data") != std::string::npos);
}

TEST_CASE("CSV round trip") {
  const Dataset d = generate(DgpSpec{Scenario::I, 20, 3});
  const fs::path p = scratch("round.csv");
  cli::write_csv(d, p.string(), cli::ColumnMap{});
  const Dataset r = cli::ingest_csv(p.string(), cli::ColumnMap{}, TreatmentKind::continuous);
  CHECK(r.y == d.y);
  CHECK(r.t == d.t);
  CHECK(r.m == d.m);
  CHECK(r.x == d.x);
}

TEST_CASE("configuration round trip and unknown keys") {
  cli::RunConfig c;
  c.methods = {"cbs", "ols"};
  c.grid = "-1:1:0.5";
  c.k1 = 3;
  c.seed = 77;
  const cli::RunConfig back = cli::config_from_json(cli::to_json(c));
  CHECK(cli::to_json(back) == cli::to_json(c));
  CHECK_THROWS(cli::config_from_json(cli::json{{"bogus", 1}}));
  const cli::RunConfig over = cli::config_from_json(cli::json{{"seed", 5}}, c);
  CHECK(over.seed == 5);
  CHECK(over.k1 == 3);
}

TEST_CASE("estimate writes JSON with config, grid, curves and diagnostics") {
  const Dataset d = generate(DgpSpec{Scenario::I, 300, 4});
  const fs::path in = scratch("est.csv");
  cli::write_csv(d, in.string(), cli::ColumnMap{});
  cli::RunConfig c;
  c.input = in.string();
  c.methods = {"cbs", "cbk", "ols"};
  c.grid = "-1:1:1";
  c.seed = 9;
  std::ostringstream out, err;
  REQUIRE(cli::run(c, out, err) == 0);
  const auto j = cli::json::parse(out.str());
  CHECK(j["config"]["seed"] == 9);
  CHECK(j["grid"].size() == 3);
  CHECK(j["curves"].size() == 3 * 6 * 3);
  CHECK(j["curves"][0]["method"] == "cbs");
  CHECK(j["curves"][0]["se"].is_number());
  CHECK(j.contains("diagnostics"));

  c.output = scratch("est_out.csv").string();
  std::ostringstream o2, e2;
  REQUIRE(cli::run(c, o2, e2) == 0);
  const std::string csv = read_text(c.output);
  CHECK(csv.rfind("# {\"config\"", 0) == 0);
  std::istringstream lines(csv);
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 2 + 3 * 6 * 3);
}

TEST_CASE("failures exit non-zero with a JSON error") {
  cli::RunConfig c;
  c.input = scratch("does_not_exist.csv").string();
  std::ostringstream out, err;
  CHECK(cli::run(c, out, err) == 1);
  const auto j = cli::json::parse(err.str());
  CHECK(j["error"].get<std::string>().find("cannot open") != std::string::npos);
  CHECK(out.str().empty());
}

TEST_CASE("weights and tune subcommands") {
  const Dataset d = generate(DgpSpec{Scenario::II, 200, 8});
  const fs::path in = scratch("w.csv");
  cli::write_csv(d, in.string(), cli::ColumnMap{});
  cli::RunConfig c;
  c.subcommand = "weights";
  c.input = in.string();
  std::ostringstream out, err;
  REQUIRE(cli::run(c, out, err) == 0);
  auto j = cli::json::parse(out.str());
  CHECK(j["pi_x"].size() == 200);
  CHECK(j["weights_x"]["balancing_residual"].get<double>() <= 1e-6);
  CHECK(std::abs(j["weights_mx"]["mean"].get<double>() - 1.0) <= 1e-6);

  c.subcommand = "tune";
  std::ostringstream o2;
  REQUIRE(cli::run(c, o2, err) == 0);
  j = cli::json::parse(o2.str());
  CHECK(j["selected"]["k1"].get<int>() >= 2);
  CHECK(j["gcv"].size() > 0);
}

TEST_CASE("command-line flags take precedence over the config file") {
  const Dataset d = generate(DgpSpec{Scenario::I, 200, 10});
  const fs::path in = scratch("prec.csv");
  cli::write_csv(d, in.string(), cli::ColumnMap{});
  const fs::path cfg = scratch("prec.json");
  write_text(cfg, "{\"seed\": 5, \"grid\": \"0:1:0.5\", \"methods\": [\"ols\"]}");
  const fs::path out = scratch("prec_out.json");
  const std::string cmd = std::string(MEDCAL_CLI_PATH) + " estimate --config " + cfg.string() + " --input " +
                          in.string() + " --seed 11 --output " + out.string();
  REQUIRE(std::system(cmd.c_str()) == 0);
  const auto j = cli::json::parse(read_text(out));
  CHECK(j["config"]["seed"] == 11);
  CHECK(j["config"]["grid"] == "0:1:0.5");
  CHECK(j["curves"][0]["method"] == "ols");
  const std::string bad = std::string(MEDCAL_CLI_PATH) + " estimate --input " + scratch("missing.csv").string() +
                          " 2> " + scratch("err.txt").string();
  CHECK(std::system(bad.c_str()) != 0);
}
