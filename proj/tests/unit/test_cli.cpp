#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cli/commands.hpp"
#include "parspl/schedule_io.hpp"

using namespace parspl;
using namespace parspl::cli;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("parspl_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("config json round trip keeps every field") {
  ProblemConfig c;
  c.grid.nw = 4;
  c.grid.nh = 2;
  c.grid.domains = GridSpec::row_domains(4, 2);
  c.thermal.r_cu_sink = 12.5;
  c.power.vf_table = {{0.5, 0.5e9}, {0.9, 2.0e9}};
  c.cost.barrier_overhead_cycles = 44;
  c.admm.eps_prim = 1e-3;
  c.cutoff = 0.004;
  const auto back = config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.power.vf_table.size() == 2);
  CHECK(back.grid.domains == c.grid.domains);
  CHECK(back.cutoff == 0.004);
}

TEST_CASE("partial config files keep defaults and bad versions are rejected") {
  const auto c = config_from_json(json::parse(R"({"thermal": {"r_si_cu": 3.0}})"));
  CHECK(c.thermal.r_si_cu == 3.0);
  CHECK(c.thermal.c_si == ThermalConstants{}.c_si);
  CHECK_FALSE(c.cutoff.has_value());
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"version": [2, 0]})")), VersionError);
  CHECK_NOTHROW(config_from_json(json::parse(R"({"version": [1, 7]})")));
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"thermal": {"r_si_cu": "x"}})")), FormatError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"thermal": {"r_si_cu": -1}})")), Error);
  CHECK_THROWS_AS(config_from_json(json::parse("[1]")), FormatError);
}

TEST_CASE("shipped constants file loads") {
  const auto c = load_config(fs::path(PARSPL_SOURCE_DIR) / "data" / "constants.json");
  CHECK(to_json(c) == to_json(ProblemConfig{}));
}

TEST_CASE("grid strings and worker environment") {
  CHECK(parse_grid("12x9") == std::pair<index_t, index_t>{12, 9});
  CHECK_THROWS_AS(parse_grid("12*9"), Error);
  CHECK_THROWS_AS(parse_grid("0x3"), Error);
  ::unsetenv("PARSPL_WORKERS");
  CHECK(default_workers() == 8);
  ::setenv("PARSPL_WORKERS", "3", 1);
  CHECK(default_workers() == 3);
  ::setenv("PARSPL_WORKERS", "three", 1);
  CHECK_THROWS_AS(default_workers(), Error);
  ::unsetenv("PARSPL_WORKERS");
}

TEST_CASE("power-law fit") {
  const std::vector<double> x{9, 36, 81, 144};
  std::vector<double> y;
  for (double v : x) y.push_back(5.0 * std::pow(v, 1.5));
  CHECK(fit_exponent(x, y) == doctest::Approx(1.5));
  CHECK_THROWS_AS(fit_exponent({1.0}, {1.0}), Error);
}

TEST_CASE("build then solve reaches solved and is repeatable") {
  const auto dir = scratch("build");
  BuildOptions b;
  b.out = dir;
  const auto built = cmd_build(b);
  CHECK(built["problem_nnz"].get<index_t>() > 0);
  const auto qp1 = slurp(dir / "qp.txt"), cfg1 = slurp(dir / "config.json"), l1 = slurp(dir / "factor_L.mtx");
  cmd_build(b);
  CHECK(slurp(dir / "qp.txt") == qp1);
  CHECK(slurp(dir / "config.json") == cfg1);
  CHECK(slurp(dir / "factor_L.mtx") == l1);

  SolveOptions s;
  s.dir = dir;
  CHECK(cmd_solve(s)["status"] == "solved");
  s.backend = Backend::parallel;
  s.precision = Precision::fp32;
  s.workers = 4;
  const auto par = cmd_solve(s);
  CHECK(par["status"] == "solved");
  CHECK(par["schedule"]["barriers_per_solve"] == par["schedule"]["sync_count"]);
  CHECK(fs::exists(dir / "residuals_parallel_fp32.csv"));
  s.precision = Precision::fp16emu;
  CHECK_THROWS_AS(cmd_solve(s), Error);
  fs::remove_all(dir);
}

TEST_CASE("parspl schedule needs fewer barriers than the per-column baseline") {
  const auto dir = scratch("schedule");
  BuildOptions b;
  b.out = dir;
  cmd_build(b);
  const auto naive = cmd_schedule({dir, 8, ScheduleKind::naive_column});
  const auto ours = cmd_schedule({dir, 8, ScheduleKind::parspl});
  CHECK(ours["sync_count"].get<index_t>() < naive["sync_count"].get<index_t>());
  CHECK(fs::exists(dir / "schedule_parspl.txt"));
  CHECK(load_schedule((dir / "schedule_parspl.txt").string()).metrics.sync_count == ours["sync_count"].get<index_t>());
  fs::remove_all(dir);
}

TEST_CASE("prune, simulate and report on a small problem") {
  const auto dir = scratch("pipeline");
  BuildOptions b;
  b.out = dir;
  cmd_build(b);

  PruneOptions p;
  p.dir = dir;
  CHECK_THROWS_AS(cmd_prune(p), Error);
  p.cutoff = 0.005;
  p.automatic = true;
  CHECK_THROWS_AS(cmd_prune(p), Error);
  p.automatic = false;
  const auto pr = cmd_prune(p);
  CHECK(pr["pruned_nnz"].get<index_t>() < pr["vanilla_nnz"].get<index_t>());
  CHECK(load_config(dir / "config.json").cutoff == 0.005);

  SimulateOptions s;
  s.dir = dir;
  s.compare = {"pruned", "vanilla"};
  s.duration = 0.2;
  const auto sim = cmd_simulate(s);
  CHECK(sim["variants"]["pruned"]["steps"] == 200);
  CHECK(sim["variants"]["vanilla"]["budget_violations"] == 0);
  CHECK(sim["within_band"] == true);
  const auto rmse = slurp(dir / "rmse.csv");
  CHECK(std::count(rmse.begin(), rmse.end(), '\n') == 200);
  s.compare = {"nonsense"};
  CHECK_THROWS_AS(cmd_simulate(s), Error);

  ReportOptions r;
  r.dir = dir;
  r.kind = ReportKind::memory;
  CHECK(cmd_report(r)["within_bound"] == true);
  r.kind = ReportKind::residuals;
  const auto res = cmd_report(r);
  CHECK(res["precisions"]["fp64"]["first_iteration_below_eps"].get<int>() <= 64);
  CHECK(res["precisions"]["fp16emu"]["first_iteration_below_eps"].is_null());
  r.kind = ReportKind::sync_counts;
  r.workers = 2;
  CHECK(cmd_report(r)["rows"].size() == 6);
  fs::remove_all(dir);
}

TEST_CASE("size-vs-grid grows and pruning wins from 6x6 up") {
  const auto rows = size_vs_grid(ProblemConfig{}, {3, 6, 9}, 0.005);
  REQUIRE(rows.size() == 3);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    CHECK(rows[k].vanilla_nnz > rows[k - 1].vanilla_nnz);
    CHECK(rows[k].pruned_nnz > rows[k - 1].pruned_nnz);
  }
  for (const auto& r : rows)
    if (r.grid >= 6) CHECK(r.pruned_nnz < r.vanilla_nnz);
}

TEST_CASE("commands report missing inputs") {
  const auto dir = scratch("missing");
  fs::create_directories(dir);
  try {
    cmd_schedule({dir, 2, ScheduleKind::parspl});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io);
    CHECK(std::string(e.what()).find("config.json") != std::string::npos);
  }
  SimulateOptions s;
  s.dir = dir;
  CHECK_THROWS_AS(cmd_simulate(s), Error);
  BuildOptions b;
  b.out = dir;
  cmd_build(b);
  s.compare = {"pruned"};
  try {
    cmd_simulate(s);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io);
  }
  fs::remove_all(dir);
}
