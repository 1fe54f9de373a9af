#pragma once

#include <string>
#include <vector>

#include "config.hpp"
#include "parspl/hypt.hpp"

namespace parspl::cli {

// Problem directory layout, one instance per directory:
//   config.json            grid, constants, solver and cost settings, cutoff
//   model_d.mtx model_e.mtx  discrete model of the active (possibly pruned) problem
//   qp.txt qp_pruned.txt   assembled QPs
//   factor_L.mtx factor.json  KKT factor of the active QP (dinv, permutation)
//   schedule_<baseline>.txt/.json, solve_*.json, residuals_*.csv, trace_*.csv,
//   rmse.csv, simulate.json, bench.json, report_<kind>.csv/.json

struct BuildOptions {
  std::string grid = "3x3";
  int hp = 2;
  double ts = 1e-3;
  fs::path out;
  fs::path constants;  // optional JSON with thermal/power/cost/admm sections
};

struct PruneOptions {
  fs::path dir;
  std::optional<double> cutoff;
  bool automatic = false;
  std::string scenario = "default";  // or a CSV path
  std::vector<double> candidates{0.0, 0.001, 0.002, 0.005, 0.01, 0.02, 0.05};
};

struct ScheduleOptions {
  fs::path dir;
  int workers = 8;
  ScheduleKind baseline = ScheduleKind::parspl;
};

enum class Backend { reference, parallel };
enum class Precision { fp64, fp32, fp16emu };

struct SolveOptions {
  fs::path dir;
  Backend backend = Backend::reference;
  Precision precision = Precision::fp64;
  int max_iter = 0;  // 0: from config
  int workers = 8;
};

struct SimulateOptions {
  fs::path dir;
  std::string scenario = "default";
  std::vector<std::string> compare{"vanilla"};
  std::optional<double> duration;
  std::optional<double> noise_sigma;
  std::optional<std::uint64_t> seed;
  Backend backend = Backend::reference;
  int workers = 8;
};

struct BenchOptions {
  fs::path dir;
  int repetitions = 20;
  int workers = 8;
};

enum class ReportKind { size_vs_grid, residuals, sync_counts, speedup, memory };

struct ReportOptions {
  fs::path dir;
  ReportKind kind = ReportKind::size_vs_grid;
  std::vector<index_t> grids{3, 6, 9, 12};
  int workers = 8;
  int repetitions = 5;
};

ScheduleKind parse_baseline(const std::string& s);
Backend parse_backend(const std::string& s);
Precision parse_precision(const std::string& s);
ReportKind parse_report_kind(const std::string& s);
const char* to_string(Backend b) noexcept;
const char* to_string(Precision p) noexcept;
const char* to_string(ReportKind k) noexcept;
const char* baseline_name(ScheduleKind k) noexcept;

// Every command returns a JSON summary that is also written into the
// problem directory where noted.
json cmd_build(const BuildOptions& o);
json cmd_prune(const PruneOptions& o);
json cmd_schedule(const ScheduleOptions& o);
json cmd_solve(const SolveOptions& o);
json cmd_simulate(const SimulateOptions& o);
json cmd_bench(const BenchOptions& o);
json cmd_report(const ReportOptions& o);

// Shared by the commands, the reports and the acceptance suite.

/// Discrete model for a config; pruned at the config's cutoff when `pruned`.
ThermalPlantModel make_model(const ProblemConfig& c, bool pruned);

/// MPC problem moved to the first step of the default scenario with every
/// state at ambient, so solves see real targets and budgets.
MpcQp reference_step(const ThermalPlantModel& model, const ProblemConfig& c);

Scenario load_scenario(const std::string& spec, const ProblemConfig& c);

/// Least-squares slope of log(y) against log(x).
double fit_exponent(const std::vector<double>& x, const std::vector<double>& y);

struct SizeRow {
  index_t grid = 0;
  index_t n_pe = 0;
  index_t vanilla_nnz = 0;
  index_t pruned_nnz = 0;
};

std::vector<SizeRow> size_vs_grid(const ProblemConfig& base, const std::vector<index_t>& grids, double cutoff);

}  // namespace parspl::cli
