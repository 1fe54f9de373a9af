#include <CLI11.hpp>

#include <iostream>

#include "cli/commands.hpp"

using namespace parspl;
using namespace parspl::cli;

namespace {

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorCode::invalid_argument, "bad number in list: '" + item + "'");
    }
  }
  return out;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

std::string one_line(std::string s) {
  for (auto& ch : s)
    if (ch == '\n' || ch == '\r') ch = ' ';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"parspl: sparse QP solver, HyPT scheduler and thermal MPC pipeline"};
  app.require_subcommand(1);

  int workers = 0;
  std::string dir = ".";
  std::string baseline = "parspl", backend = "reference", precision = "fp64", scenario = "default";
  std::string kind, compare = "vanilla", candidates, grid = "3x3", grids = "3,6,9,12";
  double cutoff = -1.0;
  bool automatic = false;
  BuildOptions build;
  SolveOptions solve;
  SimulateOptions sim;
  BenchOptions bench;
  ReportOptions report;
  double duration = 0.0, noise = -1.0;
  std::uint64_t seed = 0;

  auto* b = app.add_subcommand("build", "Build the thermal model and MPC problem");
  b->add_option("--grid", grid, "Grid as NwxNh")->capture_default_str();
  b->add_option("--hp", build.hp, "Prediction horizon")->capture_default_str();
  b->add_option("--ts", build.ts, "Sample time in seconds")->capture_default_str();
  b->add_option("--out", dir, "Problem directory")->required();
  b->add_option("--constants", build.constants, "JSON with thermal/power/cost/admm sections");

  auto* p = app.add_subcommand("prune", "Prune the discrete model");
  p->add_option("--dir", dir, "Problem directory")->capture_default_str();
  auto* cut = p->add_option("--cutoff", cutoff, "Fixed cutoff");
  auto* aut = p->add_flag("--auto", automatic, "Select the cutoff by closed-loop simulation");
  cut->excludes(aut);
  p->add_option("--scenario", scenario, "'default' or a scenario CSV")->capture_default_str();
  p->add_option("--candidates", candidates, "Comma-separated cutoff candidates for --auto");

  auto* s = app.add_subcommand("schedule", "Generate a triangular-solve schedule");
  s->add_option("--dir", dir, "Problem directory")->capture_default_str();
  s->add_option("--workers", workers, "Worker count (default: PARSPL_WORKERS or 8)");
  s->add_option("--baseline", baseline, "naive-level, naive-column or parspl")->capture_default_str();

  auto* v = app.add_subcommand("solve", "Solve one MPC step");
  v->add_option("--dir", dir, "Problem directory")->capture_default_str();
  v->add_option("--backend", backend, "reference or parallel")->capture_default_str();
  v->add_option("--precision", precision, "fp64, fp32 or fp16emu")->capture_default_str();
  v->add_option("--max-iter", solve.max_iter, "Iteration limit (default: config)");
  v->add_option("--workers", workers, "Worker count for the parallel backend");

  auto* m = app.add_subcommand("simulate", "Run the closed loop");
  m->add_option("--dir", dir, "Problem directory")->capture_default_str();
  m->add_option("--scenario", scenario, "'default' or a scenario CSV")->capture_default_str();
  m->add_option("--compare", compare, "Variants: vanilla, pruned or pruned,vanilla")->capture_default_str();
  m->add_option("--duration", duration, "Override the scenario duration (s)");
  m->add_option("--noise", noise, "Measurement noise sigma (degC)");
  m->add_option("--seed", seed, "Noise seed");
  m->add_option("--backend", backend, "reference or parallel")->capture_default_str();
  m->add_option("--workers", workers, "Worker count for the parallel backend");

  auto* n = app.add_subcommand("bench", "Time the triangular solves and full ADMM solves");
  n->add_option("--dir", dir, "Problem directory")->capture_default_str();
  n->add_option("--repetitions", bench.repetitions, "Samples per measurement")->capture_default_str();
  n->add_option("--workers", workers, "Worker count");

  auto* r = app.add_subcommand("report", "Write a report CSV and JSON bundle");
  r->add_option("--dir", dir, "Problem directory")->capture_default_str();
  r->add_option("--kind", kind, "size-vs-grid, residuals, sync-counts, speedup or memory")->required();
  r->add_option("--grids", grids, "Square grid sizes for size-vs-grid")->capture_default_str();
  r->add_option("--workers", workers, "Largest worker count");
  r->add_option("--repetitions", report.repetitions, "Timing samples for speedup")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    const int w = workers > 0 ? workers : default_workers();
    json out;
    if (*b) {
      build.grid = grid;
      build.out = dir;
      out = cmd_build(build);
    } else if (*p) {
      PruneOptions o;
      o.dir = dir;
      if (*cut) o.cutoff = cutoff;
      o.automatic = automatic;
      o.scenario = scenario;
      if (!candidates.empty()) o.candidates = parse_list(candidates);
      out = cmd_prune(o);
    } else if (*s) {
      out = cmd_schedule({dir, w, parse_baseline(baseline)});
    } else if (*v) {
      solve.dir = dir;
      solve.backend = parse_backend(backend);
      solve.precision = parse_precision(precision);
      solve.workers = w;
      out = cmd_solve(solve);
    } else if (*m) {
      sim.dir = dir;
      sim.scenario = scenario;
      sim.compare = split(compare);
      if (duration > 0.0) sim.duration = duration;
      if (noise >= 0.0) sim.noise_sigma = noise;
      if (m->count("--seed")) sim.seed = seed;
      sim.backend = parse_backend(backend);
      sim.workers = w;
      out = cmd_simulate(sim);
    } else if (*n) {
      bench.dir = dir;
      bench.workers = w;
      out = cmd_bench(bench);
    } else if (*r) {
      report.dir = dir;
      report.kind = parse_report_kind(kind);
      report.workers = w;
      report.grids.clear();
      for (double g : parse_list(grids)) report.grids.push_back(static_cast<index_t>(g));
      out = cmd_report(report);
    }
    std::cout << out.dump(2) << '\n';
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << one_line(e.what()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << one_line(e.what()) << '\n';
    return 1;
  }
}
