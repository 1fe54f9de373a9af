#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "parspl/matrix_market.hpp"
#include "parspl/qp.hpp"
#include "parspl/schedule_io.hpp"

namespace parspl::cli {

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

fs::path need(const fs::path& file, const char* hint) {
  if (!fs::exists(file)) throw Error(ErrorCode::io, "missing input " + file.string() + " (" + hint + ")");
  return file;
}

ProblemConfig load_problem(const fs::path& dir) {
  return load_config(need(dir / "config.json", "run build first"));
}

SparseCSC<double> to_csc(const Eigen::MatrixXd& m) {
  std::vector<Triplet<double>> t;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (m(i, j) != 0.0) t.push_back({static_cast<index_t>(i), static_cast<index_t>(j), m(i, j)});
  return SparseCSC<double>::from_triplets(static_cast<index_t>(m.rows()), static_cast<index_t>(m.cols()), t);
}

void write_active(const fs::path& dir, const ThermalPlantModel& model, const QpProblem<double>& qp,
                  const AdmmSettings& settings) {
  write_matrix_market_file(dir / "model_d.mtx", to_csc(model.d));
  write_matrix_market_file(dir / "model_e.mtx", to_csc(model.e));
  const auto kkt = assemble_kkt(qp, settings);
  write_matrix_market_file(dir / "factor_L.mtx", kkt.factor.L);
  json f;
  f["format"] = "parspl-factor";
  f["version"] = {kConfigFormatMajor, kConfigFormatMinor};
  f["n"] = kkt.factor.size();
  f["nnz_l"] = kkt.factor.L.nnz();
  f["dinv"] = kkt.factor.dinv;
  f["perm"] = std::vector<index_t>(kkt.factor.perm.perm().begin(), kkt.factor.perm.perm().end());
  save_json(dir / "factor.json", f);
}

json schedule_summary(const Schedule& s, const SparseCSC<double>& L, const CostModelParams& cost) {
  const auto& m = s.metrics;
  const auto c = model_cost(s, cost);
  auto plain = cost;
  plain.streaming_enabled = false;
  const double seq = sequential_cost(L, cost);
  json j;
  j["baseline"] = baseline_name(s.kind);
  j["workers"] = s.n_workers;
  j["n"] = s.n;
  j["nnz_l"] = m.nnz_l;
  j["sync_count"] = m.sync_count;
  j["shard_count"] = m.shard_count;
  j["sl"] = m.sl;
  j["kept_levels"] = m.kept_levels;
  j["total_levels"] = m.total_levels;
  j["tiles_before_merge"] = m.tiles_before_merge;
  j["tiles_after_merge"] = m.tiles_after_merge;
  j["static_shard_count"] = m.static_shard_count;
  j["static_sync_count"] = m.static_sync_count;
  j["alap_shard_count"] = m.alap_shard_count;
  j["alap_sync_count"] = m.alap_sync_count;
  j["alap_fallback"] = m.alap_fallback;
  j["reductions"] = m.reductions;
  j["diaginv_fallbacks"] = m.diaginv_fallbacks;
  j["worker_nnz"] = m.worker_nnz;
  j["modeled_cycles"] = c.modeled_cycles;
  j["modeled_cycles_plain"] = model_cost(s, plain).modeled_cycles;
  j["modeled_utilization"] = c.modeled_utilization;
  j["sequential_cycles"] = seq;
  j["modeled_speedup"] = c.modeled_cycles > 0 ? seq / c.modeled_cycles : 0.0;
  return j;
}

template <typename T>
struct SolveRun {
  SolveResult<T> result;
  double wall = 0.0;
  json backend_info;
};

template <typename T>
SolveRun<T> run_solve(const QpProblem<double>& qp, const AdmmSettings& st, Backend backend, int workers) {
  AdmmSolver<T> solver(qp.template cast<T>(), st);
  SolveRun<T> run;
  std::shared_ptr<ScheduledSolver<T>> sched;
  if (backend == Backend::parallel) {
    sched = std::make_shared<ScheduledSolver<T>>(build_schedule(solver.kkt().factor, workers));
    solver.set_backend(sched);
  }
  const auto t0 = clock_type::now();
  run.result = solver.solve();
  run.wall = seconds_since(t0);
  if (sched) {
    run.backend_info = {{"workers", workers},
                        {"sync_count", sched->schedule().metrics.sync_count},
                        {"triangular_solves", sched->solves()},
                        {"barriers_per_solve", sched->last_trace().barrier_count}};
  }
  return run;
}

void write_csv_row(std::ostream& out, std::initializer_list<std::string> cells) {
  bool first = true;
  for (const auto& c : cells) {
    if (!first) out << ',';
    out << c;
    first = false;
  }
  out << '\n';
}

std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

json run_summary(const RunTrace& tr, const ProblemConfig& c) {
  int solved = 0, max_iter = 0, diverged = 0, held = 0;
  for (int k = 0; k < tr.steps(); ++k) {
    solved += tr.status[k] == SolveStatus::solved;
    max_iter += tr.status[k] == SolveStatus::max_iter;
    diverged += tr.status[k] == SolveStatus::diverged;
    held += tr.held[k];
  }
  const auto all = rmse_report(tr, RmseStates::all);
  const auto si = rmse_report(tr, RmseStates::silicon);
  const auto audit = audit_budgets(tr, c.grid, c.admm.eps_prim);
  return {{"steps", tr.steps()},
          {"solved", solved},
          {"max_iter", max_iter},
          {"diverged", diverged},
          {"held", held},
          {"mean_iterations", tr.mean_iterations()},
          {"rmse_all_mean", all.mean},
          {"rmse_all_max", all.max},
          {"rmse_silicon_mean", si.mean},
          {"rmse_silicon_max", si.max},
          {"budget_checked_steps", audit.checked_steps},
          {"budget_violations", audit.violations},
          {"budget_worst_excess", audit.worst_excess},
          {"max_silicon_temperature", max_silicon_temperature(tr, c.grid.n_pe())}};
}

}  // namespace

ScheduleKind parse_baseline(const std::string& s) {
  if (s == "parspl") return ScheduleKind::parspl;
  if (s == "naive-level") return ScheduleKind::naive_level;
  if (s == "naive-column") return ScheduleKind::naive_column;
  throw Error(ErrorCode::invalid_argument, "unknown baseline '" + s + "'");
}

Backend parse_backend(const std::string& s) {
  if (s == "reference") return Backend::reference;
  if (s == "parallel") return Backend::parallel;
  throw Error(ErrorCode::invalid_argument, "unknown backend '" + s + "'");
}

Precision parse_precision(const std::string& s) {
  if (s == "fp64") return Precision::fp64;
  if (s == "fp32") return Precision::fp32;
  if (s == "fp16emu") return Precision::fp16emu;
  throw Error(ErrorCode::invalid_argument, "unknown precision '" + s + "'");
}

ReportKind parse_report_kind(const std::string& s) {
  if (s == "size-vs-grid") return ReportKind::size_vs_grid;
  if (s == "residuals") return ReportKind::residuals;
  if (s == "sync-counts") return ReportKind::sync_counts;
  if (s == "speedup") return ReportKind::speedup;
  if (s == "memory") return ReportKind::memory;
  throw Error(ErrorCode::invalid_argument, "unknown report kind '" + s + "'");
}

const char* to_string(Backend b) noexcept { return b == Backend::reference ? "reference" : "parallel"; }

const char* to_string(Precision p) noexcept {
  switch (p) {
    case Precision::fp64: return "fp64";
    case Precision::fp32: return "fp32";
    case Precision::fp16emu: return "fp16emu";
  }
  return "?";
}

const char* to_string(ReportKind k) noexcept {
  switch (k) {
    case ReportKind::size_vs_grid: return "size-vs-grid";
    case ReportKind::residuals: return "residuals";
    case ReportKind::sync_counts: return "sync-counts";
    case ReportKind::speedup: return "speedup";
    case ReportKind::memory: return "memory";
  }
  return "?";
}

const char* baseline_name(ScheduleKind k) noexcept {
  switch (k) {
    case ScheduleKind::parspl: return "parspl";
    case ScheduleKind::naive_level: return "naive-level";
    case ScheduleKind::naive_column: return "naive-column";
  }
  return "?";
}

ThermalPlantModel make_model(const ProblemConfig& c, bool pruned) {
  auto m = build_discrete_model(c.grid, c.thermal);
  if (pruned) {
    if (!c.cutoff) throw Error(ErrorCode::io, "missing input: problem has no cutoff (run prune first)");
    m = dmp_prune_model(m, *c.cutoff);
  }
  return m;
}

MpcQp reference_step(const ThermalPlantModel& model, const ProblemConfig& c) {
  auto mpc = build_mpc_qp(model, c.power);
  const auto sc = Scenario::default_scenario(c.grid, c.power);
  const auto& ev = sc.at(0.0);
  const std::vector<double> x(c.grid.n_states(), c.thermal.t_amb);
  std::vector<double> p(c.grid.n_pe());
  for (index_t pe = 0; pe < c.grid.n_pe(); ++pe) {
    const double f = ev.target_freq[pe];
    p[pe] = power_forward(c.power, voltage_for_frequency(c.power, f), f, c.thermal.t_amb, ev.workload[pe],
                          LeakageMode::frozen);
  }
  update_mpc_step(mpc, x, p, ev.budget_total, ev.domain_budgets);
  return mpc;
}

Scenario load_scenario(const std::string& spec, const ProblemConfig& c) {
  Scenario s;
  if (spec == "default") {
    s = Scenario::default_scenario(c.grid, c.power);
  } else {
    std::ifstream in(spec);
    if (!in) throw Error(ErrorCode::io, "cannot open scenario " + spec);
    s.timeline = read_scenario_csv(in, c.grid.n_pe(), static_cast<index_t>(c.grid.domains.size()));
  }
  s.duration = c.scenario.duration;
  s.plant_substeps = c.scenario.plant_substeps;
  s.noise_sigma = c.scenario.noise_sigma;
  s.seed = c.scenario.seed;
  s.controller_period = c.grid.ts;
  s.validate(c.grid.n_pe(), static_cast<index_t>(c.grid.domains.size()));
  return s;
}

double fit_exponent(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::invalid_argument, "fit: need two or more points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw Error(ErrorCode::invalid_argument, "fit: x values are all equal");
  return sxy / sxx;
}

std::vector<SizeRow> size_vs_grid(const ProblemConfig& base, const std::vector<index_t>& grids, double cutoff) {
  std::vector<SizeRow> rows;
  for (index_t g : grids) {
    auto c = base;
    c.grid.nw = c.grid.nh = g;
    c.grid.domains = GridSpec::row_domains(g, g);
    const auto model = build_discrete_model(c.grid, c.thermal);
    SizeRow r;
    r.grid = g;
    r.n_pe = c.grid.n_pe();
    r.vanilla_nnz = problem_nnz(build_mpc_qp(model, c.power).qp);
    r.pruned_nnz = problem_nnz(build_mpc_qp(dmp_prune_model(model, cutoff), c.power).qp);
    rows.push_back(r);
  }
  return rows;
}

json cmd_build(const BuildOptions& o) {
  if (o.out.empty()) throw Error(ErrorCode::invalid_argument, "build: --out is required");
  ProblemConfig c;
  if (!o.constants.empty()) c = load_config(o.constants);
  const auto [nw, nh] = parse_grid(o.grid);
  c.grid.nw = nw;
  c.grid.nh = nh;
  c.grid.hp = o.hp;
  c.grid.ts = o.ts;
  c.grid.domains = GridSpec::row_domains(nw, nh);
  c.cutoff.reset();
  c.validate();

  fs::create_directories(o.out);
  for (const char* stale : {"qp_pruned.txt", "dmp_selection.json"}) fs::remove(o.out / stale);
  const auto model = make_model(c, false);
  const auto mpc = build_mpc_qp(model, c.power);
  save_qp((o.out / "qp.txt").string(), mpc.qp);
  write_active(o.out, model, mpc.qp, c.admm);
  save_json(o.out / "config.json", to_json(c));

  return {{"command", "build"},
          {"dir", o.out.string()},
          {"grid", o.grid},
          {"hp", o.hp},
          {"ts", o.ts},
          {"n_states", c.grid.n_states()},
          {"n", mpc.qp.n()},
          {"m", mpc.qp.m()},
          {"nnz_p", mpc.qp.P.nnz()},
          {"nnz_a", mpc.qp.A.nnz()},
          {"problem_nnz", problem_nnz(mpc.qp)},
          {"warnings", mpc.warnings}};
}

json cmd_prune(const PruneOptions& o) {
  if (o.automatic == o.cutoff.has_value())
    throw Error(ErrorCode::invalid_argument, "prune: give exactly one of --cutoff and --auto");
  auto c = load_problem(o.dir);
  const auto vanilla = make_model(c, false);
  json out{{"command", "prune"}};
  double cutoff = 0.0;
  if (o.automatic) {
    const auto sc = load_scenario(o.scenario, c);
    ClosedLoopOptions opt;
    opt.settings = c.admm;
    const auto sel = dmp_select_cutoff(vanilla, c.power, sc, o.candidates, opt);
    cutoff = sel.cutoff;
    json s{{"scenario", o.scenario},   {"band", 0.5},           {"candidates", sel.candidates},
           {"deviations", sel.deviations}, {"problem_nnz", sel.problem_nnz}, {"cutoff", sel.cutoff},
           {"deviation", sel.deviation}};
    save_json(o.dir / "dmp_selection.json", s);
    out["selection"] = s;
  } else {
    cutoff = *o.cutoff;
  }
  c.cutoff = cutoff;
  c.validate();
  const auto pruned = dmp_prune_model(vanilla, cutoff);
  const auto qp_v = build_mpc_qp(vanilla, c.power).qp;
  const auto qp_p = build_mpc_qp(pruned, c.power).qp;
  save_qp((o.dir / "qp_pruned.txt").string(), qp_p);
  write_active(o.dir, pruned, qp_p, c.admm);
  save_json(o.dir / "config.json", to_json(c));
  out["cutoff"] = cutoff;
  out["vanilla_nnz"] = problem_nnz(qp_v);
  out["pruned_nnz"] = problem_nnz(qp_p);
  out["ratio"] = static_cast<double>(problem_nnz(qp_p)) / problem_nnz(qp_v);
  out["nnz_d"] = {count_nonzeros(vanilla.d), count_nonzeros(pruned.d)};
  out["nnz_e"] = {count_nonzeros(vanilla.e), count_nonzeros(pruned.e)};
  return out;
}

json cmd_schedule(const ScheduleOptions& o) {
  if (o.workers < 1) throw Error(ErrorCode::invalid_argument, "schedule: --workers must be >= 1");
  const auto c = load_problem(o.dir);
  const auto model = make_model(c, c.cutoff.has_value());
  const auto kkt = assemble_kkt(build_mpc_qp(model, c.power).qp, c.admm);
  HyptOptions h;
  h.kind = o.baseline;
  const auto t0 = clock_type::now();
  const auto s = build_schedule(kkt.factor, o.workers, h);
  const double build_time = seconds_since(t0);
  const std::string name = baseline_name(o.baseline);
  save_schedule((o.dir / ("schedule_" + name + ".txt")).string(), s);
  auto j = schedule_summary(s, kkt.factor.L, c.cost);
  j["build_seconds"] = build_time;
  save_json(o.dir / ("schedule_" + name + ".json"), j);
  j["command"] = "schedule";
  return j;
}

json cmd_solve(const SolveOptions& o) {
  if (o.workers < 1) throw Error(ErrorCode::invalid_argument, "solve: --workers must be >= 1");
  if (o.precision == Precision::fp16emu && o.backend == Backend::parallel)
    throw Error(ErrorCode::invalid_argument, "solve: fp16emu runs on the reference backend only");
  const auto c = load_problem(o.dir);
  const auto mpc = reference_step(make_model(c, c.cutoff.has_value()), c);
  auto st = c.admm;
  if (o.max_iter > 0) st.max_iter = o.max_iter;
  st.record_trace = true;
  if (o.precision == Precision::fp16emu) st.storage = StoragePrecision::half;

  json j{{"command", "solve"}, {"backend", to_string(o.backend)}, {"precision", to_string(o.precision)},
         {"max_iter", st.max_iter}};
  std::vector<ResidualSample> trace;
  auto fill = [&](const auto& run) {
    const auto& r = run.result;
    j["status"] = to_string(r.status);
    j["iterations"] = r.iterations;
    j["r_prim"] = r.r_prim;
    j["r_dual"] = r.r_dual;
    j["wall_seconds"] = run.wall;
    std::vector<double> u0;
    for (index_t pe = 0; pe < mpc.layout.nc; ++pe) u0.push_back(static_cast<double>(r.x[mpc.layout.u_col(0, pe)]));
    j["u0"] = u0;
    if (!run.backend_info.is_null()) j["schedule"] = run.backend_info;
    trace = r.trace;
  };
  if (o.precision == Precision::fp64)
    fill(run_solve<double>(mpc.qp, st, o.backend, o.workers));
  else
    fill(run_solve<float>(mpc.qp, st, o.backend, o.workers));

  const std::string tag = std::string(to_string(o.backend)) + "_" + to_string(o.precision);
  save_trace_csv((o.dir / ("residuals_" + tag + ".csv")).string(), trace);
  save_json(o.dir / ("solve_" + tag + ".json"), j);
  return j;
}

json cmd_simulate(const SimulateOptions& o) {
  auto c = load_problem(o.dir);
  if (o.duration) c.scenario.duration = *o.duration;
  if (o.noise_sigma) c.scenario.noise_sigma = *o.noise_sigma;
  if (o.seed) c.scenario.seed = *o.seed;
  c.validate();
  if (o.compare.empty() || o.compare.size() > 2) throw Error(ErrorCode::invalid_argument, "simulate: --compare takes one or two variants");
  const auto sc = load_scenario(o.scenario, c);
  const auto plant = make_model(c, false);
  {
    std::ofstream used(o.dir / "scenario.csv");
    if (!used) throw Error(ErrorCode::io, "cannot write scenario.csv");
    write_scenario_csv(used, sc);
  }

  ClosedLoopOptions opt;
  opt.settings = c.admm;
  if (o.backend == Backend::parallel) {
    const int w = o.workers;
    opt.backend = [w](const LdlFactor<double>& f) {
      return std::make_shared<ScheduledSolver<double>>(build_schedule(f, w));
    };
  }

  json j{{"command", "simulate"}, {"scenario", o.scenario}, {"duration", sc.duration}, {"backend", to_string(o.backend)}};
  std::vector<RmseReport> rmse;
  for (const auto& v : o.compare) {
    bool pruned = false;
    if (v == "pruned")
      pruned = true;
    else if (v != "vanilla")
      throw Error(ErrorCode::invalid_argument, "simulate: unknown variant '" + v + "'");
    const auto ctrl = make_model(c, pruned);
    const auto t0 = clock_type::now();
    const auto tr = run_closed_loop(plant, build_mpc_qp(ctrl, c.power), c.power, sc, opt);
    auto s = run_summary(tr, c);
    s["wall_seconds"] = seconds_since(t0);
    if (pruned) s["cutoff"] = *c.cutoff;
    j["variants"][v] = s;
    std::ofstream csv(o.dir / ("trace_" + v + ".csv"));
    if (!csv) throw Error(ErrorCode::io, "cannot write trace_" + v + ".csv");
    write_run_trace_csv(csv, tr, c.grid.n_pe());
    rmse.push_back(rmse_report(tr));
  }

  std::ofstream csv(o.dir / "rmse.csv");
  if (!csv) throw Error(ErrorCode::io, "cannot write rmse.csv");
  if (rmse.size() == 2) {
    write_csv_row(csv, {"step", "rmse_" + o.compare[0], "rmse_" + o.compare[1], "difference"});
    const auto d = rmse_difference(rmse[0], rmse[1]);
    double worst = 0.0;
    for (std::size_t k = 0; k < d.size(); ++k) {
      write_csv_row(csv, {std::to_string(k), num(rmse[0].series[k]), num(rmse[1].series[k]), num(d[k])});
      worst = std::max(worst, std::abs(d[k]));
    }
    j["max_abs_rmse_difference"] = worst;
    j["within_band"] = worst <= 0.5;
  } else {
    write_csv_row(csv, {"step", "rmse_" + o.compare[0]});
    for (std::size_t k = 0; k < rmse[0].series.size(); ++k)
      write_csv_row(csv, {std::to_string(k), num(rmse[0].series[k])});
  }
  save_json(o.dir / "simulate.json", j);
  return j;
}

json cmd_bench(const BenchOptions& o) {
  if (o.repetitions < 1) throw Error(ErrorCode::invalid_argument, "bench: --repetitions must be >= 1");
  if (o.workers < 1) throw Error(ErrorCode::invalid_argument, "bench: --workers must be >= 1");
  const auto c = load_problem(o.dir);
  const auto mpc = reference_step(make_model(c, c.cutoff.has_value()), c);
  const auto kkt = assemble_kkt(mpc.qp, c.admm);
  const auto& f = kkt.factor;
  const auto s = build_schedule(f, o.workers);
  WorkerPool pool(o.workers);
  const auto values = compile_values<double>(s);
  std::vector<double> rhs(f.size());
  for (index_t i = 0; i < f.size(); ++i) rhs[i] = std::sin(0.37 * i + 1.0);

  auto time_it = [&](auto&& body) {
    std::vector<double> us;
    for (int r = 0; r < o.repetitions; ++r) {
      const auto t0 = clock_type::now();
      body();
      us.push_back(seconds_since(t0) * 1e6);
    }
    const auto b = summarize(us);
    return json{{"samples", b.samples}, {"min_us", b.min},       {"median_us", b.median},
                {"mean_us", b.mean},    {"max_us", b.max},       {"stdev_us", b.stdev}};
  };

  json j{{"command", "bench"}, {"workers", o.workers}, {"repetitions", o.repetitions}, {"n", f.size()},
         {"nnz_l", f.L.nnz()}};
  std::vector<double> x;
  j["sptrsv_sequential"] = time_it([&] {
    x = rhs;
    sptrsv_fe_inplace<double>(f.L, x);
    diag_scale_inplace<double>(f.dinv, x);
    sptrsv_bs_inplace<double>(f.L, x);
  });
  j["sptrsv_parallel"] = time_it([&] {
    x = rhs;
    execute<double>(s, values, x, pool);
  });
  AdmmSettings st = c.admm;
  st.record_trace = false;
  AdmmSolver<double> ref(mpc.qp, st), par(mpc.qp, st);
  par.set_backend(std::make_shared<ScheduledSolver<double>>(s));
  j["admm_reference"] = time_it([&] {
    ref.clear_warm_start();
    (void)ref.solve();
  });
  j["admm_parallel"] = time_it([&] {
    par.clear_warm_start();
    (void)par.solve();
  });
  j["schedule"] = schedule_summary(s, f.L, c.cost);
  save_json(o.dir / "bench.json", j);
  return j;
}

json cmd_report(const ReportOptions& o) {
  const auto c = load_problem(o.dir);
  const std::string kind = to_string(o.kind);
  std::ofstream csv(o.dir / ("report_" + kind + ".csv"));
  if (!csv) throw Error(ErrorCode::io, "cannot write report_" + kind + ".csv");
  json j{{"command", "report"}, {"kind", kind}};

  switch (o.kind) {
    case ReportKind::size_vs_grid: {
      const double cutoff = c.cutoff.value_or(0.005);
      const auto rows = size_vs_grid(c, o.grids, cutoff);
      write_csv_row(csv, {"grid", "n_pe", "vanilla_nnz", "pruned_nnz", "ratio"});
      std::vector<double> npe, van, pru;
      json r = json::array();
      for (const auto& row : rows) {
        const double ratio = static_cast<double>(row.pruned_nnz) / row.vanilla_nnz;
        write_csv_row(csv, {std::to_string(row.grid) + "x" + std::to_string(row.grid), std::to_string(row.n_pe),
                            std::to_string(row.vanilla_nnz), std::to_string(row.pruned_nnz), num(ratio)});
        r.push_back({{"grid", row.grid}, {"n_pe", row.n_pe}, {"vanilla_nnz", row.vanilla_nnz},
                     {"pruned_nnz", row.pruned_nnz}, {"ratio", ratio}});
        npe.push_back(static_cast<double>(row.n_pe));
        van.push_back(static_cast<double>(row.vanilla_nnz));
        pru.push_back(static_cast<double>(row.pruned_nnz));
      }
      j["cutoff"] = cutoff;
      j["rows"] = r;
      if (rows.size() >= 2) {
        j["vanilla_exponent"] = fit_exponent(npe, van);
        j["pruned_exponent"] = fit_exponent(npe, pru);
      }
      break;
    }
    case ReportKind::residuals: {
      const auto mpc = reference_step(make_model(c, c.cutoff.has_value()), c);
      write_csv_row(csv, {"precision", "iteration", "r_prim", "r_dual"});
      AdmmSettings st = c.admm;
      st.termination = TerminationMode::fixed_iterations;
      st.max_iter = 64;
      st.record_trace = true;
      for (auto p : {Precision::fp64, Precision::fp32, Precision::fp16emu}) {
        st.storage = p == Precision::fp16emu ? StoragePrecision::half : StoragePrecision::native;
        const auto trace = p == Precision::fp64 ? run_solve<double>(mpc.qp, st, Backend::reference, 1).result.trace
                                                : run_solve<float>(mpc.qp, st, Backend::reference, 1).result.trace;
        json first = nullptr;
        for (const auto& t : trace) {
          write_csv_row(csv, {to_string(p), std::to_string(t.iteration), num(t.r_prim), num(t.r_dual)});
          if (first.is_null() && t.r_prim <= st.eps_prim && t.r_dual <= st.eps_dual) first = t.iteration;
        }
        const bool finite = !trace.empty() && std::isfinite(trace.back().r_prim) && std::isfinite(trace.back().r_dual);
        j["precisions"][to_string(p)] = {{"first_iteration_below_eps", first},
                                         {"final_r_prim", trace.empty() ? 0.0 : trace.back().r_prim},
                                         {"final_r_dual", trace.empty() ? 0.0 : trace.back().r_dual},
                                         {"finite", finite}};
      }
      j["eps"] = st.eps_prim;
      break;
    }
    case ReportKind::sync_counts: {
      const auto kkt = assemble_kkt(build_mpc_qp(make_model(c, c.cutoff.has_value()), c.power).qp, c.admm);
      write_csv_row(csv, {"workers", "baseline", "sync_count", "shard_count", "sl", "alap_shard_count",
                          "static_shard_count"});
      json rows = json::array();
      for (int w = 1; w <= o.workers; ++w)
        for (auto k : {ScheduleKind::naive_column, ScheduleKind::naive_level, ScheduleKind::parspl}) {
          HyptOptions h;
          h.kind = k;
          const auto s = build_schedule(kkt.factor, w, h);
          const auto& m = s.metrics;
          write_csv_row(csv, {std::to_string(w), baseline_name(k), std::to_string(m.sync_count),
                              std::to_string(m.shard_count), num(m.sl), std::to_string(m.alap_shard_count),
                              std::to_string(m.static_shard_count)});
          rows.push_back({{"workers", w}, {"baseline", baseline_name(k)}, {"sync_count", m.sync_count},
                          {"shard_count", m.shard_count}, {"sl", m.sl}});
        }
      j["nnz_l"] = kkt.factor.L.nnz();
      j["rows"] = rows;
      break;
    }
    case ReportKind::speedup: {
      const auto kkt = assemble_kkt(build_mpc_qp(make_model(c, c.cutoff.has_value()), c.power).qp, c.admm);
      const auto& f = kkt.factor;
      auto streamed = c.cost, plain = c.cost;
      streamed.streaming_enabled = true;
      plain.streaming_enabled = false;
      const double seq = sequential_cost(f.L, c.cost);
      write_csv_row(csv, {"workers", "modeled_cycles_streamed", "modeled_cycles_plain", "utilization_streamed",
                          "modeled_speedup", "wall_median_us"});
      json rows = json::array();
      std::vector<double> rhs(f.size(), 1.0);
      for (int w = 1; w <= o.workers; ++w) {
        const auto s = build_schedule(f, w);
        const auto cs = model_cost(s, streamed);
        const auto cp = model_cost(s, plain);
        WorkerPool pool(w);
        const auto values = compile_values<double>(s);
        std::vector<double> us;
        for (int r = 0; r < o.repetitions; ++r) {
          auto x = rhs;
          const auto t0 = clock_type::now();
          execute<double>(s, values, x, pool);
          us.push_back(seconds_since(t0) * 1e6);
        }
        const double med = summarize(us).median;
        write_csv_row(csv, {std::to_string(w), num(cs.modeled_cycles), num(cp.modeled_cycles),
                            num(cs.modeled_utilization), num(seq / cs.modeled_cycles), num(med)});
        rows.push_back({{"workers", w}, {"modeled_cycles_streamed", cs.modeled_cycles},
                        {"modeled_cycles_plain", cp.modeled_cycles}, {"modeled_speedup", seq / cs.modeled_cycles},
                        {"wall_median_us", med}});
      }
      j["sequential_cycles"] = seq;
      j["hardware_threads"] = std::thread::hardware_concurrency();
      j["rows"] = rows;
      break;
    }
    case ReportKind::memory: {
      const auto qp = build_mpc_qp(make_model(c, c.cutoff.has_value()), c.power).qp;
      const auto kkt = assemble_kkt(qp, c.admm);
      const auto s = build_schedule(kkt.factor, o.workers);
      const auto qp_bytes = packed_size(qp, 0);
      const auto sched_bytes = packed_size(s, PackedOptions{});
      const auto tri_bytes = packed_size(s, PackedOptions{0, true});
      std::ostringstream text;
      write_schedule(text, s);
      const double total = static_cast<double>(qp_bytes + sched_bytes);
      write_csv_row(csv, {"artifact", "bytes"});
      write_csv_row(csv, {"qp_packed", std::to_string(qp_bytes)});
      write_csv_row(csv, {"schedule_packed", std::to_string(sched_bytes)});
      write_csv_row(csv, {"schedule_packed_triangles", std::to_string(tri_bytes)});
      write_csv_row(csv, {"schedule_text", std::to_string(text.str().size())});
      write_csv_row(csv, {"total_packed", num(total)});
      j["workers"] = o.workers;
      j["qp_packed_bytes"] = qp_bytes;
      j["schedule_packed_bytes"] = sched_bytes;
      j["schedule_packed_triangle_bytes"] = tri_bytes;
      j["schedule_text_bytes"] = text.str().size();
      j["total_packed_bytes"] = total;
      j["total_packed_kib"] = total / 1024.0;
      j["bound_bytes"] = 1 << 20;
      j["within_bound"] = total <= (1 << 20);
      j["reference_kib"] = 550;
      break;
    }
  }
  save_json(o.dir / ("report_" + kind + ".json"), j);
  return j;
}

}  // namespace parspl::cli
