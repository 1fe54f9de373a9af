#include "parspl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace parspl {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("scenario csv line " + std::to_string(line) + ": bad number '" + s + "'");
  }
}

std::vector<double> domain_sums(const GridSpec& grid, const Eigen::VectorXd& p) {
  std::vector<double> out;
  for (const auto& d : grid.domains) {
    double s = 0.0;
    for (index_t pe : d) s += p[pe];
    out.push_back(s);
  }
  return out;
}

}  // namespace

void Scenario::validate(index_t n_pe, index_t n_domains) const {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::invalid_argument, "scenario: " + m); };
  if (!(duration > 0.0)) bad("duration must be positive");
  if (!(controller_period > 0.0) || controller_period > duration) bad("controller period out of range");
  if (plant_substeps < 1) bad("plant_substeps must be >= 1");
  if (!(noise_sigma >= 0.0)) bad("noise_sigma must be >= 0");
  if (timeline.empty() || timeline.front().time != 0.0) bad("timeline must start at t = 0");
  for (std::size_t k = 0; k < timeline.size(); ++k) {
    const auto& e = timeline[k];
    if (k > 0 && !(e.time > timeline[k - 1].time)) bad("event times must increase");
    if (static_cast<index_t>(e.target_freq.size()) != n_pe || static_cast<index_t>(e.workload.size()) != n_pe)
      throw DimensionError("scenario: event at t=" + std::to_string(e.time) + " has wrong PE count");
    if (static_cast<index_t>(e.domain_budgets.size()) != n_domains)
      throw DimensionError("scenario: event at t=" + std::to_string(e.time) + " has wrong domain count");
    if (std::isnan(e.budget_total) || e.budget_total < 0.0) bad("negative budget");
    for (double b : e.domain_budgets)
      if (std::isnan(b) || b < 0.0) bad("negative domain budget");
    for (double f : e.target_freq)
      if (!(f >= 0.0) || !std::isfinite(f)) bad("target frequency must be finite and >= 0");
    for (int w : e.workload)
      if (w < 0) bad("negative workload class");
  }
}

const ScenarioEvent& Scenario::at(double t) const {
  if (timeline.empty()) throw Error(ErrorCode::invalid_argument, "scenario: empty timeline");
  auto it = std::upper_bound(timeline.begin(), timeline.end(), t,
                             [](double v, const ScenarioEvent& e) { return v < e.time; });
  return it == timeline.begin() ? timeline.front() : *(it - 1);
}

int Scenario::steps() const { return static_cast<int>(std::llround(duration / controller_period)); }

Scenario Scenario::default_scenario(const GridSpec& grid, const PowerModelParams& pm) {
  const index_t n = grid.n_pe();
  const index_t nd = static_cast<index_t>(grid.domains.size());
  const double f_levels[] = {0.4e9, 0.8e9, 1.2e9, 1.6e9, 2.0e9, 2.4e9};
  const int n_classes = static_cast<int>(pm.ceff.size());
  Scenario s;
  constexpr int phases = 8;
  double peak = 0.0;
  for (int ph = 0; ph < phases; ++ph) {
    ScenarioEvent e;
    e.time = 0.25 * ph;
    double total = 0.0;
    for (index_t pe = 0; pe < n; ++pe) {
      const auto i = static_cast<int>(pe);
      const double f = f_levels[(5 * i + 3 * ph + i * ph) % 6];
      const int w = (i + ph) % n_classes;
      e.target_freq.push_back(f);
      e.workload.push_back(w);
      total += power_forward(pm, voltage_for_frequency(pm, f), f, pm.t_max, w, LeakageMode::frozen);
    }
    peak = std::max(peak, total);
    s.timeline.push_back(std::move(e));
  }
  for (auto& e : s.timeline) {
    e.budget_total = (e.time < 1.0 ? 0.90 : 0.55) * peak;
    for (index_t j = 0; j < nd; ++j)
      e.domain_budgets.push_back(1.2 * e.budget_total * static_cast<double>(grid.domains[j].size()) / n);
  }
  s.controller_period = grid.ts;
  return s;
}

void write_scenario_csv(std::ostream& out, const Scenario& s) {
  if (s.timeline.empty()) throw Error(ErrorCode::invalid_argument, "scenario: empty timeline");
  const auto& first = s.timeline.front();
  out << "time,budget_total";
  for (std::size_t j = 0; j < first.domain_budgets.size(); ++j) out << ",budget_d" << j;
  for (std::size_t i = 0; i < first.target_freq.size(); ++i) out << ",f_" << i;
  for (std::size_t i = 0; i < first.workload.size(); ++i) out << ",w_" << i;
  out << '\n' << std::setprecision(17);
  for (const auto& e : s.timeline) {
    out << e.time << ',' << e.budget_total;
    for (double b : e.domain_budgets) out << ',' << b;
    for (double f : e.target_freq) out << ',' << f;
    for (int w : e.workload) out << ',' << w;
    out << '\n';
  }
}

std::vector<ScenarioEvent> read_scenario_csv(std::istream& in, index_t n_pe, index_t n_domains) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("scenario csv: empty input");
  const auto header = split_csv(line);
  const std::size_t width = 2 + n_domains + 2 * n_pe;
  if (header.size() != width || header[0] != "time" || header[1] != "budget_total")
    throw FormatError("scenario csv: header has " + std::to_string(header.size()) + " columns, expected " +
                      std::to_string(width));
  std::vector<ScenarioEvent> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != width)
      throw FormatError("scenario csv line " + std::to_string(lineno) + ": expected " + std::to_string(width) +
                        " columns");
    ScenarioEvent e;
    std::size_t c = 0;
    e.time = parse_double(cells[c++], lineno);
    e.budget_total = parse_double(cells[c++], lineno);
    for (index_t j = 0; j < n_domains; ++j) e.domain_budgets.push_back(parse_double(cells[c++], lineno));
    for (index_t i = 0; i < n_pe; ++i) e.target_freq.push_back(parse_double(cells[c++], lineno));
    for (index_t i = 0; i < n_pe; ++i) {
      const double w = parse_double(cells[c++], lineno);
      if (w != std::floor(w)) throw FormatError("scenario csv line " + std::to_string(lineno) + ": workload not integral");
      e.workload.push_back(static_cast<int>(w));
    }
    out.push_back(std::move(e));
  }
  return out;
}

ThermalPlant::ThermalPlant(const ThermalPlantModel& model)
    : model_(model), a_(model.a_t.sparseView()), b_(model.b_t.sparseView()) {
  if (model.a_t.rows() == 0 || model.a_t.rows() != model.a_t.cols() || model.b_t.rows() != model.a_t.rows())
    throw DimensionError("plant: continuous model missing or malformed");
}

Eigen::VectorXd ThermalPlant::step(const Eigen::VectorXd& x0, const PowerFn& power, double dt, int substeps) const {
  if (x0.size() != a_.rows()) throw DimensionError("plant: state size mismatch");
  if (substeps < 1 || !(dt > 0.0)) throw Error(ErrorCode::invalid_argument, "plant: bad step");
  const double h = dt / substeps;
  auto f = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const Eigen::VectorXd p = power(x);
    if (p.size() != b_.cols()) throw DimensionError("plant: power vector size mismatch");
    return a_ * x + b_ * p;
  };
  Eigen::VectorXd x = x0;
  for (int s = 0; s < substeps; ++s) {
    const Eigen::VectorXd k1 = f(x);
    const Eigen::VectorXd k2 = f(x + 0.5 * h * k1);
    const Eigen::VectorXd k3 = f(x + 0.5 * h * k2);
    const Eigen::VectorXd k4 = f(x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

Eigen::VectorXd ThermalPlant::step(const Eigen::VectorXd& x, const Eigen::VectorXd& power, double dt,
                                   int substeps) const {
  return step(x, [&](const Eigen::VectorXd&) { return power; }, dt, substeps);
}

double RunTrace::mean_iterations() const {
  if (iterations.empty()) return 0.0;
  double s = 0.0;
  for (int it : iterations) s += it;
  return s / static_cast<double>(iterations.size());
}

RunTrace run_closed_loop(const ThermalPlantModel& plant_model, MpcQp mpc, const PowerModelParams& pm,
                         const Scenario& scenario, const ClosedLoopOptions& opt) {
  pm.validate();
  const ThermalPlant plant(plant_model);
  const auto& grid = mpc.grid;
  const index_t n = grid.n_pe();
  const index_t nx = grid.n_states();
  if (plant_model.n_pe() != n || plant_model.n_states() != nx)
    throw DimensionError("closed loop: plant and controller grids differ");
  scenario.validate(n, static_cast<index_t>(grid.domains.size()));
  if (std::abs(scenario.controller_period - grid.ts) > 1e-12 * grid.ts)
    throw Error(ErrorCode::invalid_argument, "closed loop: controller period differs from the model sample time");

  AdmmSolver<double> solver(mpc.qp, opt.settings);
  if (opt.backend) solver.set_backend(opt.backend(solver.kkt().factor));

  const double t_amb = plant_model.k.t_amb;
  const double dt = scenario.controller_period;
  const auto& L = mpc.layout;
  std::mt19937_64 rng(scenario.seed);
  std::normal_distribution<double> noise(0.0, scenario.noise_sigma > 0.0 ? scenario.noise_sigma : 1.0);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(nx);  // plant deviation from ambient
  std::vector<OperatingPoint> op(n, OperatingPoint{pm.v_min(), pm.f_min});
  std::vector<int> workload(n, 0);

  RunTrace tr;
  const int steps = scenario.steps();
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    const auto& ev = scenario.at(t);
    workload = ev.workload;

    Eigen::VectorXd meas = x.array() + t_amb;
    if (scenario.noise_sigma > 0.0)
      for (index_t i = 0; i < nx; ++i) meas[i] += noise(rng);

    Eigen::VectorXd p_star(n);
    for (index_t pe = 0; pe < n; ++pe) {
      const double f = ev.target_freq[pe];
      p_star[pe] = power_forward(pm, voltage_for_frequency(pm, f), f, meas[si_state(pe)], ev.workload[pe],
                                 opt.controller_leakage);
    }

    update_mpc_step(mpc, std::span<const double>(meas.data(), nx), std::span<const double>(p_star.data(), n),
                    ev.budget_total, ev.domain_budgets);
    solver.update_q(mpc.qp.q);
    solver.update_bounds(mpc.qp.l, mpc.qp.u);
    const auto res = solver.solve();

    Eigen::VectorXd u0(n), pred(nx);
    for (index_t pe = 0; pe < n; ++pe) u0[pe] = res.x[L.u_col(0, pe)];
    for (index_t i = 0; i < nx; ++i) pred[i] = res.x[L.x_col(1, i)] + t_amb;

    const bool held = res.status == SolveStatus::diverged || !u0.allFinite();
    if (held) {
      solver.clear_warm_start();
    } else {
      // Per-PE voltage first, then the highest request sets each domain's rail.
      // The optimum never exceeds max(p_star, p_min); anything above is solver residual.
      Eigen::VectorXd req(n);
      for (index_t pe = 0; pe < n; ++pe) req[pe] = std::min(u0[pe], std::max(p_star[pe], pm.p_min));
      std::vector<double> v(n);
      for (index_t pe = 0; pe < n; ++pe)
        v[pe] = power_inverse(pm, req[pe], meas[si_state(pe)], workload[pe], 0.0, opt.controller_leakage).v;
      for (const auto& d : grid.domains) {
        double vd = 0.0;
        for (index_t pe : d) vd = std::max(vd, v[pe]);
        for (index_t pe : d) v[pe] = vd;
      }
      for (index_t pe = 0; pe < n; ++pe) {
        const auto r = power_inverse(pm, req[pe], meas[si_state(pe)], workload[pe], v[pe], opt.controller_leakage);
        op[pe] = {r.v, r.f};
      }
    }

    tr.time.push_back(t);
    tr.plant.push_back(x.array() + t_amb);
    tr.measured.push_back(meas);
    tr.predicted_next.push_back(pred);
    tr.target_power.push_back(p_star);
    tr.dispatched.push_back(u0);
    tr.applied.push_back(op);
    tr.iterations.push_back(res.iterations);
    tr.status.push_back(res.status);
    tr.r_prim.push_back(res.r_prim);
    tr.budget_total.push_back(ev.budget_total);
    tr.domain_budgets.push_back(ev.domain_budgets);
    tr.held.push_back(held);

    x = plant.step(
        x,
        [&](const Eigen::VectorXd& xs) {
          Eigen::VectorXd p(n);
          for (index_t pe = 0; pe < n; ++pe)
            p[pe] = power_forward(pm, op[pe].v, op[pe].f, xs[si_state(pe)] + t_amb, workload[pe],
                                  LeakageMode::nonlinear);
          return p;
        },
        dt, scenario.plant_substeps);
  }
  return tr;
}

RmseReport rmse_report(const RunTrace& t, RmseStates states) {
  RmseReport r;
  for (int k = 0; k + 1 < t.steps(); ++k) {
    const auto& pred = t.predicted_next[k];
    const auto& meas = t.measured[k + 1];
    double s = 0.0;
    Eigen::Index cnt = 0;
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
      // Silicon states sit at even indices below the sink.
      if (states == RmseStates::silicon && (i % 2 != 0 || i == pred.size() - 1)) continue;
      const double e = pred[i] - meas[i];
      s += e * e;
      ++cnt;
    }
    r.series.push_back(cnt ? std::sqrt(s / static_cast<double>(cnt)) : 0.0);
  }
  if (!r.series.empty()) {
    double s = 0.0;
    for (double v : r.series) s += v;
    r.mean = s / static_cast<double>(r.series.size());
    r.max = *std::max_element(r.series.begin(), r.series.end());
  }
  return r;
}

std::vector<double> rmse_difference(const RmseReport& a, const RmseReport& b) {
  const std::size_t n = std::min(a.series.size(), b.series.size());
  std::vector<double> d(n);
  for (std::size_t k = 0; k < n; ++k) d[k] = a.series[k] - b.series[k];
  return d;
}

BudgetAudit audit_budgets(const RunTrace& t, const GridSpec& grid, double tol) {
  BudgetAudit a;
  for (int k = 0; k < t.steps(); ++k) {
    if (t.status[k] != SolveStatus::solved) continue;
    ++a.checked_steps;
    const auto& u = t.dispatched[k];
    double worst = u.sum() - t.budget_total[k];
    const auto sums = domain_sums(grid, u);
    for (std::size_t j = 0; j < sums.size(); ++j) worst = std::max(worst, sums[j] - t.domain_budgets[k][j]);
    a.worst_excess = std::max(a.worst_excess, worst);
    if (worst > tol) ++a.violations;
  }
  return a;
}

double max_silicon_temperature(const RunTrace& t, index_t n_pe) {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& x : t.plant)
    for (index_t pe = 0; pe < n_pe; ++pe) m = std::max(m, x[si_state(pe)]);
  return m;
}

void write_run_trace_csv(std::ostream& out, const RunTrace& t, index_t n_pe) {
  out << "step,time,status,iterations,r_prim,held,budget_total,sum_dispatched";
  for (index_t i = 0; i < n_pe; ++i) out << ",t_si_" << i;
  for (index_t i = 0; i < n_pe; ++i) out << ",pred_si_" << i;
  for (index_t i = 0; i < n_pe; ++i) out << ",p_star_" << i;
  for (index_t i = 0; i < n_pe; ++i) out << ",u0_" << i;
  for (index_t i = 0; i < n_pe; ++i) out << ",v_" << i;
  for (index_t i = 0; i < n_pe; ++i) out << ",f_" << i;
  out << '\n' << std::setprecision(10);
  for (int k = 0; k < t.steps(); ++k) {
    out << k << ',' << t.time[k] << ',' << to_string(t.status[k]) << ',' << t.iterations[k] << ',' << t.r_prim[k]
        << ',' << (t.held[k] ? 1 : 0) << ',' << t.budget_total[k] << ',' << t.dispatched[k].sum();
    for (index_t i = 0; i < n_pe; ++i) out << ',' << t.plant[k][si_state(i)];
    for (index_t i = 0; i < n_pe; ++i) out << ',' << t.predicted_next[k][si_state(i)];
    for (index_t i = 0; i < n_pe; ++i) out << ',' << t.target_power[k][i];
    for (index_t i = 0; i < n_pe; ++i) out << ',' << t.dispatched[k][i];
    for (index_t i = 0; i < n_pe; ++i) out << ',' << t.applied[k][i].v;
    for (index_t i = 0; i < n_pe; ++i) out << ',' << t.applied[k][i].f;
    out << '\n';
  }
}

CutoffSelection dmp_select_cutoff(const ThermalPlantModel& discrete_model, const PowerModelParams& pm,
                                  const Scenario& scenario, std::vector<double> candidates,
                                  const ClosedLoopOptions& opt, double band) {
  if (candidates.empty()) throw Error(ErrorCode::invalid_argument, "dmp: no cutoff candidates");
  for (double c : candidates)
    if (!(c >= 0.0)) throw Error(ErrorCode::invalid_argument, "dmp: cutoff must be >= 0");
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  const auto vanilla = rmse_report(run_closed_loop(discrete_model, build_mpc_qp(discrete_model, pm), pm, scenario, opt));
  CutoffSelection sel;
  sel.candidates = candidates;
  int best = -1, best_any = -1;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto pruned = dmp_prune_model(discrete_model, candidates[c]);
    auto mpc = build_mpc_qp(pruned, pm);
    sel.problem_nnz.push_back(problem_nnz(mpc.qp));
    const auto r = rmse_report(run_closed_loop(discrete_model, std::move(mpc), pm, scenario, opt));
    double dev = 0.0;
    for (double d : rmse_difference(r, vanilla)) dev = std::max(dev, std::abs(d));
    sel.deviations.push_back(dev);
    if (dev <= band) best = static_cast<int>(c);
    if (best_any < 0 || dev < sel.deviations[best_any]) best_any = static_cast<int>(c);
  }
  if (best < 0) {
    std::ostringstream m;
    m << "dmp: no cutoff keeps the RMSE deviation within " << band << " degC; best candidate " << candidates[best_any]
      << " deviates by " << sel.deviations[best_any] << " degC";
    throw Error(ErrorCode::no_candidate, m.str());
  }
  sel.cutoff = candidates[best];
  sel.deviation = sel.deviations[best];
  return sel;
}

}  // namespace parspl
