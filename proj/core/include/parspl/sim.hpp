#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "parspl/admm.hpp"
#include "parspl/mpc.hpp"
#include "parspl/power.hpp"
#include "parspl/thermal.hpp"

namespace parspl {

/// Piecewise-constant inputs from `time` until the next event.
struct ScenarioEvent {
  double time = 0.0;
  double budget_total = std::numeric_limits<double>::infinity();
  std::vector<double> domain_budgets;  // one per domain
  std::vector<double> target_freq;     // Hz, one per PE
  std::vector<int> workload;           // class id, one per PE
};

struct Scenario {
  double duration = 2.0;
  double controller_period = 1e-3;
  int plant_substeps = 10;
  double noise_sigma = 0.0;  // degC, additive Gaussian on measurements
  std::uint64_t seed = 1;
  std::vector<ScenarioEvent> timeline;  // sorted, first event at t = 0

  void validate(index_t n_pe, index_t n_domains) const;
  [[nodiscard]] const ScenarioEvent& at(double t) const;
  [[nodiscard]] int steps() const;

  /// Shipped 2 s scenario: workload phases every 0.25 s and a total budget
  /// that drops from 90% to 55% of the peak target power at t = 1 s.
  static Scenario default_scenario(const GridSpec& grid, const PowerModelParams& pm);
};

/// CSV columns: time, budget_total, budget_d<j>..., f_<i>..., w_<i>...
/// Budgets may be "inf".
void write_scenario_csv(std::ostream& out, const Scenario& s);
std::vector<ScenarioEvent> read_scenario_csv(std::istream& in, index_t n_pe, index_t n_domains);

/// Continuous plant dx/dt = a_t x + b_t p(x) in deviation coordinates.
class ThermalPlant {
 public:
  explicit ThermalPlant(const ThermalPlantModel& model);

  using PowerFn = std::function<Eigen::VectorXd(const Eigen::VectorXd& x)>;

  /// Classic RK4 with `substeps` equal steps over dt; power is re-evaluated
  /// at every stage from the stage state.
  [[nodiscard]] Eigen::VectorXd step(const Eigen::VectorXd& x, const PowerFn& power, double dt, int substeps = 1) const;
  [[nodiscard]] Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& power, double dt,
                                     int substeps = 1) const;

  [[nodiscard]] const ThermalPlantModel& model() const noexcept { return model_; }

 private:
  ThermalPlantModel model_;
  Eigen::SparseMatrix<double> a_, b_;
};

struct RunTrace {
  std::vector<double> time;
  std::vector<Eigen::VectorXd> plant;           // true state at step start, absolute degC
  std::vector<Eigen::VectorXd> measured;        // what the controller saw
  std::vector<Eigen::VectorXd> predicted_next;  // x_1 of the solve, absolute
  std::vector<Eigen::VectorXd> target_power;
  std::vector<Eigen::VectorXd> dispatched;  // u_0
  std::vector<std::vector<OperatingPoint>> applied;
  std::vector<int> iterations;
  std::vector<SolveStatus> status;
  std::vector<double> r_prim;
  std::vector<double> budget_total;
  std::vector<std::vector<double>> domain_budgets;
  std::vector<bool> held;  // previous operating point kept after a failed solve

  [[nodiscard]] int steps() const noexcept { return static_cast<int>(time.size()); }
  [[nodiscard]] double mean_iterations() const;
};

using BackendFactory = std::function<std::shared_ptr<TriangularSolver<double>>(const LdlFactor<double>&)>;

struct ClosedLoopOptions {
  AdmmSettings settings;
  LeakageMode controller_leakage = LeakageMode::frozen;
  BackendFactory backend;  // empty: sequential reference kernels
};

/// The plant always integrates the continuous model of `plant_model`; the
/// controller uses `mpc` (built from a possibly pruned discrete model).
RunTrace run_closed_loop(const ThermalPlantModel& plant_model, MpcQp mpc, const PowerModelParams& pm,
                         const Scenario& scenario, const ClosedLoopOptions& opt = {});

enum class RmseStates { all, silicon };

struct RmseReport {
  std::vector<double> series;  // entry k compares the prediction of step k with the measurement of step k+1
  double mean = 0.0;
  double max = 0.0;
};

RmseReport rmse_report(const RunTrace& t, RmseStates states = RmseStates::all);

/// Elementwise a - b over the common length.
std::vector<double> rmse_difference(const RmseReport& a, const RmseReport& b);

struct BudgetAudit {
  int checked_steps = 0;
  int violations = 0;
  double worst_excess = -std::numeric_limits<double>::infinity();  // max over steps of sum(u_0) - budget
};

/// Converged steps only; a step violates when a total or domain sum exceeds
/// its budget by more than tol.
BudgetAudit audit_budgets(const RunTrace& t, const GridSpec& grid, double tol);

/// Highest plant silicon temperature over the run, degC.
double max_silicon_temperature(const RunTrace& t, index_t n_pe);

void write_run_trace_csv(std::ostream& out, const RunTrace& t, index_t n_pe);

struct CutoffSelection {
  double cutoff = 0.0;
  double deviation = 0.0;  // max |RMSE_pruned - RMSE_vanilla|
  std::vector<double> candidates;
  std::vector<double> deviations;  // per candidate
  std::vector<index_t> problem_nnz;  // per candidate
};

/// Largest candidate whose RMSE deviation from the unpruned controller stays
/// within band over the whole run.
CutoffSelection dmp_select_cutoff(const ThermalPlantModel& discrete_model, const PowerModelParams& pm,
                                  const Scenario& scenario, std::vector<double> candidates,
                                  const ClosedLoopOptions& opt = {}, double band = 0.5);

}  // namespace parspl
