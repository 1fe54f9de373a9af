#pragma once

#include <condition_variable>
#include <exception>
#include <functional>
#include <iosfwd>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "parspl/hypt.hpp"

namespace parspl {

/// Fixed set of worker threads. The calling thread acts as worker 0.
class WorkerPool {
 public:
  explicit WorkerPool(int n_workers);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  [[nodiscard]] int size() const noexcept { return n_; }

  /// Runs job(w) for every worker and waits for all of them. The first
  /// exception thrown by a job is rethrown here.
  void run(const std::function<void(int)>& job);

 private:
  void loop(int w, std::stop_token st);

  int n_;
  std::vector<std::jthread> threads_;
  std::mutex m_;
  std::condition_variable_any start_cv_;
  std::condition_variable done_cv_;
  const std::function<void(int)>* job_ = nullptr;
  std::uint64_t generation_ = 0;
  int pending_ = 0;
  std::exception_ptr error_;
};

struct CostModelParams {
  double cycles_per_mac_streamed = 1.0;
  double cycles_per_mac_plain = 3.0;
  double cycles_per_index_load = 1.0;
  double barrier_overhead_cycles = 30.0;
  bool streaming_enabled = true;

  void validate() const;
};

/// Index loads per element when streaming is off.
index_t index_loads(TileKind k) noexcept;

struct CostReport {
  index_t barrier_count = 0;
  std::vector<index_t> per_worker_mac_ops;
  std::vector<index_t> per_worker_load_ops;
  double modeled_cycles = 0.0;
  double modeled_utilization = 0.0;
};

/// Sum over phases of the slowest worker, plus barrier overhead. A shard with
/// reductions has two phases; reduction adds count as MACs.
CostReport model_cost(const Schedule& s, const CostModelParams& p);

/// One core running the sequential kernels: every FE and BS entry costs a
/// plain MAC and one index load, every diagonal entry a plain MAC.
double sequential_cost(const SparseCSC<double>& L, const CostModelParams& p);

struct ExecutionTrace {
  index_t barrier_count = 0;
  std::vector<index_t> per_worker_mac_ops;
  std::vector<index_t> per_worker_load_ops;
  double modeled_cycles = 0.0;
  double modeled_utilization = 0.0;
  double wall_time = 0.0;  // seconds
  std::vector<std::string> audit_findings;
};

void write_trace_csv(std::ostream& out, const ExecutionTrace& t);

struct ExecuteOptions {
  // Record per-index writer/reader stamps and report cross-worker conflicts.
  bool audit = false;
  CostModelParams cost;
  // Called by every worker at the start of every phase; an exception thrown
  // here makes the worker drop out and execute() fail.
  std::function<void(int worker, index_t phase)> on_phase;
};

/// Tile values converted once to the working precision.
template <typename T>
struct CompiledValues {
  std::vector<std::vector<T>> fe, diag, bs;
};

template <typename T>
CompiledValues<T> compile_values(const Schedule& s);

/// Runs the schedule on the pool. x holds the permuted right-hand side on
/// entry and the permuted solution on exit. Workers pass one barrier per
/// phase; reductions combine partials in slot order, so results do not
/// depend on thread timing.
template <typename T>
ExecutionTrace execute(const Schedule& s, const CompiledValues<T>& values, std::span<T> x, WorkerPool& pool,
                       const ExecuteOptions& opt = {});

template <typename T>
ExecutionTrace execute(const Schedule& s, std::span<T> x, WorkerPool& pool, const ExecuteOptions& opt = {}) {
  return execute<T>(s, compile_values<T>(s), x, pool, opt);
}

/// ADMM backend running the triangular stages through a schedule.
template <typename T>
class ScheduledSolver final : public TriangularSolver<T> {
 public:
  ScheduledSolver(Schedule s, ExecuteOptions opt = {});

  void solve_permuted(std::span<T> x) override;

  [[nodiscard]] const Schedule& schedule() const noexcept { return s_; }
  [[nodiscard]] const ExecutionTrace& last_trace() const noexcept { return last_; }
  [[nodiscard]] long solves() const noexcept { return solves_; }

 private:
  Schedule s_;
  CompiledValues<T> values_;
  ExecuteOptions opt_;
  WorkerPool pool_;
  ExecutionTrace last_;
  long solves_ = 0;
};

struct BenchStats {
  int samples = 0;
  double min = 0.0, max = 0.0, mean = 0.0, median = 0.0, stdev = 0.0;
};

BenchStats summarize(std::span<const double> samples);

}  // namespace parspl
