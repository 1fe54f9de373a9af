#include <benchmark/benchmark.h>

#include <cmath>
#include <map>
#include <memory>

#include "parspl/executor.hpp"
#include "parspl/mpc.hpp"
#include "parspl/sim.hpp"

using namespace parspl;

namespace {

struct Instance {
  GridSpec grid;
  ThermalPlantModel model;
  MpcQp mpc;
  KktSystem<double> kkt;
  std::vector<double> rhs;
};

// Pruned H2 problem per square grid size, built once per process.
const Instance& instance(index_t k) {
  static std::map<index_t, std::unique_ptr<Instance>> cache;
  auto& slot = cache[k];
  if (!slot) {
    slot = std::make_unique<Instance>();
    slot->grid.nw = slot->grid.nh = k;
    slot->grid.hp = 2;
    slot->grid.domains = GridSpec::row_domains(k, k);
    slot->model = dmp_prune_model(build_discrete_model(slot->grid, ThermalConstants{}), 0.005);
    slot->mpc = build_mpc_qp(slot->model, PowerModelParams{});
    slot->kkt = assemble_kkt(slot->mpc.qp, AdmmSettings{});
    slot->rhs.resize(slot->kkt.factor.size());
    for (std::size_t i = 0; i < slot->rhs.size(); ++i) slot->rhs[i] = std::sin(0.37 * i + 1.0);
  }
  return *slot;
}

void BM_LdlFactor(benchmark::State& st) {
  const auto& in = instance(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(assemble_kkt(in.mpc.qp, AdmmSettings{}));
}
BENCHMARK(BM_LdlFactor)->Arg(3)->Arg(6)->Arg(9)->Arg(12)->Unit(benchmark::kMicrosecond);

void BM_SptrsvSequential(benchmark::State& st) {
  const auto& in = instance(st.range(0));
  const auto& f = in.kkt.factor;
  std::vector<double> x;
  for (auto _ : st) {
    x = in.rhs;
    sptrsv_fe_inplace<double>(f.L, x);
    diag_scale_inplace<double>(f.dinv, x);
    sptrsv_bs_inplace<double>(f.L, x);
    benchmark::DoNotOptimize(x.data());
  }
  st.counters["nnz_l"] = static_cast<double>(f.L.nnz());
}
BENCHMARK(BM_SptrsvSequential)->Arg(3)->Arg(6)->Arg(9)->Arg(12)->Unit(benchmark::kMicrosecond);

void BM_SptrsvScheduled(benchmark::State& st) {
  const auto& in = instance(st.range(0));
  const int w = static_cast<int>(st.range(1));
  const auto s = build_schedule(in.kkt.factor, w);
  const auto values = compile_values<double>(s);
  WorkerPool pool(w);
  std::vector<double> x;
  for (auto _ : st) {
    x = in.rhs;
    execute<double>(s, values, x, pool);
    benchmark::DoNotOptimize(x.data());
  }
  st.counters["barriers"] = static_cast<double>(s.metrics.sync_count);
  st.counters["modeled_cycles"] = model_cost(s, CostModelParams{}).modeled_cycles;
}
BENCHMARK(BM_SptrsvScheduled)->ArgsProduct({{3, 12}, {1, 2, 4, 8}})->Unit(benchmark::kMicrosecond)->UseRealTime();

void BM_ScheduleBuild(benchmark::State& st) {
  const auto& in = instance(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(build_schedule(in.kkt.factor, 8));
}
BENCHMARK(BM_ScheduleBuild)->Arg(3)->Arg(6)->Arg(9)->Arg(12)->Unit(benchmark::kMillisecond);

template <typename T>
void BM_AdmmColdSolve(benchmark::State& st) {
  const auto& in = instance(st.range(0));
  AdmmSettings s;
  s.record_trace = false;
  AdmmSolver<T> solver(in.mpc.qp.template cast<T>(), s);
  for (auto _ : st) {
    solver.clear_warm_start();
    benchmark::DoNotOptimize(solver.solve());
  }
}
BENCHMARK(BM_AdmmColdSolve<double>)->Arg(3)->Arg(9)->Arg(12)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_AdmmColdSolve<float>)->Arg(3)->Arg(9)->Arg(12)->Unit(benchmark::kMicrosecond);

void BM_PlantStep(benchmark::State& st) {
  const auto& in = instance(st.range(0));
  const ThermalPlant plant(in.model);
  const Eigen::VectorXd p = Eigen::VectorXd::Constant(in.grid.n_pe(), 1.0);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(in.grid.n_states());
  for (auto _ : st) {
    x = plant.step(x, p, in.grid.ts, 10);
    benchmark::DoNotOptimize(x.data());
  }
}
BENCHMARK(BM_PlantStep)->Arg(3)->Arg(12)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
