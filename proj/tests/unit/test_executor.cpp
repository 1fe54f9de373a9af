#include <doctest.h>

#include <cstring>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "parspl/admm.hpp"
#include "parspl/executor.hpp"
#include "parspl/mpc.hpp"

using namespace parspl;

namespace {

struct Factor {
  SparseCSC<double> L;
  std::vector<double> dinv;
};

Factor random_factor(index_t n, std::uint32_t seed) {
  std::mt19937 rng(seed);
  Factor f{oracle::random_strict_lower(n, std::min(0.5, 4.0 / n), rng), std::vector<double>(n)};
  std::uniform_real_distribution<double> u(0.5, 2.0);
  for (auto& d : f.dinv) d = u(rng);
  return f;
}

Factor grid_factor(index_t k) {
  GridSpec g;
  g.nw = g.nh = k;
  g.hp = 2;
  g.domains = GridSpec::row_domains(k, k);
  const auto model = dmp_prune_model(build_discrete_model(g, ThermalConstants{}), 0.005);
  auto kkt = assemble_kkt(build_mpc_qp(model, PowerModelParams{}).qp, AdmmSettings{});
  return {kkt.factor.L, kkt.factor.dinv};
}

template <typename T>
std::vector<T> random_rhs(index_t n, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<T> b(n);
  for (auto& v : b) v = static_cast<T>(u(rng));
  return b;
}

template <typename T>
bool bitwise_equal(const std::vector<T>& a, const std::vector<T>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

// One Mapping shard of 8 elements and nothing else.
Schedule mapping_only(int workers) {
  Schedule s;
  s.n = 16;
  s.n_workers = workers;
  Tile t;
  t.kind = TileKind::mapping;
  for (index_t k = 0; k < 8; ++k) t.elements.push_back({8 + k, k, 0.5});
  s.fe_tiles = {t};
  Shard sh;
  sh.tiles = {0};
  partition_intra_shard(sh, s.fe_tiles, workers, true);
  s.fe_shards = {sh};
  s.metrics.sync_count = 1;
  return s;
}

}  // namespace

TEST_CASE("pool runs every worker and propagates errors") {
  WorkerPool pool(4);
  CHECK(pool.size() == 4);
  std::vector<int> hit(4, 0);
  for (int round = 0; round < 50; ++round) pool.run([&](int w) { ++hit[w]; });
  CHECK(hit == std::vector<int>{50, 50, 50, 50});
  CHECK_THROWS_AS(pool.run([](int w) {
    if (w == 2) throw Error(ErrorCode::internal, "boom");
  }),
                  Error);
  pool.run([&](int w) { ++hit[w]; });
  CHECK(hit[3] == 51);
  CHECK_THROWS_AS(WorkerPool(0), Error);
}

TEST_CASE("identity schedule returns the right-hand side") {
  const SparseCSC<double> I(12, 12);
  const std::vector<double> ones(12, 1.0);
  const auto s = build_schedule(I, ones, 3);
  WorkerPool pool(3);
  std::mt19937 rng(1);
  auto b = random_rhs<double>(12, rng);
  auto x = b;
  const auto tr = execute<double>(s, x, pool);
  CHECK(x == b);
  CHECK(tr.barrier_count == s.metrics.sync_count);
}

TEST_CASE("parallel result equals sequential interpretation bit for bit") {
  std::mt19937 rng(2);
  for (int w : {1, 2, 3, 5, 8}) {
    const auto f = random_factor(180, 10 + w);
    HyptOptions opt;
    opt.max_tile = 6;
    const auto s = build_schedule(f.L, f.dinv, w, opt);
    WorkerPool pool(w);
    const auto values32 = compile_values<float>(s);
    for (int trial = 0; trial < 10; ++trial) {
      auto b = random_rhs<double>(180, rng);
      auto ref = b;
      interpret<double>(s, ref);
      auto x = b;
      const auto tr = execute<double>(s, x, pool);
      CHECK(bitwise_equal(x, ref));
      CHECK(tr.barrier_count == s.metrics.sync_count);

      std::vector<float> bf(b.begin(), b.end()), reff = bf;
      interpret<float>(s, reff);
      execute<float>(s, values32, bf, pool);
      CHECK(bitwise_equal(bf, reff));
    }
  }
}

TEST_CASE("executor matches the reference on a generated factor") {
  const auto f = grid_factor(3);
  std::mt19937 rng(3);
  for (int w : {1, 4, 8}) {
    const auto s = build_schedule(f.L, f.dinv, w);
    WorkerPool pool(w);
    const auto values = compile_values<float>(s);
    ExecuteOptions opt;
    opt.audit = true;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const auto b = random_rhs<double>(s.n, rng);
      std::vector<float> x(b.begin(), b.end());
      const auto tr = execute<float>(s, values, x, pool, opt);
      CHECK(tr.audit_findings.empty());
      CHECK(tr.barrier_count == s.metrics.sync_count);
      worst = std::max(worst, chain_relative_error<float>(f.L, f.dinv, b, x));
    }
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("audit reports two writers in one phase") {
  const auto f = random_factor(80, 4);
  auto s = build_schedule(f.L, f.dinv, 2);
  REQUIRE_FALSE(s.fe_shards.empty());
  auto& sh = s.fe_shards.front();
  REQUIRE_FALSE(sh.work[0].empty());
  // Same item twice: worker 1 now races worker 0 on the same outputs.
  sh.work[1].push_back(sh.work[0].front());
  WorkerPool pool(2);
  ExecuteOptions opt;
  opt.audit = true;
  std::vector<double> x(80, 1.0);
  const auto tr = execute<double>(s, x, pool, opt);
  CHECK_FALSE(tr.audit_findings.empty());
}

TEST_CASE("worker failure shuts down cleanly") {
  const auto f = random_factor(100, 5);
  const auto s = build_schedule(f.L, f.dinv, 4);
  WorkerPool pool(4);
  ExecuteOptions opt;
  opt.on_phase = [](int w, index_t phase) {
    if (w == 2 && phase == 1) throw std::runtime_error("injected");
  };
  std::vector<double> x(100, 1.0);
  CHECK_THROWS_AS(execute<double>(s, x, pool, opt), Error);
  // Pool is still usable.
  std::vector<double> y(100, 1.0), ref = y;
  execute<double>(s, y, pool);
  interpret<double>(s, ref);
  CHECK(y == ref);
}

TEST_CASE("executor rejects mismatched inputs") {
  const auto f = random_factor(30, 6);
  const auto s = build_schedule(f.L, f.dinv, 2);
  WorkerPool three(3), two(2);
  std::vector<double> x(30, 1.0), short_x(29, 1.0);
  CHECK_THROWS_AS(execute<double>(s, x, three), DimensionError);
  CHECK_THROWS_AS(execute<double>(s, short_x, two), DimensionError);
}

TEST_CASE("cost model arithmetic") {
  CostModelParams p;
  Schedule empty;
  empty.n_workers = 4;
  const auto e = model_cost(empty, p);
  CHECK(e.modeled_cycles == 0.0);
  CHECK(e.barrier_count == 0);

  const auto m = model_cost(mapping_only(8), p);
  CHECK(m.modeled_cycles == p.cycles_per_mac_streamed + p.barrier_overhead_cycles);
  CHECK(m.barrier_count == 1);
  CHECK(m.modeled_utilization == doctest::Approx(8.0 / (8 * 31.0)));

  p.streaming_enabled = false;
  const auto plain = model_cost(mapping_only(8), p);
  CHECK(plain.modeled_cycles == p.cycles_per_mac_plain + 2 * p.cycles_per_index_load + p.barrier_overhead_cycles);
  CHECK(plain.per_worker_load_ops == std::vector<index_t>(8, 2));

  const auto one = model_cost(mapping_only(1), p);
  CHECK(one.modeled_cycles == 8 * (p.cycles_per_mac_plain + 2 * p.cycles_per_index_load) + p.barrier_overhead_cycles);

  CostModelParams bad;
  bad.cycles_per_mac_plain = 0.5;
  CHECK_THROWS_AS(model_cost(empty, bad), Error);
  bad = {};
  bad.barrier_overhead_cycles = -1;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("sequential cost counts every entry") {
  const auto f = random_factor(50, 7);
  CostModelParams p;
  CHECK(sequential_cost(f.L, p) == 2.0 * f.L.nnz() * 4.0 + 50 * 3.0);
}

TEST_CASE("trace counts agree with the cost model") {
  const auto f = grid_factor(3);
  const auto s = build_schedule(f.L, f.dinv, 8);
  WorkerPool pool(8);
  std::vector<double> x(s.n, 1.0);
  ExecuteOptions opt;
  opt.cost.streaming_enabled = false;
  const auto tr = execute<double>(s, x, pool, opt);
  const auto cost = model_cost(s, opt.cost);
  CHECK(tr.per_worker_mac_ops == cost.per_worker_mac_ops);
  CHECK(tr.per_worker_load_ops == cost.per_worker_load_ops);
  CHECK(tr.modeled_cycles == cost.modeled_cycles);
  CHECK(tr.modeled_utilization > 0.0);
  CHECK(tr.modeled_utilization <= 1.0);
  CHECK(tr.wall_time >= 0.0);
  std::ostringstream csv;
  write_trace_csv(csv, tr);
  CHECK(csv.str().find("barrier_count," + std::to_string(s.metrics.sync_count)) != std::string::npos);
}

TEST_CASE("streamed schedule beats the sequential plain solve") {
  const auto f = grid_factor(6);
  const auto s = build_schedule(f.L, f.dinv, 8);
  const auto par = model_cost(s, CostModelParams{});
  const double seq = sequential_cost(f.L, CostModelParams{});
  CHECK(seq / par.modeled_cycles > 1.0);
  const auto naive = build_schedule(f.L, f.dinv, 8, {ScheduleKind::naive_column});
  CHECK(model_cost(naive, CostModelParams{}).modeled_cycles > par.modeled_cycles);
}

TEST_CASE("scheduled backend drives the ADMM solver") {
  GridSpec g;
  g.nw = g.nh = 3;
  g.hp = 2;
  g.domains = GridSpec::row_domains(3, 3);
  const auto model = dmp_prune_model(build_discrete_model(g, ThermalConstants{}), 0.005);
  const auto qp = build_mpc_qp(model, PowerModelParams{}).qp;
  AdmmSettings st;
  st.max_iter = 30;
  AdmmSolver<double> ref(qp, st), par(qp, st);
  auto backend = std::make_shared<ScheduledSolver<double>>(build_schedule(par.kkt().factor, 4));
  par.set_backend(backend);
  const auto a = ref.solve();
  const auto b = par.solve();
  CHECK(backend->solves() > 0);
  CHECK(a.iterations == b.iterations);
  for (std::size_t i = 0; i < a.x.size(); ++i) CHECK(b.x[i] == doctest::Approx(a.x[i]).epsilon(1e-9).scale(1.0));
  CHECK(backend->last_trace().barrier_count == backend->schedule().metrics.sync_count);
}

TEST_CASE("benchmark statistics") {
  const std::vector<double> v{3.0, 1.0, 2.0, 4.0};
  const auto b = summarize(v);
  CHECK(b.samples == 4);
  CHECK(b.min == 1.0);
  CHECK(b.max == 4.0);
  CHECK(b.mean == 2.5);
  CHECK(b.median == 2.5);
  CHECK(b.stdev == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(summarize(std::vector<double>{}).samples == 0);
}
