#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "parspl/admm.hpp"
#include "parspl/mpc.hpp"

using namespace parspl;

namespace {

GridSpec grid(index_t k, int hp = 2) {
  GridSpec g;
  g.nw = g.nh = k;
  g.hp = hp;
  g.domains = GridSpec::row_domains(k, k);
  return g;
}

double power_iteration_radius(const Eigen::MatrixXd& d) {
  // Spectral radius via growth of ||d^k v||^(1/k).
  Eigen::VectorXd v = Eigen::VectorXd::Ones(d.rows()).normalized();
  double log_growth = 0.0;
  const int iters = 2000;
  for (int k = 0; k < iters; ++k) {
    v = d * v;
    const double nv = v.norm();
    log_growth += std::log(nv);
    v /= nv;
  }
  return std::exp(log_growth / iters);
}

double fit_exponent(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("single element model is passive") {
  const auto m = build_thermal_model(grid(1), ThermalConstants{});
  CHECK(m.n_states() == 3);
  for (index_t i = 0; i < 3; ++i) {
    CHECK(m.a_t.row(i).sum() <= 1e-12);
    for (index_t j = 0; j < 3; ++j)
      if (i != j) CHECK(m.a_t(i, j) >= 0.0);
  }
}

TEST_CASE("scalar system gain and zero-order hold") {
  const Eigen::MatrixXd a = Eigen::MatrixXd::Constant(1, 1, -1.0);
  const Eigen::MatrixXd b = Eigen::MatrixXd::Constant(1, 1, 1.0);
  // Stationary gain b/a.
  CHECK(-b(0, 0) / a(0, 0) == 1.0);
  const auto [d, e] = discretize(a, b, 0.1);
  CHECK(d(0, 0) == doctest::Approx(std::exp(-0.1)).epsilon(1e-12));
  CHECK(e(0, 0) == doctest::Approx(1.0 - std::exp(-0.1)).epsilon(1e-12));
  CHECK(d(0, 0) == doctest::Approx(0.904837).epsilon(1e-6));
  CHECK(e(0, 0) == doctest::Approx(0.095163).epsilon(1e-5));
}

TEST_CASE("lateral coupling follows grid adjacency") {
  const auto m = build_thermal_model(grid(3), ThermalConstants{});
  auto lateral = [&](index_t pe) {
    int c = 0;
    for (index_t q = 0; q < 9; ++q)
      if (q != pe && m.a_t(si_state(pe), si_state(q)) != 0.0) ++c;
    return c;
  };
  // Oracle: Manhattan-distance-1 neighbours.
  for (index_t pe = 0; pe < 9; ++pe) {
    int expect = 0;
    for (index_t q = 0; q < 9; ++q)
      if (std::abs(pe / 3 - q / 3) + std::abs(pe % 3 - q % 3) == 1) ++expect;
    CHECK(lateral(pe) == expect);
  }
  CHECK(lateral(0) == 2);
  CHECK(lateral(4) == 4);
}

TEST_CASE("expm agrees with an independent implementation") {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd a(6, 6);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) a(i, j) = u(rng);
    const Eigen::MatrixXd ref = a.exp();
    CHECK((expm(a) - ref).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
  }
  const auto m = build_thermal_model(grid(3), ThermalConstants{});
  const Eigen::MatrixXd at = m.a_t * 1e-3;
  CHECK((expm(at) - at.exp()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("discretisation limits and stability") {
  const auto m = build_thermal_model(grid(3), ThermalConstants{});
  const index_t nx = m.n_states();
  const auto d1 = discretize(m.a_t, m.b_t, 1e-3).first;
  const auto d2 = discretize(m.a_t, m.b_t, 1e-4).first;
  const double e1 = (d1 - Eigen::MatrixXd::Identity(nx, nx)).norm();
  const double e2 = (d2 - Eigen::MatrixXd::Identity(nx, nx)).norm();
  CHECK(e2 < e1 / 5.0);
  CHECK(power_iteration_radius(d1) < 1.0);
  // The exponential fills the pattern of a_t.
  CHECK(count_nonzeros(d1) > count_nonzeros(m.a_t));
}

TEST_CASE("dmp keep rule") {
  const auto m = build_discrete_model(grid(3), ThermalConstants{});
  CHECK(dmp_prune(m.d, m.a_t, 0.0) == m.d);
  const double inf = std::numeric_limits<double>::infinity();
  const auto p = dmp_prune(m.d, m.a_t, inf);
  for (index_t i = 0; i < m.n_states(); ++i)
    for (index_t j = 0; j < m.n_states(); ++j) {
      const bool keep = i == j || m.a_t(i, j) != 0.0;
      CHECK((p(i, j) != 0.0) == keep);
      if (keep) CHECK(p(i, j) == m.d(i, j));
    }
  const auto pm = dmp_prune_model(m, inf);
  CHECK(count_nonzeros(pm.e) == count_nonzeros(m.b_t));
}

TEST_CASE("dmp reduces nnz and the reduction grows with grid size") {
  double prev_ratio = 0.0;
  for (index_t k : {3, 6, 9}) {
    const auto m = build_discrete_model(grid(k), ThermalConstants{});
    const auto p = dmp_prune(m.d, m.a_t, 0.005);
    CHECK(count_nonzeros(p) < count_nonzeros(m.d));
    const double ratio = double(count_nonzeros(m.d)) / count_nonzeros(p);
    CHECK(ratio > prev_ratio);
    prev_ratio = ratio;
  }
}

TEST_CASE("power model arithmetic") {
  PowerModelParams pm;
  pm.k_v = pm.k_T = pm.k_T0 = 0.0;
  pm.k_s0 = 0.2;
  pm.icc = 0.1;
  pm.ceff = {1e-9};
  pm.vf_table = {{0.6, 0.8e9}, {0.8, 1.6e9}, {1.0, 2.4e9}};
  CHECK(static_power(pm, 0.8, 50.0, LeakageMode::nonlinear) == doctest::Approx(0.28));
  CHECK(power_forward(pm, 0.8, 1e9, 50.0, 0) == doctest::Approx(0.92));
  const auto inv = power_inverse(pm, 0.92, 50.0, 0, 0.8);
  CHECK(inv.f == doctest::Approx(1e9));
  CHECK(!inv.clamped);
  const auto low = power_inverse(pm, 0.01, 50.0, 0);
  CHECK(low.clamped);
  CHECK(low.v == pm.v_min());
  CHECK(low.f == pm.f_min);
}

TEST_CASE("power inverse round trip") {
  const PowerModelParams pm;
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> t(30, 85), p(0.2, 2.3);
  std::uniform_int_distribution<int> w(0, 3);
  int unclamped = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const double temp = t(rng), target = p(rng);
    const int cls = w(rng);
    for (auto mode : {LeakageMode::nonlinear, LeakageMode::frozen}) {
      const auto r = power_inverse(pm, target, temp, cls, 0.0, mode);
      if (r.clamped) continue;
      ++unclamped;
      CHECK(std::abs(power_forward(pm, r.v, r.f, temp, cls, mode) - target) <= 1e-9);
      // Smallest admissible voltage.
      for (const auto& op : pm.vf_table)
        if (op.v < r.v) CHECK(power_forward(pm, op.v, op.f, temp, cls, mode) < target);
    }
  }
  CHECK(unclamped > 100);
}

TEST_CASE("mpc row and column counts for a 1x1 grid") {
  const auto model = build_discrete_model(grid(1, 1), ThermalConstants{});
  const auto mpc = build_mpc_qp(model, PowerModelParams{});
  const index_t nx = 3;
  CHECK(mpc.qp.n() == nx * 2 + 1);
  CHECK(mpc.qp.m() == nx + nx + 1 + 1 + 1);
}

TEST_CASE("kkt bookkeeping of the 3x3 H2 problem") {
  const auto model = build_discrete_model(grid(3), ThermalConstants{});
  const auto mpc = build_mpc_qp(model, PowerModelParams{});
  const auto kkt = assemble_kkt(mpc.qp, AdmmSettings{});
  const index_t n = mpc.qp.n(), m = mpc.qp.m();
  CHECK(kkt.K.rows() == n + m);
  // Recount: upper(P) merged with the sigma diagonal, A' block, -1/rho diagonal.
  index_t p_diag = 0;
  for (index_t j = 0; j < n; ++j)
    if (mpc.qp.P.coeff(j, j) != 0.0) ++p_diag;
  CHECK(kkt.K.nnz() == mpc.qp.P.nnz() - p_diag + n + mpc.qp.A.nnz() + m);
}

TEST_CASE("pruning strictly shrinks the assembled problem") {
  const auto model = build_discrete_model(grid(3), ThermalConstants{});
  const auto vanilla = build_mpc_qp(model, PowerModelParams{});
  const auto pruned = build_mpc_qp(dmp_prune_model(model, 0.005), PowerModelParams{});
  CHECK(problem_nnz(pruned.qp) < problem_nnz(vanilla.qp));
}

TEST_CASE("problem size scaling law") {
  std::vector<double> nc, vanilla, pruned;
  for (index_t k : {3, 6, 9, 12}) {
    const auto model = build_discrete_model(grid(k), ThermalConstants{});
    nc.push_back(double(k * k));
    vanilla.push_back(problem_nnz(build_mpc_qp(model, PowerModelParams{}).qp));
    pruned.push_back(problem_nnz(build_mpc_qp(dmp_prune_model(model, 0.005), PowerModelParams{}).qp));
  }
  const double ev = fit_exponent(nc, vanilla), ep = fit_exponent(nc, pruned);
  MESSAGE("vanilla exponent " << ev << ", pruned exponent " << ep);
  CHECK(ep <= 1.15);
  CHECK(ev >= 1.6);
  for (std::size_t i = 1; i < nc.size(); ++i) CHECK(pruned[i] <= 0.5 * vanilla[i]);
}

TEST_CASE("mpc step updates only vectors") {
  const auto model = build_discrete_model(grid(3), ThermalConstants{});
  auto mpc = build_mpc_qp(model, PowerModelParams{});
  const auto& L = mpc.layout;
  std::vector<double> x(L.nx, 50.0), p(L.nc, 1.0), dom(L.nd, 40.0);
  update_mpc_step(mpc, x, p, 100.0, dom);
  const auto q1 = mpc.qp.q;
  const auto l1 = mpc.qp.l;
  const auto u1 = mpc.qp.u;
  update_mpc_step(mpc, x, p, 100.0, dom);
  CHECK(mpc.qp.q == q1);
  CHECK(mpc.qp.l == l1);
  CHECK(mpc.qp.u == u1);
  CHECK(mpc.qp.l[L.init_row(0)] == 25.0);
  CHECK(mpc.qp.q[L.u_col(1, 2)] == -2.0);

  mpc.qp.A.values_mut()[0] += 1.0;
  CHECK_THROWS_AS(update_mpc_step(mpc, x, p, 100.0, dom), Error);
}

TEST_CASE("budget step touches one budget row plus one row per domain at hp = 1") {
  const auto model = build_discrete_model(grid(3, 1), ThermalConstants{});
  auto mpc = build_mpc_qp(model, PowerModelParams{});
  const auto& L = mpc.layout;
  std::vector<double> x(L.nx, 40.0), p(L.nc, 1.0), dom(L.nd, 50.0);
  update_mpc_step(mpc, x, p, 100.0, dom);
  const auto u1 = mpc.qp.u;
  std::vector<double> dom2(L.nd, 30.0);
  update_mpc_step(mpc, x, p, 60.0, dom2);
  int changed = 0;
  for (index_t i = 0; i < L.m(); ++i) changed += mpc.qp.u[i] != u1[i];
  CHECK(changed == 1 + L.nd);
}

TEST_CASE("zero weights give a feasible point") {
  const auto model = build_discrete_model(grid(2), ThermalConstants{});
  MpcWeights w;
  w.d_diag.assign(4, 0.0);
  auto mpc = build_mpc_qp(model, PowerModelParams{}, w);
  CHECK(mpc.qp.P.nnz() == 0);
  std::vector<double> x(mpc.layout.nx, 45.0), p(4, 1.0), dom(mpc.layout.nd, 10.0);
  update_mpc_step(mpc, x, p, 8.0, dom);
  AdmmSettings s;
  s.max_iter = 4000;
  AdmmSolver<double> solver(mpc.qp, s);
  const auto r = solver.solve();
  CHECK(r.r_prim < s.eps_prim);
}

TEST_CASE("3x3 H2 cold start converges within 64 iterations") {
  const auto model = build_discrete_model(grid(3), ThermalConstants{});
  auto mpc = build_mpc_qp(model, PowerModelParams{});
  const auto& L = mpc.layout;
  Eigen::VectorXd x = steady_state(model, Eigen::VectorXd::Constant(L.nc, 1.5)).array() + 25.0;
  std::vector<double> xs(x.data(), x.data() + x.size()), p(L.nc, 1.8), dom(L.nd, 4.5);
  update_mpc_step(mpc, xs, p, 12.0, dom);
  AdmmSettings s;
  s.max_iter = 64;
  AdmmSolver<double> solver(mpc.qp, s);
  const auto r = solver.solve();
  MESSAGE("iterations " << r.iterations << " r_prim " << r.r_prim << " r_dual " << r.r_dual);
  CHECK(r.status == SolveStatus::solved);
}
