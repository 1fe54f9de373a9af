#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "parspl/admm.hpp"
#include "parspl/half.hpp"
#include "qp_oracle.hpp"

using namespace parspl;

namespace {

QpProblem<double> dense_qp(const Eigen::MatrixXd& P, const Eigen::VectorXd& q, const Eigen::MatrixXd& A,
                           const Eigen::VectorXd& l, const Eigen::VectorXd& u) {
  Eigen::MatrixXd Pu = P.triangularView<Eigen::Upper>();
  return {oracle::sparse(Pu), {q.data(), q.data() + q.size()}, oracle::sparse(A),
          {l.data(), l.data() + l.size()}, {u.data(), u.data() + u.size()}};
}

QpProblem<double> box_qp() {
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
  return dense_qp(I, Eigen::Vector2d(-1, -1), I, Eigen::Vector2d(0, 0), Eigen::Vector2d(0.5, 1));
}

AdmmSettings tight(int max_iter = 5000, double eps = 1e-6) {
  AdmmSettings s;
  s.max_iter = max_iter;
  s.eps_prim = s.eps_dual = eps;
  return s;
}

struct RandomQp {
  Eigen::MatrixXd P, A;
  Eigen::VectorXd q, l, u;
};

RandomQp random_qp(int n, int m, std::mt19937& rng) {
  std::uniform_real_distribution<double> U(-1, 1), W(0.1, 1.0), coin(0, 1);
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = U(rng);
  RandomQp r;
  r.P = M.transpose() * M + 0.1 * Eigen::MatrixXd::Identity(n, n);
  r.A = Eigen::MatrixXd::Zero(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      if (coin(rng) < 0.5) r.A(i, j) = U(rng);
  r.q = Eigen::VectorXd(n);
  for (int i = 0; i < n; ++i) r.q[i] = 3 * U(rng);
  Eigen::VectorXd x0(n);
  for (int i = 0; i < n; ++i) x0[i] = U(rng);
  const Eigen::VectorXd ax = r.A * x0;
  r.l = Eigen::VectorXd(m);
  r.u = Eigen::VectorXd(m);
  for (int i = 0; i < m; ++i) {
    r.l[i] = ax[i] - W(rng);
    r.u[i] = ax[i] + W(rng);
  }
  return r;
}

}  // namespace

TEST_CASE("kkt assembly of a scalar problem") {
  const Eigen::MatrixXd P = Eigen::MatrixXd::Constant(1, 1, 2.0);
  const Eigen::MatrixXd A = Eigen::MatrixXd::Constant(1, 1, 1.0);
  const auto qp = dense_qp(P, Eigen::VectorXd::Zero(1), A, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1));
  const auto kkt = assemble_kkt(qp, AdmmSettings{});
  const Eigen::MatrixXd K = oracle::dense(kkt.K);
  CHECK(K(0, 0) == doctest::Approx(2 + 1e-6));
  CHECK(K(0, 1) == 1.0);
  CHECK(K(1, 0) == 0.0);  // upper triangle only
  CHECK(K(1, 1) == doctest::Approx(-10.0));
}

TEST_CASE("kkt assembly rejects an empty problem") {
  QpProblem<double> qp{SparseCSC<double>(0, 0), {}, SparseCSC<double>(0, 0), {}, {}};
  CHECK_THROWS_AS(assemble_kkt(qp, AdmmSettings{}), DimensionError);
}

TEST_CASE("settings validation") {
  AdmmSettings s;
  s.alpha = 2.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = {};
  s.rho = 0;
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("separable box qp converges to the clipped minimiser") {
  AdmmSolver<double> solver(box_qp(), tight());
  const auto r = solver.solve();
  CHECK(r.status == SolveStatus::solved);
  CHECK(r.x[0] == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(r.r_prim < 1e-6);
  CHECK(r.r_dual < 1e-6);
}

TEST_CASE("exact fixed point is preserved with alpha = 1") {
  auto s = tight(20000, 1e-12);
  AdmmSolver<double> solver(box_qp(), s);
  const auto r = solver.solve();
  AdmmState<double> st = solver.cold_state();
  st.x = r.x;
  st.z = r.z;
  st.y = r.y;
  s.alpha = 1.0;
  AdmmSolver<double> unrelaxed(box_qp(), s);
  const auto before = st;
  unrelaxed.step(st);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(st.x[i] - before.x[i]) < 1e-9);
    CHECK(std::abs(st.z[i] - before.z[i]) < 1e-9);
    CHECK(std::abs(st.y[i] - before.y[i]) < 1e-9);
  }
}

TEST_CASE("residuals") {
  AdmmSolver<double> solver(box_qp(), AdmmSettings{});
  auto st = solver.cold_state();
  SUBCASE("zero problem data gives zero residuals") {
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
    AdmmSolver<double> zero(dense_qp(I, Eigen::Vector2d::Zero(), I, Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1)),
                            AdmmSettings{});
    const auto [rp, rd] = zero.residuals(zero.cold_state());
    CHECK(rp == 0.0);
    CHECK(rd == 0.0);
  }
  SUBCASE("unit violation of Ax = z") {
    st.x = {1.0, 0.0};
    const auto [rp, rd] = solver.residuals(st);
    CHECK(rp == 1.0);
    (void)rd;
  }
}

TEST_CASE("equality constrained scalar problem") {
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  AdmmSolver<double> solver(dense_qp(one, Eigen::VectorXd::Zero(1), one, Eigen::VectorXd::Constant(1, 3),
                                     Eigen::VectorXd::Constant(1, 3)),
                            tight());
  const auto r = solver.solve();
  CHECK(r.status == SolveStatus::solved);
  CHECK(r.x[0] == doctest::Approx(3.0).epsilon(1e-5));
}

TEST_CASE("warm start at the solution terminates immediately") {
  AdmmSolver<double> solver(box_qp(), tight(20000, 1e-10));
  const auto cold = solver.solve();
  auto s = tight(100, 1e-6);
  AdmmSolver<double> again(box_qp(), s);
  AdmmState<double> init;
  init.x = cold.x;
  init.z = cold.z;
  init.y = cold.y;
  const auto warm = again.solve(init);
  CHECK(warm.status == SolveStatus::solved);
  CHECK(warm.iterations <= 2);
  // The solver object keeps the prior solution for the next call.
  const auto next = again.solve();
  CHECK(next.iterations <= 2);
}

TEST_CASE("max_iter is reported and the iterate is still returned") {
  AdmmSettings s;
  s.max_iter = 2;
  s.eps_prim = s.eps_dual = 1e-12;
  AdmmSolver<double> solver(box_qp(), s);
  const auto r = solver.solve();
  CHECK(r.status == SolveStatus::max_iter);
  CHECK(r.x.size() == 2);
  CHECK(r.trace.size() == 2);
}

TEST_CASE("fixed iteration mode runs exactly max_iter") {
  AdmmSettings s;
  s.termination = TerminationMode::fixed_iterations;
  s.max_iter = 15;
  AdmmSolver<double> solver(box_qp(), s);
  CHECK(solver.solve().iterations == 15);
}

TEST_CASE("all-zero problem converges in one iteration at every precision") {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(3, 3);
  const auto qp = dense_qp(I, Eigen::Vector3d::Zero(), I, -Eigen::Vector3d::Ones(), Eigen::Vector3d::Ones());
  AdmmSolver<double> d(qp, AdmmSettings{});
  CHECK(d.solve().iterations == 1);
  AdmmSolver<float> f(qp.cast<float>(), AdmmSettings{});
  CHECK(f.solve().iterations == 1);
  AdmmSettings h;
  h.storage = StoragePrecision::half;
  AdmmSolver<float> hf(qp.cast<float>(), h);
  CHECK(hf.solve().iterations == 1);
}

TEST_CASE("projection invariant holds after every iteration") {
  std::mt19937 rng(17);
  for (auto storage : {StoragePrecision::native, StoragePrecision::half}) {
    const auto r = random_qp(6, 9, rng);
    const auto qp = dense_qp(r.P, r.q, r.A, r.l, r.u).cast<float>();
    AdmmSettings s;
    s.storage = storage;
    AdmmSolver<float> solver(qp, s);
    auto st = solver.cold_state();
    for (int k = 0; k < 40; ++k) {
      solver.step(st);
      for (int i = 0; i < 9; ++i) {
        CHECK(st.z[i] >= solver.problem().l[i]);
        CHECK(st.z[i] <= solver.problem().u[i]);
      }
    }
  }
}

TEST_CASE("vector updates do not refactor") {
  AdmmSolver<double> solver(box_qp(), AdmmSettings{});
  const auto K0 = solver.kkt().K;
  for (int t = 0; t < 5; ++t) {
    const std::vector<double> q{-1.0 - t, 0.5 * t};
    solver.update_q(q);
    const std::vector<double> l{-0.1 * t, 0.0}, u{0.5, 1.0 + t};
    solver.update_bounds(l, u);
    (void)solver.solve();
  }
  CHECK(solver.factorization_count() == 1);
  CHECK(solver.kkt().K.same_pattern(K0));
  CHECK(std::ranges::equal(solver.kkt().K.values(), K0.values()));
}

TEST_CASE("residual-mode solutions match the active-set oracle") {
  std::mt19937 rng(123);
  std::uniform_int_distribution<int> dn(2, 12), dm(1, 16);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int n = dn(rng), m = dm(rng);
    const auto r = random_qp(n, m, rng);
    const auto ref = oracle::solve_active_set(r.P, r.q, r.A, r.l, r.u);
    REQUIRE(ref.has_value());
    AdmmSolver<double> solver(dense_qp(r.P, r.q, r.A, r.l, r.u), tight(20000, 1e-7));
    const auto sol = solver.solve();
    CHECK(sol.status == SolveStatus::solved);
    Eigen::Map<const Eigen::VectorXd> x(sol.x.data(), n);
    const double obj = 0.5 * x.dot(r.P * x) + r.q.dot(x);
    CHECK(std::abs(obj - ref->objective) <= 1e-4 * std::max(1.0, std::abs(ref->objective)));
    if (n == 10 || trial < 5) CHECK((x - ref->x).cwiseAbs().maxCoeff() <= 1e-4);
    ++checked;
  }
  CHECK(checked >= 50);
}

TEST_CASE("l2-squared residual norm switch") {
  AdmmSettings s;
  s.norm = ResidualNorm::l2_squared;
  AdmmSolver<double> solver(box_qp(), s);
  auto st = solver.cold_state();
  st.x = {1.0, 2.0};
  CHECK(solver.residuals(st).first == doctest::Approx(5.0));
}

TEST_CASE("half rounding") {
  CHECK(round_to_half(1.0f) == 1.0f);
  CHECK(round_to_half(0.1f) == doctest::Approx(0.0999755859375));
  CHECK(round_to_half(65504.0f) == 65504.0f);
  CHECK(std::isinf(round_to_half(65520.0f)));
  CHECK(round_to_half(1.0f + 1.0f / 4096) == 1.0f);  // tie to even
  CHECK(round_to_half(2e-8f) == 0.0f);
  CHECK(round_to_half(-2.0f) == -2.0f);
}

TEST_CASE("qp text format round trip and version check") {
  auto qp = box_qp();
  qp.l[0] = -std::numeric_limits<double>::infinity();
  std::stringstream ss;
  write_qp(ss, qp);
  const auto back = read_qp(ss);
  CHECK(back.P.same_pattern(qp.P));
  CHECK(back.A.same_pattern(qp.A));
  CHECK(back.q == qp.q);
  CHECK(back.l == qp.l);
  CHECK(back.u == qp.u);

  std::string text = ss.str();
  text.replace(text.find("1.0"), 3, "2.0");
  std::istringstream future(text);
  CHECK_THROWS_AS(read_qp(future), VersionError);
}

TEST_CASE("trace csv") {
  std::ostringstream out;
  write_trace_csv(out, {{1, 0.5, 0.25}, {2, 0.125, 0.0625}});
  CHECK(out.str() == "iteration,r_prim,r_dual\n1,0.5,0.25\n2,0.125,0.0625\n");
}
