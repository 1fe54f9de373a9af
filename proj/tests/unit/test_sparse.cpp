#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "parspl/amd.hpp"
#include "parspl/ldl.hpp"
#include "parspl/matrix_market.hpp"

using namespace parspl;

TEST_CASE("csc from triplets sums duplicates and sorts rows") {
  std::vector<Triplet<double>> t{{2, 0, 1.0}, {0, 0, 2.0}, {2, 0, 3.0}, {1, 1, 5.0}};
  const auto a = SparseCSC<double>::from_triplets(3, 2, t);
  CHECK(a.nnz() == 3);
  CHECK(a.coeff(2, 0) == 4.0);
  CHECK(a.coeff(0, 0) == 2.0);
  CHECK(a.coeff(1, 0) == 0.0);
  a.validate();
}

TEST_CASE("csc rejects malformed structure") {
  CHECK_THROWS_AS(SparseCSC<double>(2, 2, {0, 2, 1}, {0, 1}, {1.0, 1.0}), Error);
  CHECK_THROWS_AS(SparseCSC<double>(2, 1, {0, 2}, {1, 0}, {1.0, 1.0}), Error);
  CHECK_THROWS_AS(SparseCSC<double>(2, 1, {0, 1}, {2}, {1.0}), Error);
}

TEST_CASE("permutation inverse composes to identity") {
  Permutation p({2, 0, 3, 1});
  for (index_t k = 0; k < 4; ++k) CHECK(p.inv_perm()[p.perm()[k]] == k);
  CHECK_THROWS_AS(Permutation({0, 0, 1}), Error);
}

TEST_CASE("matrix market round trip") {
  std::mt19937 rng(3);
  const auto L = oracle::random_strict_lower(12, 0.3, rng);
  std::stringstream ss;
  write_matrix_market(ss, L);
  const auto back = read_matrix_market(ss);
  CHECK(back.same_pattern(L));
  for (index_t k = 0; k < L.nnz(); ++k) CHECK(back.values()[k] == L.values()[k]);
}

TEST_CASE("matrix market symmetric expansion and errors") {
  std::istringstream in(
      "%%MatrixMarket matrix coordinate real symmetric\n% c\n3 3 2\n1 1 2.0\n3 1 -1\n");
  const auto a = read_matrix_market(in);
  CHECK(a.coeff(0, 2) == -1.0);
  CHECK(a.coeff(2, 0) == -1.0);
  std::istringstream bad("%%MatrixMarket matrix array real general\n1 1\n1\n");
  CHECK_THROWS_AS(read_matrix_market(bad), FormatError);
}

TEST_CASE("amd on a diagonal matrix is the identity") {
  const auto d = SparseCSC<double>::identity(7);
  CHECK(amd_order(d).is_identity());
}

TEST_CASE("amd rejects non-square input") {
  CHECK_THROWS_AS(amd_order(SparseCSC<double>(3, 4)), DimensionError);
}

TEST_CASE("amd places the dense node of an arrow matrix last") {
  const auto a = oracle::arrow(5);
  // Brute-force optimum over all orderings.
  auto p = oracle::natural(5);
  long best = 1 << 30;
  do best = std::min(best, oracle::symbolic_fill(a, p));
  while (std::next_permutation(p.begin(), p.end()));
  CHECK(best == 0);
  CHECK(oracle::symbolic_fill(a, oracle::natural(5)) == 6);

  const auto perm = amd_order(oracle::sparse(a));
  CHECK(perm.perm().back() == 0);
  CHECK(oracle::symbolic_fill(a, perm.perm()) == best);
}

TEST_CASE("amd does not lose to natural order on a grid laplacian") {
  const auto a = oracle::grid_laplacian(4);
  const auto perm = amd_order(oracle::sparse(a));
  CHECK(oracle::symbolic_fill(a, perm.perm()) <= oracle::symbolic_fill(a, oracle::natural(16)));
}

TEST_CASE("amd is deterministic and beats natural order on larger grids") {
  const auto a = oracle::grid_laplacian(12);
  const auto s = oracle::sparse(a);
  const auto p1 = amd_order(s);
  const auto p2 = amd_order(s);
  CHECK(std::ranges::equal(p1.perm(), p2.perm()));
  CHECK(oracle::symbolic_fill(a, p1.perm()) < oracle::symbolic_fill(a, oracle::natural(144)));
}

TEST_CASE("symbolic pattern matches graph elimination") {
  SUBCASE("diagonal") {
    const auto sym = ldl_symbolic(SparseCSC<double>::identity(5), Permutation::identity(5));
    CHECK(sym.pattern.nnz() == 0);
  }
  SUBCASE("chain has no fill") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(4, 4);
    a(2, 1) = a(1, 2) = 1.0;
    a(3, 2) = a(2, 3) = 1.0;
    const auto sym = ldl_symbolic(oracle::sparse(a), Permutation::identity(4));
    CHECK(sym.pattern.nnz() == 2);
    CHECK(sym.pattern.col_rows(1).size() == 1);
    CHECK(sym.pattern.col_rows(1)[0] == 2);
    CHECK(sym.pattern.col_rows(2)[0] == 3);
  }
  SUBCASE("arrow in natural order fills the lower triangle") {
    const auto a = oracle::arrow(5);
    const auto sym = ldl_symbolic(oracle::sparse(a), Permutation::identity(5));
    CHECK(sym.pattern.nnz() == 10);
    // Dense LDL oracle: every strictly lower entry of the factor is nonzero.
    const auto f = ldl_numeric(oracle::sparse(a), sym);
    for (index_t j = 0; j < 5; ++j) {
      const auto rows = sym.pattern.col_rows(j);
      for (index_t i = j + 1; i < 5; ++i) {
        const bool in_pattern = std::find(rows.begin(), rows.end(), i) != rows.end();
        CHECK(in_pattern == (std::abs(f.L.coeff(i, j)) > 1e-14));
      }
    }
  }
  SUBCASE("random kkt under amd") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
      const auto K = oracle::random_kkt(15, 8, 0.15, rng);
      const auto s = oracle::sparse(K);
      const auto perm = amd_order(s);
      const auto sym = ldl_symbolic(s, perm);
      const auto low = oracle::elimination_pattern(K, perm.perm());
      CHECK(sym.pattern.nnz() == oracle::count_lower(low));
      for (index_t j = 0; j < 23; ++j)
        for (index_t i : sym.pattern.col_rows(j)) CHECK(low[i][j] == 1);
    }
  }
}

TEST_CASE("ldl 2x2 by hand") {
  Eigen::MatrixXd k(2, 2);
  k << 2, 1, 1, -3;
  const auto s = oracle::sparse(k);
  const auto f = ldl_numeric(s, ldl_symbolic(s, Permutation::identity(2)));
  REQUIRE(f.L.nnz() == 1);
  CHECK(f.L.coeff(1, 0) == doctest::Approx(0.5));
  CHECK(f.dinv[0] == doctest::Approx(0.5));
  CHECK(f.dinv[1] == doctest::Approx(-1.0 / 3.5));
}

TEST_CASE("ldl of a diagonal matrix") {
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(2, 2);
  k(0, 0) = 4;
  k(1, 1) = -2;
  const auto s = oracle::sparse(k);
  const auto f = ldl_numeric(s, ldl_symbolic(s, Permutation::identity(2)));
  CHECK(f.L.nnz() == 0);
  CHECK(f.dinv[0] == 0.25);
  CHECK(f.dinv[1] == -0.5);
}

TEST_CASE("ldl reports the failing pivot column") {
  Eigen::MatrixXd k(2, 2);
  k << 1, 1, 1, 1;
  const auto s = oracle::sparse(k);
  try {
    (void)ldl_numeric(s, ldl_symbolic(s, Permutation::identity(2)));
    FAIL("expected a factorization error");
  } catch (const FactorizationError& e) {
    CHECK(e.column() == 1);
  }
}

TEST_CASE("ldl reconstruction on random 20x20 kkt") {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 5; ++trial) {
    const auto K = oracle::random_kkt(12, 8, 0.2, rng);
    const auto f = ldl_factor(oracle::sparse(K));
    const index_t n = 20;
    Eigen::MatrixXd L = oracle::dense(f.L) + Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
    for (index_t i = 0; i < n; ++i) D(i, i) = 1.0 / f.dinv[i];
    Eigen::MatrixXd PKP(n, n);
    for (index_t i = 0; i < n; ++i)
      for (index_t j = 0; j < n; ++j) PKP(i, j) = K(f.perm.perm()[i], f.perm.perm()[j]);
    CHECK((PKP - L * D * L.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    for (index_t j = 0; j < n; ++j)
      for (index_t i : f.L.col_rows(j)) CHECK(i > j);
  }
}

TEST_CASE("triangular solves by hand") {
  const auto L = SparseCSC<double>::from_triplets(2, 2, std::vector<Triplet<double>>{{1, 0, 0.5}});
  const std::vector<double> b{2, 2};
  const auto fe = sptrsv_fe<double>(L, b);
  CHECK(fe == std::vector<double>{2, 1});
  const auto bs = sptrsv_bs<double>(L, fe);
  CHECK(bs == std::vector<double>{1.5, 1});
  const SparseCSC<double> empty(3, 3);
  const std::vector<double> c{1, 2, 3};
  CHECK(sptrsv_fe<double>(empty, c) == c);
  CHECK(sptrsv_bs<double>(empty, c) == c);
  CHECK_THROWS_AS(sptrsv_fe<double>(empty, b), DimensionError);
}

TEST_CASE("triangular solves match a dense oracle") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  const auto L = oracle::random_strict_lower(50, 0.1, rng);
  Eigen::MatrixXd Ld = oracle::dense(L) + Eigen::MatrixXd::Identity(50, 50);
  std::vector<double> b(50);
  for (auto& v : b) v = u(rng);
  Eigen::Map<const Eigen::VectorXd> bv(b.data(), 50);
  const Eigen::VectorXd xf = Ld.triangularView<Eigen::Lower>().solve(bv);
  const Eigen::VectorXd xb = Ld.transpose().triangularView<Eigen::Upper>().solve(bv);
  const auto fe = sptrsv_fe<double>(L, b);
  const auto bs = sptrsv_bs<double>(L, b);
  for (int i = 0; i < 50; ++i) {
    CHECK(std::abs(fe[i] - xf[i]) <= 1e-12 * std::max(1.0, std::abs(xf[i])));
    CHECK(std::abs(bs[i] - xb[i]) <= 1e-12 * std::max(1.0, std::abs(xb[i])));
  }
}

TEST_CASE("ldl solve round trip fuzz") {
  std::mt19937 rng(99);
  std::uniform_int_distribution<int> dn(2, 30), dm(1, 20);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 120; ++trial) {
    const int n = dn(rng), m = dm(rng);
    const auto K = oracle::random_kkt(n, m, 0.2, rng, 1e-3, 0.1 + 10 * std::abs(u(rng)));
    const auto s = oracle::sparse(K);
    const auto f = ldl_factor(s);
    std::vector<double> b(n + m);
    for (auto& v : b) v = u(rng);
    const auto x = ldl_solve<double>(f, b);
    std::vector<double> kx(n + m, 0.0);
    s.multiply_add(x, kx);
    double err = 0, bn = 0;
    for (int i = 0; i < n + m; ++i) {
      err = std::max(err, std::abs(kx[i] - b[i]));
      bn = std::max(bn, std::abs(b[i]));
    }
    CHECK(err <= 1e-8 * bn);
  }
}

TEST_CASE("float factorization is usable") {
  std::mt19937 rng(5);
  const auto K = oracle::random_kkt(10, 6, 0.3, rng, 1e-3, 1.0);
  const auto f = ldl_factor(oracle::sparse(K).cast<float>());
  std::vector<float> b(16, 1.0f);
  const auto x = ldl_solve<float>(f, b);
  Eigen::VectorXd xd(16);
  for (int i = 0; i < 16; ++i) xd[i] = x[i];
  const Eigen::VectorXd r = K * xd - Eigen::VectorXd::Ones(16);
  CHECK(r.cwiseAbs().maxCoeff() <= 1e-2 * (1.0 + xd.cwiseAbs().maxCoeff()));
}
