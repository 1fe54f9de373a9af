#pragma once

// Dense reference implementations used as test oracles. Deliberately naive.

#include <Eigen/Dense>
#include <random>
#include <span>
#include <vector>

#include "parspl/sparse.hpp"

namespace oracle {

using parspl::index_t;

template <typename T>
Eigen::MatrixXd dense(const parspl::SparseCSC<T>& a) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(a.rows(), a.cols());
  for (index_t j = 0; j < a.cols(); ++j) {
    const auto r = a.col_rows(j);
    const auto v = a.col_values(j);
    for (std::size_t k = 0; k < r.size(); ++k) d(r[k], j) += static_cast<double>(v[k]);
  }
  return d;
}

inline parspl::SparseCSC<double> sparse(const Eigen::MatrixXd& d, double drop = 0.0) {
  std::vector<parspl::Triplet<double>> t;
  for (index_t j = 0; j < d.cols(); ++j)
    for (index_t i = 0; i < d.rows(); ++i)
      if (std::abs(d(i, j)) > drop) t.push_back({i, j, d(i, j)});
  return parspl::SparseCSC<double>::from_triplets(static_cast<index_t>(d.rows()),
                                                   static_cast<index_t>(d.cols()), t);
}

// Boolean graph elimination on a dense symmetric pattern. Returns the pattern
// of the strictly lower factor for the given elimination order.
inline std::vector<std::vector<char>> elimination_pattern(const Eigen::MatrixXd& a,
                                                          std::span<const index_t> order) {
  const auto n = static_cast<index_t>(a.rows());
  std::vector<std::vector<char>> g(n, std::vector<char>(n, 0));
  for (index_t i = 0; i < n; ++i)
    for (index_t j = 0; j < n; ++j)
      if (i != j && (a(order[i], order[j]) != 0.0 || a(order[j], order[i]) != 0.0)) g[i][j] = 1;
  std::vector<std::vector<char>> low(n, std::vector<char>(n, 0));
  for (index_t k = 0; k < n; ++k) {
    std::vector<index_t> nb;
    for (index_t i = k + 1; i < n; ++i)
      if (g[i][k]) {
        nb.push_back(i);
        low[i][k] = 1;
      }
    for (index_t i : nb)
      for (index_t j : nb)
        if (i != j) g[i][j] = 1;
  }
  return low;
}

inline long count_lower(const std::vector<std::vector<char>>& low) {
  long c = 0;
  for (const auto& row : low)
    for (char v : row) c += v;
  return c;
}

// Fill-in = nnz(L) - nnz(strict lower of P A P^T).
inline long symbolic_fill(const Eigen::MatrixXd& a, std::span<const index_t> order) {
  const auto low = elimination_pattern(a, order);
  long orig = 0;
  const auto n = static_cast<index_t>(a.rows());
  for (index_t i = 0; i < n; ++i)
    for (index_t j = 0; j < i; ++j)
      if (a(order[i], order[j]) != 0.0 || a(order[j], order[i]) != 0.0) ++orig;
  return count_lower(low) - orig;
}

inline std::vector<index_t> natural(index_t n) {
  std::vector<index_t> p(n);
  for (index_t i = 0; i < n; ++i) p[i] = i;
  return p;
}

inline Eigen::MatrixXd arrow(index_t n) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) * 4.0;
  for (index_t i = 1; i < n; ++i) a(0, i) = a(i, 0) = 1.0;
  return a;
}

inline Eigen::MatrixXd grid_laplacian(index_t k) {
  const index_t n = k * k;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (index_t r = 0; r < k; ++r)
    for (index_t c = 0; c < k; ++c) {
      const index_t i = r * k + c;
      a(i, i) = 4.0;
      if (c + 1 < k) a(i, i + 1) = a(i + 1, i) = -1.0;
      if (r + 1 < k) a(i, i + k) = a(i + k, i) = -1.0;
    }
  return a;
}

// Quasi-definite KKT [[P + sigma I, A^T], [A, -1/rho I]] with random sparse P = M^T M, A.
inline Eigen::MatrixXd random_kkt(index_t n, index_t m, double density, std::mt19937& rng,
                                  double sigma = 1e-6, double rho = 0.1) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), coin(0.0, 1.0);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (index_t i = 0; i < n; ++i)
    for (index_t j = 0; j < n; ++j)
      if (i == j || coin(rng) < density) M(i, j) = u(rng);
  Eigen::MatrixXd P = M.transpose() * M;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, n);
  for (index_t i = 0; i < m; ++i)
    for (index_t j = 0; j < n; ++j)
      if (coin(rng) < density) A(i, j) = u(rng);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = P + sigma * Eigen::MatrixXd::Identity(n, n);
  K.topRightCorner(n, m) = A.transpose();
  K.bottomLeftCorner(m, n) = A;
  K.bottomRightCorner(m, m) = -(1.0 / rho) * Eigen::MatrixXd::Identity(m, m);
  return K;
}

inline parspl::SparseCSC<double> random_strict_lower(index_t n, double density, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5), coin(0.0, 1.0);
  std::vector<parspl::Triplet<double>> t;
  for (index_t j = 0; j < n; ++j)
    for (index_t i = j + 1; i < n; ++i)
      if (coin(rng) < density) t.push_back({i, j, u(rng)});
  return parspl::SparseCSC<double>::from_triplets(n, n, t);
}

}  // namespace oracle
