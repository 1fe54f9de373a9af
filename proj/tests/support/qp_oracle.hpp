#pragma once

// Active-set enumeration for small dense convex QPs:
//   min 1/2 x'Px + q'x  s.t.  l <= Ax <= u,  P positive definite.
// Candidate active sets are visited in order of increasing size; the first
// one whose equality-constrained solution is primal feasible with correctly
// signed multipliers is the optimum.

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

namespace oracle {

struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd y;  // multiplier per constraint row, sign convention Px + q + A'y = 0
  double objective;
};

inline std::optional<QpSolution> solve_active_set(const Eigen::MatrixXd& P, const Eigen::VectorXd& q,
                                                  const Eigen::MatrixXd& A, const Eigen::VectorXd& l,
                                                  const Eigen::VectorXd& u, int max_active = -1,
                                                  double tol = 1e-9) {
  const int n = static_cast<int>(P.rows());
  const int m = static_cast<int>(A.rows());
  std::vector<int> eq, ineq;
  for (int i = 0; i < m; ++i) (l[i] == u[i] ? eq : ineq).push_back(i);
  if (max_active < 0) max_active = n;

  // side[i]: -1 lower, +1 upper for active rows.
  std::vector<int> rows;
  std::vector<int> side;
  std::optional<QpSolution> found;

  // Schur-complement form: for an active set S with targets b_S the
  // multipliers solve (A_S P^-1 A_S') y_S = -(A_S P^-1 q + b_S).
  const Eigen::LLT<Eigen::MatrixXd> pchol(P);
  const Eigen::MatrixXd PiAt = pchol.solve(A.transpose());
  const Eigen::VectorXd Piq = pchol.solve(q);
  const Eigen::MatrixXd G = A * PiAt;
  const Eigen::VectorXd h = A * Piq;

  auto try_set = [&]() -> bool {
    std::vector<int> act(eq);
    std::vector<int> sgn(eq.size(), 0);
    act.insert(act.end(), rows.begin(), rows.end());
    sgn.insert(sgn.end(), side.begin(), side.end());
    const int k = static_cast<int>(act.size());
    if (k > n) return false;
    Eigen::VectorXd ys = Eigen::VectorXd::Zero(k);
    if (k > 0) {
      Eigen::MatrixXd Gs(k, k);
      Eigen::VectorXd rhs(k);
      for (int a = 0; a < k; ++a) {
        for (int b = 0; b < k; ++b) Gs(a, b) = G(act[a], act[b]);
        rhs[a] = -(h[act[a]] + (sgn[a] > 0 ? u[act[a]] : l[act[a]]));
      }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(Gs);
      if (ldlt.info() != Eigen::Success) return false;
      const auto d = ldlt.vectorD();
      if (d.minCoeff() <= 1e-12 * std::max(1.0, d.maxCoeff())) return false;  // A_S rank deficient
      ys = ldlt.solve(rhs);
    }
    Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
    for (int r = 0; r < k; ++r) {
      if (sgn[r] > 0 && ys[r] < -tol) return false;
      if (sgn[r] < 0 && ys[r] > tol) return false;
      y[act[r]] = ys[r];
    }
    const Eigen::VectorXd x = -(Piq + PiAt * y);
    const Eigen::VectorXd ax = A * x;
    for (int i = 0; i < m; ++i)
      if (ax[i] < l[i] - tol || ax[i] > u[i] + tol) return false;
    found = QpSolution{x, y, 0.5 * x.dot(P * x) + q.dot(x)};
    return true;
  };

  const int ni = static_cast<int>(ineq.size());
  for (int size = 0; size <= std::min(ni, max_active); ++size) {
    // Combinations of `size` inequality rows, each with a side.
    std::function<bool(int)> rec = [&](int start) -> bool {
      if (static_cast<int>(rows.size()) == size) return try_set();
      for (int t = start; t < ni; ++t) {
        const int i = ineq[t];
        for (int sd : {-1, 1}) {
          if (sd < 0 && !std::isfinite(l[i])) continue;
          if (sd > 0 && !std::isfinite(u[i])) continue;
          rows.push_back(i);
          side.push_back(sd);
          if (rec(t + 1)) return true;
          rows.pop_back();
          side.pop_back();
        }
      }
      return false;
    };
    if (rec(0)) return found;
  }
  return std::nullopt;
}

}  // namespace oracle
