#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "parspl/ldl.hpp"
#include "parspl/qp.hpp"

namespace parspl {

enum class TerminationMode { fixed_iterations, residual };
enum class ResidualNorm { inf, l2_squared };
enum class StoragePrecision { native, half };
enum class SolveStatus { solved, max_iter, diverged };

const char* to_string(SolveStatus s) noexcept;

struct AdmmSettings {
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.5;
  int max_iter = 15;
  double eps_prim = 0.01;
  double eps_dual = 0.01;
  int check_interval = 1;
  bool warm_start = true;
  TerminationMode termination = TerminationMode::residual;
  ResidualNorm norm = ResidualNorm::inf;
  // Round matrices once and iterates after every iteration to binary16.
  StoragePrecision storage = StoragePrecision::native;
  // rho multiplier for rows with l == u, as in OSQP. 1 keeps a single scalar rho.
  double rho_eq_scale = 1e3;
  bool record_trace = true;
  double divergence_limit = 1e12;

  void validate() const;
};

template <typename T>
struct AdmmState {
  std::vector<T> x, z, y;
  std::vector<T> xtilde, ztilde, nu;
  double r_prim = 0.0;
  double r_dual = 0.0;
  int iterations = 0;
};

template <typename T>
struct KktSystem {
  SparseCSC<T> K;  // upper triangle
  std::vector<T> rho;  // per constraint row
  LdlFactor<T> factor;
};

/// K = [[P + sigma I, A'], [A, -diag(1/rho)]] (upper triangle) and its factor.
template <typename T>
KktSystem<T> assemble_kkt(const QpProblem<T>& qp, const AdmmSettings& s);

template <typename T>
struct SolveResult {
  std::vector<T> x, z, y;
  SolveStatus status = SolveStatus::max_iter;
  int iterations = 0;
  double r_prim = 0.0;
  double r_dual = 0.0;
  std::vector<ResidualSample> trace;
};

template <typename T>
class AdmmSolver {
 public:
  AdmmSolver(QpProblem<T> qp, AdmmSettings settings);

  // Problem data that can change without refactoring.
  void update_q(std::span<const T> q);
  void update_bounds(std::span<const T> l, std::span<const T> u);

  SolveResult<T> solve(const std::optional<AdmmState<T>>& initial = std::nullopt);

  void step(AdmmState<T>& s) const;
  // Norms of Ax - z and Px + q + A'y under the configured norm.
  [[nodiscard]] std::pair<double, double> residuals(const AdmmState<T>& s) const;

  [[nodiscard]] AdmmState<T> cold_state() const;

  /// Replaces the triangular-solve backend; nullptr restores the reference one.
  void set_backend(std::shared_ptr<TriangularSolver<T>> backend);

  [[nodiscard]] const QpProblem<T>& problem() const noexcept { return qp_; }
  [[nodiscard]] const AdmmSettings& settings() const noexcept { return settings_; }
  [[nodiscard]] const KktSystem<T>& kkt() const noexcept { return kkt_; }
  [[nodiscard]] int factorization_count() const noexcept { return factorizations_; }
  void clear_warm_start() noexcept { prior_.reset(); }

 private:
  void kkt_solve(std::span<T> rhs) const;
  [[nodiscard]] bool emulate_half() const noexcept {
    return settings_.storage == StoragePrecision::half;
  }

  QpProblem<T> qp_;
  AdmmSettings settings_;
  KktSystem<T> kkt_;
  int factorizations_ = 0;
  std::shared_ptr<TriangularSolver<T>> backend_;
  std::optional<AdmmState<T>> prior_;
  mutable std::vector<T> work_;
  mutable std::vector<T> perm_work_;
};

}  // namespace parspl
