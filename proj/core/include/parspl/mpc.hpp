#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "parspl/power.hpp"
#include "parspl/qp.hpp"
#include "parspl/thermal.hpp"

namespace parspl {

/// Row and column bookkeeping of the condensed MPC problem.
///
/// Columns: x_0 .. x_hp (n_x each), then u_0 .. u_{hp-1} (N_c each).
/// Rows: dynamics (n_x per stage), initial state (n_x), silicon caps for
/// x_1 .. x_hp (N_c per stage), power boxes (N_c per stage), total budget
/// (one per stage), domain budgets (n_d per stage).
struct MpcLayout {
  index_t nx = 0, nc = 0, nd = 0;
  int hp = 0;

  [[nodiscard]] index_t n() const { return nx * (hp + 1) + nc * hp; }
  [[nodiscard]] index_t m() const { return budget_row(0) + hp + nd * hp; }
  [[nodiscard]] index_t x_col(int h, index_t i) const { return h * nx + i; }
  [[nodiscard]] index_t u_col(int h, index_t pe) const { return nx * (hp + 1) + h * nc + pe; }
  [[nodiscard]] index_t dyn_row(int h, index_t i) const { return h * nx + i; }
  [[nodiscard]] index_t init_row(index_t i) const { return hp * nx + i; }
  [[nodiscard]] index_t cap_row(int h, index_t pe) const { return (hp + 1) * nx + (h - 1) * nc + pe; }
  [[nodiscard]] index_t box_row(int h, index_t pe) const { return (hp + 1) * nx + hp * nc + h * nc + pe; }
  [[nodiscard]] index_t budget_row(int h) const { return (hp + 1) * nx + 2 * hp * nc + h; }
  [[nodiscard]] index_t domain_row(int h, index_t j) const { return budget_row(0) + hp + h * nd + j; }
};

struct MpcWeights {
  // Diagonal of D; empty means all ones.
  std::vector<double> d_diag;
};

struct MpcQp {
  QpProblem<double> qp;
  MpcLayout layout;
  std::vector<double> d_diag;
  GridSpec grid;
  double t_amb = 25.0;
  std::uint64_t checksum_p = 0;
  std::uint64_t checksum_a = 0;
  std::vector<std::string> warnings;
};

/// Condenses the (possibly pruned) discrete model into the QP. Budgets are
/// initialised to +inf; the initial state to ambient.
MpcQp build_mpc_qp(const ThermalPlantModel& model, const PowerModelParams& pm,
                   const MpcWeights& weights = {});

/// Writes the time-varying data. x_init is absolute temperature (n_x), p_star
/// is the per-PE target power, domain_budgets has one entry per domain.
/// Throws Error(internal) if P or A were modified since assembly.
void update_mpc_step(MpcQp& mpc, std::span<const double> x_init_abs, std::span<const double> p_star,
                     double budget_total, std::span<const double> domain_budgets);

/// Order-sensitive FNV-1a over structure and values.
template <typename T>
std::uint64_t checksum(const SparseCSC<T>& a);

/// nnz(P) + nnz(A), the problem-size metric.
index_t problem_nnz(const QpProblem<double>& qp);

}  // namespace parspl
