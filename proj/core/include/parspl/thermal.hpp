#pragma once

#include <Eigen/Dense>
#include <vector>

#include "parspl/sparse.hpp"

namespace parspl {

struct GridSpec {
  index_t nw = 3;
  index_t nh = 3;
  int hp = 2;
  double ts = 1e-3;
  // PE index sets; empty means no per-domain rows.
  std::vector<std::vector<index_t>> domains;

  [[nodiscard]] index_t n_pe() const noexcept { return nw * nh; }
  [[nodiscard]] index_t n_states() const noexcept { return 2 * n_pe() + 1; }
  void validate() const;

  /// One domain per grid row for grids with more than one row, none otherwise.
  static std::vector<std::vector<index_t>> row_domains(index_t nw, index_t nh);
};

struct ThermalConstants {
  double c_si = 2e-3;         // J/K per element
  double c_cu = 2e-2;         // J/K per element
  double c_sink_per_pe = 2.0; // J/K, sink capacity scales with the die
  double r_si_cu = 2.0;       // K/W
  double r_si_lat = 10.0;     // K/W between neighbouring silicon elements
  double r_cu_sink = 15.0;    // K/W
  double r_sink_amb_pe = 8.0; // K/W; the sink sees r_sink_amb_pe / N_c
  double t_amb = 25.0;        // degC
  double t_limit = 85.0;      // degC

  void validate() const;
};

/// State order: (T_si_0, T_cu_0, ..., T_si_{N-1}, T_cu_{N-1}, T_sink), all
/// expressed as deviation from ambient.
struct ThermalPlantModel {
  GridSpec grid;
  ThermalConstants k;
  Eigen::MatrixXd a_t;  // n_x x n_x
  Eigen::MatrixXd b_t;  // n_x x N_c
  Eigen::MatrixXd c_t;  // N_c x n_x
  Eigen::MatrixXd d;    // discrete state matrix
  Eigen::MatrixXd e;    // discrete input matrix

  [[nodiscard]] index_t n_pe() const noexcept { return static_cast<index_t>(b_t.cols()); }
  [[nodiscard]] index_t n_states() const noexcept { return static_cast<index_t>(a_t.rows()); }
};

inline constexpr index_t si_state(index_t pe) { return 2 * pe; }
inline constexpr index_t cu_state(index_t pe) { return 2 * pe + 1; }

/// Continuous RC network; d and e are left empty.
ThermalPlantModel build_thermal_model(const GridSpec& grid, const ThermalConstants& k);

/// Matrix exponential by scaling and squaring with a diagonal Pade(8) approximant.
Eigen::MatrixXd expm(const Eigen::MatrixXd& a);

/// Zero-order hold: d = exp(a ts), e = int_0^ts exp(a s) ds b.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> discretize(const Eigen::MatrixXd& a,
                                                       const Eigen::MatrixXd& b, double ts);

/// build_thermal_model followed by discretize at grid.ts.
ThermalPlantModel build_discrete_model(const GridSpec& grid, const ThermalConstants& k);

/// Zeroes |m_ij| < cutoff unless keep(i, j) != 0 or (keep_diagonal and i == j).
Eigen::MatrixXd dmp_prune(const Eigen::MatrixXd& m, const Eigen::MatrixXd& keep, double cutoff,
                          bool keep_diagonal = true);

/// Prunes d against the structure of a_t and e against the structure of b_t.
ThermalPlantModel dmp_prune_model(const ThermalPlantModel& model, double cutoff);

/// Exact structural nonzero count.
index_t count_nonzeros(const Eigen::MatrixXd& m);

/// Steady state deviation for constant per-PE power.
Eigen::VectorXd steady_state(const ThermalPlantModel& model, const Eigen::VectorXd& power);

}  // namespace parspl
