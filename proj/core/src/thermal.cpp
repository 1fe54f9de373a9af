#include "parspl/thermal.hpp"

#include <cmath>
#include <string>

namespace parspl {

void GridSpec::validate() const {
  if (nw < 1 || nh < 1) throw Error(ErrorCode::invalid_argument, "grid: nw and nh must be >= 1");
  if (hp < 1) throw Error(ErrorCode::invalid_argument, "grid: hp must be >= 1");
  if (!(ts > 0)) throw Error(ErrorCode::invalid_argument, "grid: ts must be positive");
  if (domains.empty()) return;
  std::vector<int> seen(n_pe(), 0);
  for (const auto& dom : domains)
    for (index_t pe : dom) {
      if (pe < 0 || pe >= n_pe())
        throw Error(ErrorCode::invalid_argument, "grid: domain PE index out of range");
      ++seen[pe];
    }
  for (index_t pe = 0; pe < n_pe(); ++pe)
    if (seen[pe] != 1)
      throw Error(ErrorCode::invalid_argument,
                  "grid: domains must partition the PEs (PE " + std::to_string(pe) + ")");
}

std::vector<std::vector<index_t>> GridSpec::row_domains(index_t nw, index_t nh) {
  std::vector<std::vector<index_t>> out;
  if (nh < 2) return out;
  for (index_t r = 0; r < nh; ++r) {
    std::vector<index_t> dom;
    for (index_t c = 0; c < nw; ++c) dom.push_back(r * nw + c);
    out.push_back(std::move(dom));
  }
  return out;
}

void ThermalConstants::validate() const {
  for (double v : {c_si, c_cu, c_sink_per_pe, r_si_cu, r_si_lat, r_cu_sink, r_sink_amb_pe})
    if (!(v > 0)) throw Error(ErrorCode::invalid_argument, "thermal: R and C constants must be positive");
  if (!(t_limit > t_amb)) throw Error(ErrorCode::invalid_argument, "thermal: t_limit must exceed t_amb");
}

ThermalPlantModel build_thermal_model(const GridSpec& grid, const ThermalConstants& k) {
  grid.validate();
  k.validate();
  const index_t nc = grid.n_pe();
  const index_t nx = grid.n_states();
  const index_t sink = nx - 1;
  const double c_sink = k.c_sink_per_pe * nc;
  const double r_sink_amb = k.r_sink_amb_pe / nc;

  ThermalPlantModel m;
  m.grid = grid;
  m.k = k;
  m.a_t = Eigen::MatrixXd::Zero(nx, nx);
  m.b_t = Eigen::MatrixXd::Zero(nx, nc);
  m.c_t = Eigen::MatrixXd::Zero(nc, nx);

  auto couple = [&](index_t i, index_t j, double r, double ci, double cj) {
    m.a_t(i, j) += 1.0 / (r * ci);
    m.a_t(i, i) -= 1.0 / (r * ci);
    m.a_t(j, i) += 1.0 / (r * cj);
    m.a_t(j, j) -= 1.0 / (r * cj);
  };

  for (index_t row = 0; row < grid.nh; ++row)
    for (index_t col = 0; col < grid.nw; ++col) {
      const index_t pe = row * grid.nw + col;
      couple(si_state(pe), cu_state(pe), k.r_si_cu, k.c_si, k.c_cu);
      couple(cu_state(pe), sink, k.r_cu_sink, k.c_cu, c_sink);
      if (col + 1 < grid.nw) couple(si_state(pe), si_state(pe + 1), k.r_si_lat, k.c_si, k.c_si);
      if (row + 1 < grid.nh)
        couple(si_state(pe), si_state(pe + grid.nw), k.r_si_lat, k.c_si, k.c_si);
      m.b_t(si_state(pe), pe) = 1.0 / k.c_si;
      m.c_t(pe, si_state(pe)) = 1.0;
    }
  m.a_t(sink, sink) -= 1.0 / (r_sink_amb * c_sink);
  return m;
}

Eigen::MatrixXd expm(const Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
  int s = 0;
  if (norm > 1.0) s = static_cast<int>(std::ceil(std::log2(norm)));
  const Eigen::MatrixXd x = a / std::ldexp(1.0, s);

  // c_k = (2m-k)! m! / ((2m)! k! (m-k)!), m = 8
  constexpr int m = 8;
  double c[m + 1];
  c[0] = 1.0;
  for (int k = 1; k <= m; ++k) c[k] = c[k - 1] * (m - k + 1) / (static_cast<double>(k) * (2 * m - k + 1));

  Eigen::MatrixXd num = c[0] * Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd den = num;
  Eigen::MatrixXd pow = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k <= m; ++k) {
    pow = pow * x;
    num += c[k] * pow;
    den += ((k % 2) ? -c[k] : c[k]) * pow;
  }
  Eigen::MatrixXd r = den.partialPivLu().solve(num);
  for (int i = 0; i < s; ++i) r = r * r;
  return r;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> discretize(const Eigen::MatrixXd& a,
                                                       const Eigen::MatrixXd& b, double ts) {
  if (a.rows() != a.cols() || b.rows() != a.rows())
    throw DimensionError("discretize: incompatible a and b");
  if (!(ts > 0)) throw Error(ErrorCode::invalid_argument, "discretize: ts must be positive");
  const Eigen::Index nx = a.rows(), nu = b.cols();
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(nx + nu, nx + nu);
  aug.topLeftCorner(nx, nx) = a * ts;
  aug.topRightCorner(nx, nu) = b * ts;
  const Eigen::MatrixXd ex = expm(aug);
  return {ex.topLeftCorner(nx, nx), ex.topRightCorner(nx, nu)};
}

ThermalPlantModel build_discrete_model(const GridSpec& grid, const ThermalConstants& k) {
  auto m = build_thermal_model(grid, k);
  std::tie(m.d, m.e) = discretize(m.a_t, m.b_t, grid.ts);
  return m;
}

Eigen::MatrixXd dmp_prune(const Eigen::MatrixXd& m, const Eigen::MatrixXd& keep, double cutoff,
                          bool keep_diagonal) {
  if (!(cutoff >= 0)) throw Error(ErrorCode::invalid_argument, "dmp: cutoff must be >= 0");
  if (keep.rows() != m.rows() || keep.cols() != m.cols())
    throw DimensionError("dmp: structure mask has the wrong shape");
  Eigen::MatrixXd out = m;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if ((keep_diagonal && i == j) || keep(i, j) != 0.0) continue;
      if (std::abs(m(i, j)) < cutoff) out(i, j) = 0.0;
    }
  return out;
}

ThermalPlantModel dmp_prune_model(const ThermalPlantModel& model, double cutoff) {
  if (model.d.size() == 0) throw Error(ErrorCode::invalid_argument, "dmp: model is not discretized");
  ThermalPlantModel out = model;
  out.d = dmp_prune(model.d, model.a_t, cutoff);
  out.e = dmp_prune(model.e, model.b_t, cutoff, false);
  return out;
}

index_t count_nonzeros(const Eigen::MatrixXd& m) {
  return static_cast<index_t>((m.array() != 0.0).count());
}

Eigen::VectorXd steady_state(const ThermalPlantModel& model, const Eigen::VectorXd& power) {
  return -model.a_t.partialPivLu().solve(model.b_t * power);
}

}  // namespace parspl
