#include "parspl/mpc.hpp"

#include <cstring>
#include <limits>

namespace parspl {

template <typename T>
std::uint64_t checksum(const SparseCSC<T>& a) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const void* p, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  const index_t dims[2] = {a.rows(), a.cols()};
  mix(dims, sizeof dims);
  mix(a.colptr().data(), a.colptr().size() * sizeof(index_t));
  mix(a.rowidx().data(), a.rowidx().size() * sizeof(index_t));
  mix(a.values().data(), a.values().size() * sizeof(T));
  return h;
}

template std::uint64_t checksum(const SparseCSC<float>&);
template std::uint64_t checksum(const SparseCSC<double>&);

index_t problem_nnz(const QpProblem<double>& qp) { return qp.P.nnz() + qp.A.nnz(); }

MpcQp build_mpc_qp(const ThermalPlantModel& model, const PowerModelParams& pm,
                   const MpcWeights& weights) {
  pm.validate();
  if (model.d.size() == 0) throw Error(ErrorCode::invalid_argument, "mpc: model is not discretized");
  const auto& grid = model.grid;
  MpcLayout L;
  L.nx = model.n_states();
  L.nc = model.n_pe();
  L.nd = static_cast<index_t>(grid.domains.size());
  L.hp = grid.hp;

  std::vector<double> dd = weights.d_diag;
  if (dd.empty()) dd.assign(L.nc, 1.0);
  if (static_cast<index_t>(dd.size()) != L.nc) throw DimensionError("mpc: d_diag must have N_c entries");
  for (double w : dd)
    if (!(w >= 0)) throw Error(ErrorCode::invalid_argument, "mpc: weights must be non-negative");

  const double inf = std::numeric_limits<double>::infinity();
  const index_t n = L.n(), m = L.m();

  std::vector<Triplet<double>> pt;
  for (int h = 0; h < L.hp; ++h)
    for (index_t pe = 0; pe < L.nc; ++pe)
      if (dd[pe] != 0.0) pt.push_back({L.u_col(h, pe), L.u_col(h, pe), 2.0 * dd[pe]});

  std::vector<Triplet<double>> at;
  std::vector<double> l(m, 0.0), u(m, 0.0);
  for (int h = 0; h < L.hp; ++h) {
    for (index_t i = 0; i < L.nx; ++i) {
      const index_t r = L.dyn_row(h, i);
      at.push_back({r, L.x_col(h + 1, i), 1.0});
      for (index_t j = 0; j < L.nx; ++j)
        if (model.d(i, j) != 0.0) at.push_back({r, L.x_col(h, j), -model.d(i, j)});
      for (index_t pe = 0; pe < L.nc; ++pe)
        if (model.e(i, pe) != 0.0) at.push_back({r, L.u_col(h, pe), -model.e(i, pe)});
    }
  }
  for (index_t i = 0; i < L.nx; ++i) at.push_back({L.init_row(i), L.x_col(0, i), 1.0});
  const double cap = model.k.t_limit - model.k.t_amb;
  for (int h = 1; h <= L.hp; ++h)
    for (index_t pe = 0; pe < L.nc; ++pe) {
      const index_t r = L.cap_row(h, pe);
      for (index_t j = 0; j < L.nx; ++j)
        if (model.c_t(pe, j) != 0.0) at.push_back({r, L.x_col(h, j), model.c_t(pe, j)});
      l[r] = -inf;
      u[r] = cap;
    }
  for (int h = 0; h < L.hp; ++h) {
    for (index_t pe = 0; pe < L.nc; ++pe) {
      const index_t r = L.box_row(h, pe);
      at.push_back({r, L.u_col(h, pe), 1.0});
      l[r] = pm.p_min;
      u[r] = pm.p_max;
    }
    const index_t rb = L.budget_row(h);
    for (index_t pe = 0; pe < L.nc; ++pe) at.push_back({rb, L.u_col(h, pe), 1.0});
    l[rb] = -inf;
    u[rb] = inf;
    for (index_t j = 0; j < L.nd; ++j) {
      const index_t rd = L.domain_row(h, j);
      for (index_t pe : grid.domains[j]) at.push_back({rd, L.u_col(h, pe), 1.0});
      l[rd] = -inf;
      u[rd] = inf;
    }
  }

  MpcQp out;
  out.layout = L;
  out.d_diag = dd;
  out.grid = grid;
  out.t_amb = model.k.t_amb;
  out.qp.P = SparseCSC<double>::from_triplets(n, n, pt);
  out.qp.A = SparseCSC<double>::from_triplets(m, n, at);
  out.qp.q.assign(n, 0.0);
  out.qp.l = std::move(l);
  out.qp.u = std::move(u);
  out.qp.validate();
  out.checksum_p = checksum(out.qp.P);
  out.checksum_a = checksum(out.qp.A);

  const Eigen::VectorXd floor_power = Eigen::VectorXd::Constant(L.nc, pm.p_min);
  if (steady_state(model, floor_power).maxCoeff() > cap)
    out.warnings.push_back("minimum power alone drives the steady state above the temperature limit");
  return out;
}

void update_mpc_step(MpcQp& mpc, std::span<const double> x_init_abs, std::span<const double> p_star,
                     double budget_total, std::span<const double> domain_budgets) {
  const auto& L = mpc.layout;
  if (static_cast<index_t>(x_init_abs.size()) != L.nx) throw DimensionError("mpc: x_init must have n_x entries");
  if (static_cast<index_t>(p_star.size()) != L.nc) throw DimensionError("mpc: p_star must have N_c entries");
  if (static_cast<index_t>(domain_budgets.size()) != L.nd)
    throw DimensionError("mpc: one budget per domain is required");
  if (checksum(mpc.qp.P) != mpc.checksum_p || checksum(mpc.qp.A) != mpc.checksum_a)
    throw Error(ErrorCode::internal, "mpc: P or A changed after assembly");

  auto& qp = mpc.qp;
  for (index_t i = 0; i < L.nx; ++i) qp.l[L.init_row(i)] = qp.u[L.init_row(i)] = x_init_abs[i] - mpc.t_amb;
  for (int h = 0; h < L.hp; ++h) {
    for (index_t pe = 0; pe < L.nc; ++pe) qp.q[L.u_col(h, pe)] = -2.0 * mpc.d_diag[pe] * p_star[pe];
    qp.u[L.budget_row(h)] = budget_total;
    for (index_t j = 0; j < L.nd; ++j) qp.u[L.domain_row(h, j)] = domain_budgets[j];
  }
  const double floor = qp.l[L.box_row(0, 0)];
  mpc.warnings.clear();
  if (floor * L.nc > budget_total) mpc.warnings.push_back("budget is below N_c * p_min");
}

}  // namespace parspl
